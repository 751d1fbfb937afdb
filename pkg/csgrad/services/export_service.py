from __future__ import annotations

import csv
import io
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from openpyxl import Workbook

from ..config import get_output_format, get_sheet_name, get_significant_digits
from ..domain.errors import ConfigError
from ..domain.record import ConvergenceRecord

logger = logging.getLogger(__name__)

CSV_HEADER = ["method", "function", "delta", "error", "bound", "slope"]
FORMATS = ("csv", "json", "xlsx")


class ExportService:
    """
    ConvergenceRecord の一覧を CSV / JSON / Excel に書き出すサービス。

    - CSV のヘッダは method,function,delta,error,bound,slope で固定
    - 行は記録ごとに Δ の降順（記録内の並び順のまま）
    - 実数は既定で 17 桁の有効数字（往復で値が変わらない）
    """

    def __init__(self, cfg: Dict[str, Any]) -> None:
        self.cfg = cfg
        self.digits: int = get_significant_digits(cfg)
        self.sheet: str = get_sheet_name(cfg)

    # ------------------------------------------------------
    # 数値の整形
    # ------------------------------------------------------
    def fmt(self, value: Optional[float]) -> str:
        if value is None:
            return ""
        return f"{value:.{self.digits}g}"

    def rows(self, records: Sequence[ConvergenceRecord]) -> List[List[str]]:
        out = []
        for rec in records:
            for p in rec.points:
                out.append(
                    [
                        rec.method,
                        rec.function,
                        self.fmt(p.delta),
                        self.fmt(p.error),
                        self.fmt(p.bound),
                        self.fmt(rec.fitted_slope),
                    ]
                )
        return out

    # ------------------------------------------------------
    # 文字列として描画
    # ------------------------------------------------------
    def to_csv(self, records: Sequence[ConvergenceRecord]) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        writer.writerows(self.rows(records))
        return buf.getvalue()

    def to_json(self, records: Sequence[ConvergenceRecord]) -> str:
        payload = [
            {
                "method": rec.method,
                "function": rec.function,
                "geometry": rec.geometry,
                "comparison_space": rec.comparison_space.value,
                "fitted_slope": rec.fitted_slope,
                "slope_ci": rec.slope_ci,
                "points": [{"delta": p.delta, "error": p.error, "bound": p.bound} for p in rec.points],
            }
            for rec in records
        ]
        # json は float を repr（最短往復表現）で出すので桁落ちしない
        return json.dumps(payload, indent=2, ensure_ascii=False) + "\n"

    # ------------------------------------------------------
    # ファイル出力
    # ------------------------------------------------------
    def write(self, records: Sequence[ConvergenceRecord], out: Path | str, fmt: Optional[str] = None) -> Path:
        """records を out に書き出して、そのパスを返す。"""
        fmt = fmt or get_output_format(self.cfg)
        if fmt not in FORMATS:
            raise ConfigError(f"未対応の出力形式です: {fmt}（{', '.join(FORMATS)}）")
        path = Path(out)
        path.parent.mkdir(parents=True, exist_ok=True)

        if fmt == "xlsx":
            self._write_xlsx(records, path)
        else:
            text = self.to_csv(records) if fmt == "csv" else self.to_json(records)
            with open(path, "w", encoding="utf-8", newline="") as f:
                f.write(text)

        logger.info(f"{len(records)} 件の記録を {fmt} で書き出しました: {path}")
        return path

    def _write_xlsx(self, records: Sequence[ConvergenceRecord], path: Path) -> None:
        wb = Workbook()
        ws = wb.active
        ws.title = self.sheet

        ws.append(CSV_HEADER)
        for rec in records:
            for p in rec.points:
                # セルには数値のまま入れる（Excel 側で桁を落とさない）
                ws.append([rec.method, rec.function, p.delta, p.error, p.bound, rec.fitted_slope])

        wb.save(path)
