from __future__ import annotations

import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv

# このファイルは csgrad/config.py にある想定
# → プロジェクトルートは parents[1]
PROJECT_ROOT: Path = Path(__file__).resolve().parents[1]

DEFAULT_DELTAS: List[float] = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3]


def init_env() -> None:
    """
    .env を読み込む。
    - プロジェクトルート直下の .env を対象とする
    """
    env_path = PROJECT_ROOT / ".env"
    if env_path.exists():
        load_dotenv(env_path)
    else:
        # .env が無くてもエラーにはしない（CI などでは環境変数で渡す想定）
        load_dotenv()


def load_app_config(path: str | None = None) -> Dict[str, Any]:
    """
    config.json を読み込む。
    引数 path が None の場合、環境変数 CSGRAD_CONFIG、
    それも無ければプロジェクトルート直下の config.json を読む。
    ファイルが存在しない場合は空の設定（全項目デフォルト）を返す。
    """
    if path is None:
        path = os.getenv("CSGRAD_CONFIG") or str(PROJECT_ROOT / "config.json")

    if not Path(path).exists():
        return {}

    with open(path, encoding="utf-8") as f:
        return json.load(f)


def configure_logging(level: Optional[str] = None) -> None:
    """
    ルートロガーを設定する。
    優先順位: 引数 level → 環境変数 CSGRAD_LOG_LEVEL → WARNING
    """
    name = (level or os.getenv("CSGRAD_LOG_LEVEL") or "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, name, logging.WARNING),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


# --------------------------------------------------------
# 型付きゲッター（部分的な config でも例外にしない）
# --------------------------------------------------------
def _section(cfg: Dict[str, Any], name: str) -> Dict[str, Any]:
    value = cfg.get(name, {})
    return value if isinstance(value, dict) else {}


def get_rank_tol(cfg: Dict[str, Any]) -> float:
    return float(_section(cfg, "numerics").get("rank_tol", 0.0))


def get_error_floor(cfg: Dict[str, Any]) -> float:
    return float(_section(cfg, "numerics").get("error_floor", 1e-14))


def get_min_singular_value(cfg: Dict[str, Any]) -> float:
    return float(_section(cfg, "generator").get("min_singular_value", 0.1))


def get_max_attempts(cfg: Dict[str, Any]) -> int:
    return int(_section(cfg, "generator").get("max_attempts", 1000))


def get_default_deltas(cfg: Dict[str, Any]) -> List[float]:
    return [float(d) for d in _section(cfg, "sweep").get("deltas", DEFAULT_DELTAS)]


def get_min_points(cfg: Dict[str, Any]) -> int:
    return int(_section(cfg, "sweep").get("min_points", 4))


def get_output_format(cfg: Dict[str, Any]) -> str:
    return str(_section(cfg, "output").get("format", "csv"))


def get_significant_digits(cfg: Dict[str, Any]) -> int:
    return int(_section(cfg, "output").get("significant_digits", 17))


def get_sheet_name(cfg: Dict[str, Any]) -> str:
    return str(_section(cfg, "output").get("sheet", "sweep"))


def get_verify_cases(cfg: Dict[str, Any]) -> int:
    return int(_section(cfg, "verify").get("cases", 200))


def get_verify_seed(cfg: Dict[str, Any]) -> int:
    return int(_section(cfg, "verify").get("seed", 20240517))
