from __future__ import annotations

import json
import logging
from typing import List, Optional

from fastapi import APIRouter, HTTPException
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel, Field

from ...config import get_default_deltas, get_error_floor, get_min_points, get_rank_tol, load_app_config
from ...domain.errors import ConfigError, CsgradError
from ...domain.functions import TestFunction
from ...domain.sample_set import SampleSet
from ...services.export_service import ExportService
from ...services.golden import GoldenSuite
from ...services.harness import (
    POWER_SWEEP_EXPONENT,
    MethodOptions,
    bound_for,
    estimate,
    input_dim,
    reference_point,
    sweep,
)
from ...services.oracle import lookup, lookup_vector, registry, vector_registry
from ...services.sampleset import sample_set_from_dict

# ロガー設定
logger = logging.getLogger(__name__)

router = APIRouter()


# リクエストボディのモデル定義
class EstimateRequest(BaseModel):
    function: str
    x0: Optional[List[float]] = None  # 省略時は関数の既定の基準点
    directions: List[List[float]]
    methods: List[str] = Field(default_factory=lambda: ["gcsg"])
    partners: List[str] = Field(default_factory=list)  # gcscg:product / quotient / product_k
    inner: Optional[str] = None  # gcscg:chain の内側写像
    k: float = POWER_SWEEP_EXPONENT  # gcscg:power の指数


class SweepRequest(EstimateRequest):
    deltas: Optional[List[float]] = None
    format: str = "json"  # "json" or "csv"


def _options(request: EstimateRequest) -> MethodOptions:
    return MethodOptions(
        partners=tuple(lookup(name) for name in request.partners),
        inner=lookup_vector(request.inner) if request.inner else None,
        k=request.k,
    )


def _sample_set(request: EstimateRequest, fn: TestFunction, opts: MethodOptions) -> SampleSet:
    """x0 を省略した場合は手法の既定の基準点を使う。"""
    if not request.methods:
        raise ConfigError("methods が空です")
    dims = {input_dim(method, fn, opts) for method in request.methods}
    if len(dims) > 1:
        raise ConfigError(f"手法ごとに入力次元が異なります（{sorted(dims)}）")
    base = request.x0 if request.x0 is not None else reference_point(request.methods[0], fn, opts).tolist()
    return sample_set_from_dict({"x0": base, "directions": request.directions})


@router.get("/functions")
async def list_functions():
    """レジストリに登録された検証用関数の一覧"""
    return {
        "scalar": [
            {"name": f.name, "dim": f.dim, "x0": f.x0().tolist(), "description": f.description}
            for f in registry()
        ],
        "vector": [
            {"name": g.name, "dim_in": g.dim_in, "dim_out": g.dim_out, "description": g.description}
            for g in vector_registry()
        ],
    }


@router.post("/estimate")
async def estimate_gradient(request: EstimateRequest):
    """
    指定したサンプル集合で勾配を推定する

    Returns:
        手法ごとの推定値・分類・評価回数・（あれば）誤差上界
    """
    try:
        cfg = load_app_config()
        rank_tol = get_rank_tol(cfg)
        fn = lookup(request.function)
        opts = _options(request)
        xs = _sample_set(request, fn, opts)
        logger.info(f"推定開始: {fn.name}, n={xs.n}, m={xs.m}, methods={request.methods}")

        results = []
        for method in request.methods:
            est = estimate(method, fn, xs, rank_tol, opts)
            report = bound_for(method, fn, xs, rank_tol=rank_tol, options=opts)
            results.append({
                "method": est.method,
                "gradient": est.value.tolist(),
                "classification": est.classification.value if est.classification else None,
                "eval_count": est.eval_count,
                "delta": est.delta,
                "bound": None if report is None else report.bound,
                "comparison_space": None if report is None else report.comparison_space.value,
            })
        return JSONResponse({"success": True, "function": fn.name, "results": results})

    except CsgradError as e:
        logger.warning(f"推定の入力エラー: {e}")
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.error(f"推定エラー: {str(e)}", exc_info=True)
        raise HTTPException(status_code=500, detail=str(e))


@router.post("/sweep")
async def run_sweep(request: SweepRequest):
    """
    サンプル集合をテンプレートとして Δ スイープを行い、誤差と上界の表を返す
    """
    if request.format not in ("json", "csv"):
        raise HTTPException(status_code=400, detail=f"未対応の出力形式です: {request.format}（json, csv）")
    try:
        cfg = load_app_config()
        fn = lookup(request.function)
        opts = _options(request)
        geometry = _sample_set(request, fn, opts)
        deltas = request.deltas if request.deltas is not None else get_default_deltas(cfg)
        records = [
            sweep(
                fn,
                geometry,
                deltas,
                method,
                rank_tol=get_rank_tol(cfg),
                error_floor=get_error_floor(cfg),
                min_points=get_min_points(cfg),
                options=opts,
            )
            for method in request.methods
        ]
        logger.info(f"スイープ完了: {fn.name}, {len(records)} 手法 × {len(deltas)} 点")

        exporter = ExportService(cfg)
        if request.format == "csv":
            return PlainTextResponse(exporter.to_csv(records), media_type="text/csv")
        return JSONResponse({"success": True, "records": json.loads(exporter.to_json(records))})

    except CsgradError as e:
        logger.warning(f"スイープの入力エラー: {e}")
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.error(f"スイープエラー: {str(e)}", exc_info=True)
        raise HTTPException(status_code=500, detail=str(e))


@router.get("/verify")
async def verify():
    """既知値と性質ベースの検証スイートを実行する"""
    cfg = load_app_config()
    results = GoldenSuite(cfg).run()
    failed = sum(not r.passed for r in results)
    return JSONResponse({
        "success": failed == 0,
        "passed": len(results) - failed,
        "total": len(results),
        "results": [{"name": r.name, "passed": r.passed, "detail": r.detail} for r in results],
    })
