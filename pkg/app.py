from __future__ import annotations

import logging
import os
from typing import Any, Dict

import uvicorn
from fastapi import FastAPI

from csgrad.config import configure_logging, get_rank_tol, init_env, load_app_config
from csgrad.services.harness import sweep_methods
from csgrad.services.oracle import registry, vector_registry

logger = logging.getLogger(__name__)

SERVICE_NAME = "csgrad"
SERVICE_VERSION = "1.0.0"

ENDPOINTS: Dict[str, str] = {
    "GET /api/functions": "登録済みのスカラー関数とベクトル値写像",
    "POST /api/estimate": "サンプル集合での勾配推定（分類・評価回数・誤差上界つき）",
    "POST /api/sweep": "Δ を縮めたときの誤差と上界の表（json / csv）",
    "GET /api/verify": "既知値と性質検査からなる検証スイート",
}


def service_summary(cfg: Dict[str, Any]) -> Dict[str, Any]:
    """ルートで返すサービス概要。手法名と関数名はレジストリから組み立てる。"""
    return {
        "service": SERVICE_NAME,
        "version": SERVICE_VERSION,
        "summary": "関数値だけから一般化（中心）シンプレックス勾配を推定し、計算規則と誤差上界を検証する",
        "methods": sweep_methods(),
        "functions": {
            "scalar": [f.name for f in registry()],
            "vector": [g.name for g in vector_registry()],
        },
        "rank_tol": get_rank_tol(cfg),
        "endpoints": ENDPOINTS,
        "docs": "/docs",
    }


def create_app() -> FastAPI:
    """.env と config.json を読んでから API を組み立てる"""
    init_env()
    configure_logging()
    cfg = load_app_config()  # 壊れた設定は起動時に ConfigError

    app = FastAPI(title=f"{SERVICE_NAME} API", version=SERVICE_VERSION)

    from csgrad.ui.pages.gradient_page import router
    app.include_router(router, prefix="/api", tags=["gradient"])

    @app.get("/", tags=["meta"])
    async def describe():
        return service_summary(cfg)

    logger.info(f"{SERVICE_NAME} API を初期化しました（手法 {len(sweep_methods())} 種）")
    return app


app = create_app()


if __name__ == "__main__":
    uvicorn.run(app, host=os.environ.get("HOST", "0.0.0.0"), port=int(os.environ.get("PORT", 8000)))
