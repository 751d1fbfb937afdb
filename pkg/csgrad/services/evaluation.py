from __future__ import annotations

import logging
from typing import Callable, List, Sequence

import numpy as np

from ..domain.errors import SampleSetError
from ..domain.matrix import Vector
from ..domain.sample_set import EvaluationTable, SampleSet

logger = logging.getLogger(__name__)

ScalarFn = Callable[[Vector], float]
VectorFn = Callable[[Vector], Sequence[float]]


def evaluate(
    fn: ScalarFn,
    xs: SampleSet,
    centred: bool = True,
    include_x0: bool = True,
) -> EvaluationTable:
    """
    呼び出し可能な f から評価テーブルを作る。

    centred=True なら x⁰−dⁱ でも評価する。include_x0=False なら f(x⁰) を評価しない
    （δᶜ だけが必要な GCSG 用）。
    """
    f_x0 = float(fn(xs.x0)) if include_x0 else None
    f_plus = tuple(float(fn(xs.x0 + d)) for d in xs.directions)
    f_minus = tuple(float(fn(xs.x0 - d)) for d in xs.directions) if centred else None
    try:
        return EvaluationTable(f_x0=f_x0, f_plus=f_plus, f_minus=f_minus)
    except SampleSetError:
        logger.error(f"関数値に有限でない値が含まれています（x0={xs.x0.tolist()}）")
        raise


def evaluate_vector(
    fn: VectorFn,
    xs: SampleSet,
    centred: bool = True,
) -> List[EvaluationTable]:
    """ベクトル値写像 g を評価し、成分ごとのテーブルを返す（g は各点で 1 回だけ呼ぶ）。"""
    g0 = np.atleast_1d(np.asarray(fn(xs.x0), dtype=np.float64))
    plus = np.array([np.atleast_1d(fn(xs.x0 + d)) for d in xs.directions], dtype=np.float64)
    minus = (
        np.array([np.atleast_1d(fn(xs.x0 - d)) for d in xs.directions], dtype=np.float64)
        if centred
        else None
    )
    return [
        EvaluationTable(
            f_x0=float(g0[j]),
            f_plus=tuple(plus[:, j]),
            f_minus=None if minus is None else tuple(minus[:, j]),
        )
        for j in range(g0.size)
    ]


def evaluate_image(fn: ScalarFn, g_x0: Vector, h: np.ndarray) -> EvaluationTable:
    """
    f を像集合 g(X) ∪ g(X)⁻ 上で評価する（点は g(x⁰)±hⁱ）。
    g(x⁰−dⁱ) ではなく g(x⁰)−hⁱ である点に注意。
    """
    return EvaluationTable(
        f_x0=float(fn(g_x0)),
        f_plus=tuple(float(fn(g_x0 + hi)) for hi in h),
        f_minus=tuple(float(fn(g_x0 - hi)) for hi in h),
    )

