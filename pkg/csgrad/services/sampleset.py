from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

import numpy as np

from ..domain.errors import DimensionMismatchError, MissingEvaluationError, SampleSetError
from ..domain.matrix import Matrix, Vector, as_matrix, as_vector
from ..domain.sample_set import Classification, EvaluationTable, SampleSet
from .matcore import numerical_rank

logger = logging.getLogger(__name__)


# --------------------------------------------------------
# 構築
# --------------------------------------------------------
def from_points(points: Sequence[Any]) -> SampleSet:
    """
    順序付きの点列 ⟨x⁰, x¹, …, xᵐ⟩ から SampleSet を作る（dⁱ = xⁱ − x⁰）。
    1 次元の場合はスカラーの列でもよい（例: [-1, 0, 1]）。
    """
    arr = np.array(points, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2 or arr.shape[0] < 2:
        raise SampleSetError("点列には基準点と少なくとも 1 つの点が必要です")
    return SampleSet(x0=arr[0], directions=arr[1:] - arr[0])


def sample_set_from_dict(data: Dict[str, Any]) -> SampleSet:
    """{"x0": [...], "directions": [[...], ...]} 形式の辞書から SampleSet を作る。"""
    if not isinstance(data, dict) or "x0" not in data or "directions" not in data:
        raise SampleSetError('サンプル集合には "x0" と "directions" の両方が必要です')
    x0 = np.atleast_1d(np.array(data["x0"], dtype=np.float64))
    directions = np.array(data["directions"], dtype=np.float64)
    if directions.ndim == 1:
        directions = directions.reshape(-1, 1) if x0.size == 1 else directions.reshape(1, -1)
    return SampleSet(x0=x0, directions=directions)


def sample_set_to_dict(xs: SampleSet) -> Dict[str, Any]:
    return {"x0": xs.x0.tolist(), "directions": xs.directions.tolist()}


def load_sample_set(path: str | Path) -> SampleSet:
    """JSON ファイルからサンプル集合を読み込む。"""
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError as e:
        raise SampleSetError(f"サンプル集合ファイルが見つかりません: {path}") from e
    except json.JSONDecodeError as e:
        raise SampleSetError(f"サンプル集合ファイルが JSON として不正です: {path}: {e}") from e
    try:
        return sample_set_from_dict(data)
    except SampleSetError:
        raise
    except (TypeError, ValueError) as e:
        raise SampleSetError(f"サンプル集合ファイルの値が不正です: {path}: {e}") from e


# --------------------------------------------------------
# 幾何量
# --------------------------------------------------------
def direction_matrix(xs: SampleSet) -> Matrix:
    """S = [d¹ ⋯ dᵐ]（n×m、順序保持）。"""
    return as_matrix(xs.directions.T, "S")


def radius(xs: SampleSet) -> float:
    """Δ = max_i ‖dⁱ‖"""
    return float(np.max(np.linalg.norm(xs.directions, axis=1)))


def reflect(xs: SampleSet) -> SampleSet:
    """X⁻ = ⟨x⁰, x⁰−d¹, …, x⁰−dᵐ⟩"""
    return SampleSet(x0=xs.x0, directions=-xs.directions)


def scaled_matrix(xs: SampleSet) -> Matrix:
    """Ŝ = S/Δ"""
    return as_matrix(direction_matrix(xs) / radius(xs), "S_hat")


def classify(xs: SampleSet, rank_tol: float = 0.0) -> Classification:
    n, m = xs.n, xs.m
    rank = numerical_rank(direction_matrix(xs), rank_tol)
    if m > n and rank == n:
        return Classification.OVERDETERMINED
    if m == n and rank == n:
        return Classification.DETERMINED
    if m < n and rank == m:
        return Classification.UNDERDETERMINED
    return Classification.UNDETERMINED


# --------------------------------------------------------
# 差分ベクトル
# --------------------------------------------------------
def delta_s(tab: EvaluationTable) -> Vector:
    """δˢ_i = f(x⁰+dⁱ) − f(x⁰)"""
    if tab.f_x0 is None:
        raise MissingEvaluationError("δˢ には f(x⁰) が必要です")
    return as_vector(np.asarray(tab.f_plus) - tab.f_x0, "delta_s")


def delta_c(tab: EvaluationTable) -> Vector:
    """δᶜ_i = ½(f(x⁰+dⁱ) − f(x⁰−dⁱ))"""
    if tab.f_minus is None:
        raise MissingEvaluationError("δᶜ には反転点 x⁰−dⁱ での値（f_minus）が必要です")
    return as_vector(0.5 * (np.asarray(tab.f_plus) - np.asarray(tab.f_minus)), "delta_c")


def reflected_table(tab: EvaluationTable) -> EvaluationTable:
    """X⁻ 上のテーブル（f_plus と f_minus を入れ替える）。"""
    if tab.f_minus is None:
        raise MissingEvaluationError("反転テーブルには f_minus が必要です")
    return EvaluationTable(f_x0=tab.f_x0, f_plus=tab.f_minus, f_minus=tab.f_plus)


def check_table(xs: SampleSet, tab: EvaluationTable) -> None:
    if tab.m != xs.m:
        raise DimensionMismatchError(
            f"評価テーブルの長さ {tab.m} がサンプル集合の方向数 {xs.m} と一致しません"
        )


# --------------------------------------------------------
# 乱数による幾何生成
# --------------------------------------------------------
def generate(
    n: int,
    m: int,
    seed: int,
    x0: Optional[Sequence[float]] = None,
    min_singular_value: float = 0.1,
    allow_degenerate: bool = False,
    max_attempts: int = 1000,
) -> SampleSet:
    """
    半径 1 の方向をシード付き乱数で生成する。

    ランク落ちに近い Ŝ（非零特異値の最小値 < min_singular_value）は棄却して引き直す。
    allow_degenerate=True のときは棄却しない。
    """
    if n < 1 or m < 1:
        raise SampleSetError(f"n と m は 1 以上である必要があります（n={n}, m={m}）")
    rng = np.random.default_rng(seed)
    base = np.zeros(n) if x0 is None else as_vector(x0, "x0")
    if base.size != n:
        raise SampleSetError(f"x0 の次元 {base.size} が n={n} と一致しません")

    k = min(n, m)
    for attempt in range(1, max_attempts + 1):
        raw = rng.standard_normal((m, n))
        norms = np.linalg.norm(raw, axis=1)
        if np.any(norms == 0):
            continue
        # 長さを [0.5, 1] に散らし、最長を 1 にそろえる
        lengths = rng.uniform(0.5, 1.0, size=m)
        lengths /= lengths.max()
        directions = raw / norms[:, None] * lengths[:, None]
        s = np.linalg.svd(directions.T, compute_uv=False)
        if allow_degenerate or s[k - 1] >= min_singular_value:
            logger.debug(f"generate: n={n}, m={m}, seed={seed}, attempts={attempt}")
            return SampleSet(x0=base, directions=directions)

    raise SampleSetError(
        f"{max_attempts} 回試行しても σ_min(Ŝ) ≥ {min_singular_value} の集合が得られませんでした"
    )


def scale(xs: SampleSet, factor: float) -> SampleSet:
    """方向をすべて factor 倍した集合（x⁰ は固定）。"""
    if factor <= 0:
        raise SampleSetError(f"倍率は正である必要があります（{factor}）")
    return SampleSet(x0=xs.x0, directions=xs.directions * factor)
