from __future__ import annotations

import logging
from typing import Sequence

import numpy as np

from ..domain.errors import DimensionMismatchError, MissingEvaluationError, SampleSetError
from ..domain.estimate import CentredJacobian, GradientEstimate, Projector
from ..domain.matrix import Matrix, Vector, as_matrix, as_vector
from ..domain.sample_set import Classification, EvaluationTable, SampleSet
from .matcore import numerical_rank, pseudoinverse, solve_least_squares
from .sampleset import (
    check_table,
    classify,
    delta_c,
    delta_s,
    direction_matrix,
    radius,
    reflect,
    reflected_table,
)

logger = logging.getLogger(__name__)


def apply_pinv_transpose(xs: SampleSet, rhs: Vector, rank_tol: float = 0.0) -> Vector:
    """(Sᵀ)† rhs を擬似逆行列を作らずに計算する。"""
    return solve_least_squares(direction_matrix(xs).T, rhs, rank_tol)


def make_estimate(
    xs: SampleSet, value: Vector, method: str, eval_count: int, rank_tol: float
) -> GradientEstimate:
    cls = classify(xs, rank_tol)
    if cls is Classification.UNDETERMINED:
        # 最小ノルム解としては定義できるが、誤差上界の対象外
        logger.info(f"{method}: S がランク落ちしています（undetermined）。最小ノルム解を返します")
    return GradientEstimate(
        value=as_vector(value, "gradient"),
        method=method,
        m=xs.m,
        delta=radius(xs),
        eval_count=eval_count,
        classification=cls,
    )


# --------------------------------------------------------
# GSG / GCSG
# --------------------------------------------------------
def gsg(xs: SampleSet, tab: EvaluationTable, rank_tol: float = 0.0) -> GradientEstimate:
    """一般化シンプレックス勾配 ∇ˢf(X) = (Sᵀ)†δˢ。"""
    check_table(xs, tab)
    value = apply_pinv_transpose(xs, delta_s(tab), rank_tol)
    return make_estimate(xs, value, "gsg", xs.m + 1, rank_tol)


def gcsg(xs: SampleSet, tab: EvaluationTable, rank_tol: float = 0.0) -> GradientEstimate:
    """一般化中心シンプレックス勾配 ∇ᶜf(X) = (Sᵀ)†δᶜ。f(x⁰) は使わない。"""
    check_table(xs, tab)
    value = apply_pinv_transpose(xs, delta_c(tab), rank_tol)
    return make_estimate(xs, value, "gcsg", 2 * xs.m, rank_tol)


def gcsg_via_average(xs: SampleSet, tab: EvaluationTable, rank_tol: float = 0.0) -> GradientEstimate:
    """∇ᶜf(X) = ½(∇ˢf(X) + ∇ˢf(X⁻))。こちらは f(x⁰) も消費する。"""
    check_table(xs, tab)
    if tab.f_minus is None:
        raise MissingEvaluationError("平均形の GCSG には反転点での値（f_minus）が必要です")
    forward = gsg(xs, tab, rank_tol).value
    backward = gsg(reflect(xs), reflected_table(tab), rank_tol).value
    return make_estimate(xs, 0.5 * (forward + backward), "gcsg-average", 2 * xs.m + 1, rank_tol)


def centred_jacobian(
    xs: SampleSet, tabs: Sequence[EvaluationTable], rank_tol: float = 0.0
) -> CentredJacobian:
    """J^c_g(X)：i 行目が成分 g_i の GCSG。"""
    if not tabs:
        raise DimensionMismatchError("ヤコビアンには少なくとも 1 成分のテーブルが必要です")
    rows = []
    for i, tab in enumerate(tabs, 1):
        if tab.m != xs.m:
            raise DimensionMismatchError(
                f"成分 {i} のテーブル長 {tab.m} が方向数 {xs.m} と一致しません"
            )
        rows.append(apply_pinv_transpose(xs, delta_c(tab), rank_tol))
    return CentredJacobian(matrix=as_matrix(np.vstack(rows), "jacobian"))


# --------------------------------------------------------
# 部分空間への射影（underdetermined 用）
# --------------------------------------------------------
def projector_onto_span(s: Matrix, rank_tol: float = 0.0) -> Projector:
    """
    U = span S への直交射影。
    S が列フルランクなら S(SᵀS)⁻¹Sᵀ、そうでなければ (Sᵀ)†Sᵀ。
    """
    s = as_matrix(s, "S")
    rank = numerical_rank(s, rank_tol)
    if rank == s.shape[1]:
        gram = s.T @ s
        matrix = s @ np.linalg.solve(gram, s.T)
    else:
        matrix = pseudoinverse(s.T, rank_tol) @ s.T
    # 丸め誤差で崩れた対称性をそろえる
    matrix = 0.5 * (matrix + matrix.T)
    return Projector(matrix=as_matrix(matrix, "projector"), rank=rank)


def u_gradient(p: Projector, grad: Vector) -> Vector:
    """∇f_U = Proj_U ∇f"""
    grad = as_vector(grad, "grad")
    if grad.size != p.n:
        raise DimensionMismatchError(f"勾配の次元 {grad.size} が射影の次元 {p.n} と一致しません")
    return as_vector(p.matrix @ grad, "u_gradient")


def augmented_set(xs: SampleSet) -> SampleSet:
    """Y = ⟨x⁰, x⁰+d¹, …, x⁰+dᵐ, x⁰−d¹, …, x⁰−dᵐ⟩"""
    try:
        return SampleSet(x0=xs.x0, directions=np.vstack([xs.directions, -xs.directions]))
    except SampleSetError as e:
        raise SampleSetError(f"反転点が元の点と衝突しています: {e}") from e


def augmented_table(tab: EvaluationTable) -> EvaluationTable:
    """augmented_set 上の一方向テーブル（δˢ 用）。"""
    if tab.f_minus is None:
        raise MissingEvaluationError("拡大集合のテーブルには f_minus が必要です")
    return EvaluationTable(f_x0=tab.f_x0, f_plus=tab.f_plus + tab.f_minus)
