from __future__ import annotations

import logging
import math
from typing import Dict, Optional, Sequence

import numpy as np

from ..domain.bounds import BoundReport, ComparisonSpace, LipschitzData
from ..domain.errors import DegenerateImageError, DimensionMismatchError, PreconditionError, RankDeficiencyError
from ..domain.estimate import ChainContext, Rule
from ..domain.sample_set import Classification, SampleSet
from .matcore import pseudoinverse, spectral_norm
from .sampleset import classify, radius, scaled_matrix

logger = logging.getLogger(__name__)

# 拡大縮小による Δ の丸め誤差は許す
_RADIUS_SLACK = 1e-12


def conditioning(xs: SampleSet, rank_tol: float = 0.0) -> float:
    """‖(Ŝᵀ)†‖（方向の一様なスケーリングに対して不変）。"""
    return spectral_norm(pseudoinverse(scaled_matrix(xs).T, rank_tol))


def _space(cls: Classification) -> ComparisonSpace:
    if cls in (Classification.OVERDETERMINED, Classification.DETERMINED):
        return ComparisonSpace.FULL_SPACE
    return ComparisonSpace.SUBSPACE_U


def _report(
    xs: SampleSet,
    cls: Classification,
    coefficient: float,
    constants: Dict[str, float],
    rank_tol: float,
) -> BoundReport:
    """bound = coefficient · (√m/6) · ‖(Ŝᵀ)†‖ · Δ²"""
    cond = conditioning(xs, rank_tol)
    delta = radius(xs)
    bound = coefficient * math.sqrt(xs.m) / 6.0 * cond * delta**2
    return BoundReport(
        bound=float(bound),
        m=xs.m,
        delta=delta,
        conditioning=cond,
        classification=cls,
        comparison_space=_space(cls),
        constants=constants,
    )


# --------------------------------------------------------
# GCSG
# --------------------------------------------------------
def gcsg_bound(
    xs: SampleSet,
    lip: LipschitzData,
    ball_radius: Optional[float] = None,
    rank_tol: float = 0.0,
) -> BoundReport:
    """
    ‖∇ᶜf(X) − ∇f(x⁰)‖ ≤ (L√m/6)‖(Ŝᵀ)†‖Δ²

    S が行フルランクでない（underdetermined）ときは ∇f_U(x⁰) との比較になる。
    L は B(x⁰, ball_radius) 上の定数として扱うので、Δ は ball_radius を超えてはならない。
    """
    cls = classify(xs, rank_tol)
    delta = radius(xs)
    if cls is Classification.UNDETERMINED:
        logger.info("gcsg_bound: S がランク落ちのため上界は適用外です")
        return BoundReport.not_applicable(xs.m, delta, cls)
    if ball_radius is not None and delta > ball_radius * (1.0 + _RADIUS_SLACK):
        raise PreconditionError(f"Δ={delta:.3e} が Lipschitz 定数の球の半径 {ball_radius:.3e} を超えています")
    return _report(xs, cls, lip.hessian_lipschitz, {"L": lip.hessian_lipschitz}, rank_tol)


def taylor_centred_residual_bound(d_norm: float, L: float) -> float:
    """|f(x⁰+d) − f(x⁰−d) − 2∇f(x⁰)ᵀd| ≤ (L/3)‖d‖³"""
    if d_norm < 0 or L < 0:
        raise PreconditionError(f"‖d‖ と L は非負である必要があります（‖d‖={d_norm}, L={L}）")
    return L * d_norm**3 / 3.0


# --------------------------------------------------------
# GCSCG の各規則
# --------------------------------------------------------
def _rule_coefficient(
    rule: Rule,
    lips: Sequence[LipschitzData],
    values: Sequence[float],
    k: Optional[float],
    a: float,
) -> float:
    ls = [lip.hessian_lipschitz for lip in lips]

    def need(count: int) -> None:
        if len(lips) != count or len(values) != count:
            raise DimensionMismatchError(
                f"{rule.value} 規則には Lipschitz 定数と x⁰ での値がそれぞれ {count} 個必要です"
            )

    if rule is Rule.PRODUCT:
        need(2)
        f0, g0 = values
        return ls[1] * abs(f0) + ls[0] * abs(g0)

    if rule is Rule.PRODUCT_K:
        if len(lips) < 2 or len(lips) != len(values):
            raise DimensionMismatchError("k 個の積の上界には同数（2 個以上）の定数と値が必要です")
        f0 = np.abs(np.asarray(values, dtype=np.float64))
        return float(sum(np.prod(np.delete(f0, i)) * ls[i] for i in range(len(ls))))

    if rule in (Rule.POWER, Rule.NEGATIVE_POWER):
        need(1)
        if k is None:
            raise PreconditionError("べき乗則の上界には指数 k が必要です")
        f0 = abs(values[0])
        if f0 == 0.0 and k - 1 < 0:
            raise PreconditionError(f"k−1 < 0 のとき f(x⁰) は非零である必要があります（k={k}）")
        return abs(k) * f0 ** (k - 1) * ls[0]

    if rule is Rule.QUOTIENT:
        need(2)
        f0, g0 = values
        if g0 == 0.0:
            raise PreconditionError("商の上界には g(x⁰) ≠ 0 が必要です")
        return ls[0] / abs(g0) + ls[1] * abs(f0) / g0**2

    if rule is Rule.EXP:
        need(1)
        if not a > 0:
            raise PreconditionError(f"指数関数の底は正である必要があります（a={a}）")
        return abs(a ** values[0] * math.log(a)) * ls[0]

    if rule is Rule.LOG:
        need(1)
        if not a > 0 or a == 1.0:
            raise PreconditionError(f"対数の底は正かつ 1 以外である必要があります（a={a}）")
        if values[0] == 0.0:
            raise PreconditionError("対数の上界には f(x⁰) ≠ 0 が必要です")
        return ls[0] / abs(values[0] * math.log(a))

    raise PreconditionError("連鎖律の上界は gcscg_chain_bound を使ってください")


def gcscg_rule_bound(
    rule: Rule,
    xs: SampleSet,
    lips: Sequence[LipschitzData],
    values_at_ref: Sequence[float],
    k: Optional[float] = None,
    a: float = math.e,
    rank_tol: float = 0.0,
) -> BoundReport:
    """
    GCSCG の各規則の誤差上界。例えば積なら
    (√m/6)(L_g|f(x⁰)| + L_f|g(x⁰)|)‖(Ŝᵀ)†‖Δ²。
    """
    rule = Rule(rule)
    cls = classify(xs, rank_tol)
    if cls is Classification.UNDETERMINED:
        raise RankDeficiencyError(f"gcscg_rule_bound({rule.value}): S がランク落ちしているため上界はありません")
    coefficient = _rule_coefficient(rule, lips, values_at_ref, k, a)
    constants = {f"L{i}": lip.hessian_lipschitz for i, lip in enumerate(lips, 1)}
    constants["coefficient"] = float(coefficient)
    return _report(xs, cls, coefficient, constants, rank_tol)


def gcscg_chain_bound(
    ctx: ChainContext,
    lip_f: LipschitzData,
    lip_g: LipschitzData,
    grad_f_at_gx0_norm: float,
    rank_tol: float = 0.0,
) -> BoundReport:
    """
    (√m·p/6)(√m·L_{g*}·L_{∇²f}‖(Ŝ_gᵀ)†‖ + ‖∇f(g(x⁰))‖·L_{∇²g*})‖(Ŝᵀ)†‖Δ*²

    lip_f.hessian_lipschitz が L_{∇²f}、lip_g.component_* が L_{g_i} と L_{∇²g_i}。
    """
    if ctx.constant_inner or ctx.image_set is None:
        raise DegenerateImageError("g が定数のため像集合が退化しています（GCSCG は厳密に 0）")
    if grad_f_at_gx0_norm < 0:
        raise PreconditionError("‖∇f(g(x⁰))‖ は非負である必要があります")
    xs = ctx.inner_set
    cls = classify(xs, rank_tol)
    if cls is Classification.UNDETERMINED:
        raise RankDeficiencyError("gcscg_chain_bound: S がランク落ちしているため上界はありません")
    if classify(ctx.image_set, rank_tol) is Classification.UNDETERMINED:
        raise RankDeficiencyError("像集合の方向行列 S_g がランク落ちしています")

    cond = conditioning(xs, rank_tol)
    cond_g = conditioning(ctx.image_set, rank_tol)
    m, p = xs.m, ctx.p
    inner = math.sqrt(m) * lip_g.g_star * lip_f.hessian_lipschitz * cond_g + grad_f_at_gx0_norm * lip_g.hessian_g_star
    bound = math.sqrt(m) * p / 6.0 * inner * cond * ctx.delta_star**2
    return BoundReport(
        bound=float(bound),
        m=m,
        delta=ctx.delta_star,
        conditioning=cond,
        classification=cls,
        comparison_space=_space(cls),
        constants={
            "L_hessian_f": lip_f.hessian_lipschitz,
            "L_g_star": lip_g.g_star,
            "L_hessian_g_star": lip_g.hessian_g_star,
            "conditioning_g": cond_g,
            "grad_f_norm": float(grad_f_at_gx0_norm),
        },
    )
