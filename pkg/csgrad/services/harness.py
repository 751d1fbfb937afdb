from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..domain.bounds import BoundReport, ComparisonSpace
from ..domain.errors import ConfigError, DegenerateImageError, InsufficientDataError, PreconditionError, RankDeficiencyError
from ..domain.estimate import GradientEstimate, Rule
from ..domain.functions import TestFunction, VectorTestFunction
from ..domain.matrix import Vector
from ..domain.record import ConvergenceRecord, SweepPoint
from ..domain.sample_set import Classification, EvaluationTable, SampleSet
from .bounds import gcscg_chain_bound, gcscg_rule_bound, gcsg_bound
from .calculus import (
    gcscg_chain,
    gcscg_exp,
    gcscg_log,
    gcscg_power,
    gcscg_product,
    gcscg_product_k,
    gcscg_quotient,
    make_chain_context,
    tables_for,
)
from .evaluation import evaluate
from .oracle import lipschitz_for, vector_lipschitz_for
from .sampleset import classify, direction_matrix, radius, scale
from .simplexgrad import gcsg, gcsg_via_average, gsg, projector_onto_span, u_gradient

logger = logging.getLogger(__name__)

DEFAULT_ERROR_FLOOR = 1e-14
DEFAULT_MIN_POINTS = 4
POWER_SWEEP_EXPONENT = 2.0


@dataclass(frozen=True)
class MethodOptions:
    """
    合成関数を作る手法への追加入力。

    partners:
      - gcscg:product / gcscg:quotient は partners[0] を g として f·g, f/g
      - gcscg:product_k は f·partners[0]·partners[1]⋯
    inner:
      - gcscg:chain の内側写像 g。サンプル集合は g の定義域に置き、f∘g を推定する
    k:
      - gcscg:power の指数（実数）
    """

    partners: Tuple[TestFunction, ...] = ()
    inner: Optional[VectorTestFunction] = None
    k: float = POWER_SWEEP_EXPONENT


_DEFAULT_OPTIONS = MethodOptions()

_Estimator = Callable[[TestFunction, SampleSet, MethodOptions, float], GradientEstimate]
_Truth = Callable[[TestFunction, Vector, MethodOptions], Vector]


@dataclass(frozen=True)
class _Method:
    estimate: _Estimator
    truth: _Truth
    rule: Optional[Rule] = None
    partners: int = 0  # 必要な partners の最小個数


# --------------------------------------------------------
# 推定
# --------------------------------------------------------
def _table(fn: TestFunction, xs: SampleSet) -> EvaluationTable:
    (tab,) = tables_for([fn], xs)
    return tab


def _est_product(fn: TestFunction, xs: SampleSet, opts: MethodOptions, tol: float) -> GradientEstimate:
    tf, tg = tables_for([fn, opts.partners[0]], xs)
    return gcscg_product(xs, tf, tg, tol)


def _est_product_k(fn: TestFunction, xs: SampleSet, opts: MethodOptions, tol: float) -> GradientEstimate:
    return gcscg_product_k(xs, tables_for([fn, *opts.partners], xs), tol)


def _est_quotient(fn: TestFunction, xs: SampleSet, opts: MethodOptions, tol: float) -> GradientEstimate:
    tf, tg = tables_for([fn, opts.partners[0]], xs)
    return gcscg_quotient(xs, tf, tg, tol)


def _est_chain(fn: TestFunction, xs: SampleSet, opts: MethodOptions, tol: float) -> GradientEstimate:
    return gcscg_chain(make_chain_context(xs, fn, opts.inner), tol)


# --------------------------------------------------------
# 真の勾配（合成関数の解析的な勾配）
# --------------------------------------------------------
def _plain_truth(fn: TestFunction, x0: Vector, opts: MethodOptions) -> Vector:
    return fn.grad(x0)


def _exp_truth(fn: TestFunction, x0: Vector, opts: MethodOptions) -> Vector:
    return math.exp(fn(x0)) * fn.grad(x0)


def _log_truth(fn: TestFunction, x0: Vector, opts: MethodOptions) -> Vector:
    return fn.grad(x0) / fn(x0)


def _power_truth(fn: TestFunction, x0: Vector, opts: MethodOptions) -> Vector:
    k = float(opts.k)
    return k * fn(x0) ** (k - 1) * fn.grad(x0)


def _product_truth(fn: TestFunction, x0: Vector, opts: MethodOptions) -> Vector:
    g = opts.partners[0]
    return fn(x0) * g.grad(x0) + g(x0) * fn.grad(x0)


def _product_k_truth(fn: TestFunction, x0: Vector, opts: MethodOptions) -> Vector:
    factors = [fn, *opts.partners]
    values = np.array([f(x0) for f in factors])
    return sum(float(np.prod(np.delete(values, i))) * f.grad(x0) for i, f in enumerate(factors))


def _quotient_truth(fn: TestFunction, x0: Vector, opts: MethodOptions) -> Vector:
    g = opts.partners[0]
    g0 = g(x0)
    return (g0 * fn.grad(x0) - fn(x0) * g.grad(x0)) / g0**2


def _chain_truth(fn: TestFunction, x0: Vector, opts: MethodOptions) -> Vector:
    return opts.inner.jacobian(x0).T @ fn.grad(opts.inner(x0))


_METHODS: Dict[str, _Method] = {
    "gsg": _Method(lambda fn, xs, opts, tol: gsg(xs, evaluate(fn, xs, centred=False), tol), _plain_truth),
    "gcsg": _Method(lambda fn, xs, opts, tol: gcsg(xs, evaluate(fn, xs, include_x0=False), tol), _plain_truth),
    "gcsg-average": _Method(lambda fn, xs, opts, tol: gcsg_via_average(xs, evaluate(fn, xs), tol), _plain_truth),
    Rule.EXP.method_tag: _Method(
        lambda fn, xs, opts, tol: gcscg_exp(xs, _table(fn, xs), math.e, tol), _exp_truth, Rule.EXP
    ),
    Rule.LOG.method_tag: _Method(
        lambda fn, xs, opts, tol: gcscg_log(xs, _table(fn, xs), math.e, tol), _log_truth, Rule.LOG
    ),
    Rule.POWER.method_tag: _Method(
        lambda fn, xs, opts, tol: gcscg_power(xs, _table(fn, xs), opts.k, tol), _power_truth, Rule.POWER
    ),
    Rule.PRODUCT.method_tag: _Method(_est_product, _product_truth, Rule.PRODUCT, partners=1),
    Rule.PRODUCT_K.method_tag: _Method(_est_product_k, _product_k_truth, Rule.PRODUCT_K, partners=1),
    Rule.QUOTIENT.method_tag: _Method(_est_quotient, _quotient_truth, Rule.QUOTIENT, partners=1),
    Rule.CHAIN.method_tag: _Method(_est_chain, _chain_truth, Rule.CHAIN),
}


def sweep_methods() -> List[str]:
    return list(_METHODS)


def _method(method: str) -> _Method:
    if method not in _METHODS:
        raise ConfigError(f"未対応の手法です: {method}（利用可能: {', '.join(_METHODS)}）")
    return _METHODS[method]


def _factors(spec: _Method, fn: TestFunction, opts: MethodOptions) -> List[TestFunction]:
    if spec.rule is Rule.PRODUCT_K:
        return [fn, *opts.partners]
    if spec.partners:
        return [fn, opts.partners[0]]
    return [fn]


def _resolve(method: str, fn: TestFunction, options: Optional[MethodOptions]) -> Tuple[_Method, MethodOptions]:
    """手法と追加入力の組み合わせを検査する。"""
    spec = _method(method)
    opts = options or _DEFAULT_OPTIONS
    if len(opts.partners) < spec.partners:
        raise ConfigError(f"{method} にはもう一方の関数（partners）が必要です")
    for g in _factors(spec, fn, opts)[1:]:
        if g.dim != fn.dim:
            raise ConfigError(f"{fn.name} と {g.name} の次元が一致しません（{fn.dim} と {g.dim}）")
    if spec.rule is Rule.CHAIN:
        if opts.inner is None:
            raise ConfigError(f"{method} には内側の写像（inner）が必要です")
        if opts.inner.dim_out != fn.dim:
            raise ConfigError(
                f"{opts.inner.name} の値域の次元 {opts.inner.dim_out} が {fn.name} の次元 {fn.dim} と一致しません"
            )
    return spec, opts


def input_dim(method: str, fn: TestFunction, options: Optional[MethodOptions] = None) -> int:
    """サンプル集合が置かれる空間の次元（chain は内側写像の定義域）。"""
    spec, opts = _resolve(method, fn, options)
    return opts.inner.dim_in if spec.rule is Rule.CHAIN else fn.dim


def reference_point(method: str, fn: TestFunction, options: Optional[MethodOptions] = None) -> Vector:
    """既定の基準点 x⁰（chain は内側写像の基準点）。"""
    spec, opts = _resolve(method, fn, options)
    if spec.rule is Rule.CHAIN:
        return opts.inner.x0()
    return fn.x0()


def estimate(
    method: str,
    fn: TestFunction,
    xs: SampleSet,
    rank_tol: float = 0.0,
    options: Optional[MethodOptions] = None,
) -> GradientEstimate:
    """fn を xs 上で評価し、method の推定値を返す（gcscg:* は合成関数の勾配の近似）。"""
    spec, opts = _resolve(method, fn, options)
    if xs.n != input_dim(method, fn, opts):
        raise ConfigError(f"サンプル集合の次元 {xs.n} が {method} の入力次元と一致しません")
    return spec.estimate(fn, xs, opts, rank_tol)


def true_gradient(
    method: str, fn: TestFunction, x0: Vector, options: Optional[MethodOptions] = None
) -> Vector:
    """method が近似する対象（合成関数の解析的な勾配）。"""
    spec, opts = _resolve(method, fn, options)
    return np.asarray(spec.truth(fn, np.asarray(x0, dtype=np.float64), opts), dtype=np.float64)


# --------------------------------------------------------
# 上界
# --------------------------------------------------------
def _chain_bound(
    fn: TestFunction, xs: SampleSet, ball: float, opts: MethodOptions, rank_tol: float
) -> Optional[BoundReport]:
    g = opts.inner
    if fn.hessian_lipschitz is None or g.component_lipschitz is None:
        return None
    if any(c.hessian_lipschitz is None for c in g.components):
        return None
    ctx = make_chain_context(xs, fn, g)
    if ctx.constant_inner:
        return None
    lip_f = lipschitz_for(fn, ctx.g_x0, ctx.delta_star)
    lip_g = vector_lipschitz_for(g, xs.x0, ball)
    grad_norm = float(np.linalg.norm(fn.grad(ctx.g_x0)))
    try:
        return gcscg_chain_bound(ctx, lip_f, lip_g, grad_norm, rank_tol)
    except DegenerateImageError:
        return None


def bound_for(
    method: str,
    fn: TestFunction,
    xs: SampleSet,
    ball_radius: Optional[float] = None,
    rank_tol: float = 0.0,
    options: Optional[MethodOptions] = None,
) -> Optional[BoundReport]:
    """
    解析的な L があれば上界を返す。GSG と L の無い関数は None。
    ランク落ちの集合では適用外の BoundReport を返す。
    """
    spec, opts = _resolve(method, fn, options)
    if method == "gsg":
        return None
    ball = ball_radius if ball_radius is not None else radius(xs)
    cls = classify(xs, rank_tol)
    if spec.rule is not None and cls is Classification.UNDETERMINED:
        return BoundReport.not_applicable(xs.m, radius(xs), cls)
    if spec.rule is Rule.CHAIN:
        return _chain_bound(fn, xs, ball, opts, rank_tol)

    factors = _factors(spec, fn, opts)
    lips = [lipschitz_for(f, xs.x0, ball) for f in factors]
    if any(lip is None for lip in lips):
        return None
    if spec.rule is None:
        return gcsg_bound(xs, lips[0], ball, rank_tol)
    values = [f(xs.x0) for f in factors]
    return gcscg_rule_bound(spec.rule, xs, lips, values, k=opts.k, rank_tol=rank_tol)


def _validate_deltas(deltas: Sequence[float]) -> List[float]:
    values = [float(d) for d in deltas]
    if not values:
        raise ConfigError("delta list empty: Δ のリストが空です")
    if any(not d > 0 for d in values):
        raise ConfigError(f"Δ はすべて正である必要があります（{values}）")
    if any(b >= a for a, b in zip(values, values[1:])):
        raise ConfigError(f"Δ は狭義単調減少で並べる必要があります（{values}）")
    return values


def _normalized(geometry: SampleSet) -> SampleSet:
    """半径 1 のテンプレートにそろえる。"""
    return scale(geometry, 1.0 / radius(geometry))


# --------------------------------------------------------
# Δ スイープ
# --------------------------------------------------------
def sweep(
    fn: TestFunction,
    geometry: SampleSet,
    deltas: Sequence[float],
    method: str = "gcsg",
    ball_radius: Optional[float] = None,
    rank_tol: float = 0.0,
    error_floor: float = DEFAULT_ERROR_FLOOR,
    min_points: int = DEFAULT_MIN_POINTS,
    options: Optional[MethodOptions] = None,
) -> ConvergenceRecord:
    """
    テンプレート geometry を各 Δ に拡大縮小して推定誤差を測る。

    ball_radius:
      - None なら各 Δ で B(x⁰, Δ) 上の L を使う
      - 指定すると全点で同じ L を使い、Δ > ball_radius はエラー
    options:
      - gcscg:product / quotient / product_k / chain / power の追加入力
    """
    _, opts = _resolve(method, fn, options)
    dim = input_dim(method, fn, opts)
    if geometry.n != dim:
        raise ConfigError(f"サンプル集合の次元 {geometry.n} が {method}/{fn.name} の入力次元 {dim} と一致しません")
    values = _validate_deltas(deltas)
    if ball_radius is not None and values[0] > ball_radius:
        raise PreconditionError(f"Δ={values[0]} が球の半径 {ball_radius} を超えています")

    template = _normalized(geometry)
    cls = classify(template, rank_tol)
    if cls is Classification.UNDETERMINED:
        raise RankDeficiencyError("ランク落ちのテンプレートではスイープできません（上界の対象外）")
    space = ComparisonSpace.FULL_SPACE
    target_proj = None
    if cls is Classification.UNDERDETERMINED:
        space = ComparisonSpace.SUBSPACE_U
        target_proj = projector_onto_span(direction_matrix(template), rank_tol)

    target = true_gradient(method, fn, template.x0, opts)
    if target_proj is not None:
        target = u_gradient(target_proj, target)

    points = []
    for delta in values:
        xs = scale(template, delta)
        est = estimate(method, fn, xs, rank_tol, opts)
        error = float(np.linalg.norm(est.value - target))
        report = bound_for(method, fn, xs, ball_radius, rank_tol, opts)
        bound = None if report is None else report.bound
        logger.debug(f"sweep {method}/{fn.name}: Δ={delta:.3e}, error={error:.3e}, bound={bound}")
        points.append(SweepPoint(delta=delta, error=error, bound=bound))

    record = ConvergenceRecord(
        method=method,
        function=fn.name,
        geometry=f"n={template.n},m={template.m},{cls.value}",
        points=tuple(points),
        comparison_space=space,
    )
    try:
        slope, ci = _fit(record, error_floor, min_points)
    except InsufficientDataError:
        logger.info(f"sweep {method}/{fn.name}: 誤差がフロア以下の点が多く、傾きは求めません")
        return record
    return replace(record, fitted_slope=slope, slope_ci=ci)


# --------------------------------------------------------
# 収束次数のフィット
# --------------------------------------------------------
def _fit(
    record: ConvergenceRecord, error_floor: float = DEFAULT_ERROR_FLOOR, min_points: int = DEFAULT_MIN_POINTS
) -> Tuple[float, float]:
    usable = [(p.delta, p.error) for p in record.points if p.error > error_floor]
    if len(usable) < min_points:
        raise InsufficientDataError(
            f"傾きのフィットには誤差 > {error_floor:g} の点が {min_points} 点以上必要です（{len(usable)} 点）"
        )
    log_d = np.log10([d for d, _ in usable])
    log_e = np.log10([e for _, e in usable])
    slope, intercept = np.polyfit(log_d, log_e, 1)
    residual = log_e - (slope * log_d + intercept)
    return float(slope), float(np.max(np.abs(residual)))


def fit_order(
    record: ConvergenceRecord, error_floor: float = DEFAULT_ERROR_FLOOR, min_points: int = DEFAULT_MIN_POINTS
) -> float:
    """log₁₀ 誤差 vs log₁₀ Δ の最小二乗傾き（誤差 ≤ error_floor の点は除く）。"""
    slope, _ = _fit(record, error_floor, min_points)
    return slope


def bound_dominated(record: ConvergenceRecord, atol: float = 1e-12) -> bool:
    """上界が付いている全ての点で誤差 ≤ 上界 + atol なら True。"""
    return all(p.bound is None or p.error <= p.bound + atol for p in record.points)
