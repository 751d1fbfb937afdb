from __future__ import annotations

import logging
import math
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from ..domain.errors import (
    DegenerateImageError,
    DimensionMismatchError,
    MissingEvaluationError,
    PreconditionError,
    SampleSetError,
)
from ..domain.estimate import CalculusDecomposition, ChainContext, GradientEstimate, Rule
from ..domain.matrix import Matrix, Vector, as_matrix, as_vector
from ..domain.sample_set import EvaluationTable, SampleSet
from .evaluation import ScalarFn, VectorFn, evaluate, evaluate_image, evaluate_vector
from .matcore import pseudoinverse
from .sampleset import check_table, delta_c, direction_matrix, radius, reflect, reflected_table
from .simplexgrad import apply_pinv_transpose, gcsg, make_estimate

logger = logging.getLogger(__name__)

# δ 空間での (公式部分, 誤差部分, 符号)
_RuleParts = Tuple[np.ndarray, np.ndarray, int]


# --------------------------------------------------------
# 内部ヘルパー
# --------------------------------------------------------
def _base_and_plus(tab: EvaluationTable, label: str) -> Tuple[float, np.ndarray]:
    if tab.f_x0 is None:
        raise MissingEvaluationError(f"{label} の f(x⁰) がありません（計算規則には基準点の値が必要です）")
    return tab.f_x0, np.asarray(tab.f_plus, dtype=np.float64)


def _base(tab: EvaluationTable, label: str) -> float:
    if tab.f_x0 is None:
        raise MissingEvaluationError(f"{label} の f(x⁰) がありません（計算規則には基準点の値が必要です）")
    return tab.f_x0


def _integer_exponent(k: object) -> int:
    if isinstance(k, (bool, np.bool_)):
        raise PreconditionError(f"指数は整数である必要があります（{k!r}）")
    if isinstance(k, (int, np.integer)):
        return int(k)
    if isinstance(k, (float, np.floating)) and float(k).is_integer():
        return int(k)
    raise PreconditionError(f"誤差項つきのべき乗則は整数の指数だけを扱います（k={k!r}）")


def _require_nonzero(values: np.ndarray, what: str) -> None:
    if np.any(values == 0.0):
        raise PreconditionError(f"{what} に 0 が含まれています（零除算になります）")


def _require_tables(xs: SampleSet, tabs: Sequence[EvaluationTable], count: Optional[int], rule: Rule) -> None:
    if count is not None and len(tabs) != count:
        raise DimensionMismatchError(f"{rule.value} 規則には {count} 個のテーブルが必要です（{len(tabs)} 個）")
    for tab in tabs:
        check_table(xs, tab)


# --------------------------------------------------------
# GSG の計算規則（δ 空間で組み立て、最後に (Sᵀ)† を掛ける）
# --------------------------------------------------------
def _product_parts(tabs: Sequence[EvaluationTable], k: Optional[int]) -> _RuleParts:
    f0, fp = _base_and_plus(tabs[0], "f")
    g0, gp = _base_and_plus(tabs[1], "g")
    df, dg = fp - f0, gp - g0
    return f0 * dg + g0 * df, df * dg, 1


def _product_k_parts(tabs: Sequence[EvaluationTable], k: Optional[int]) -> _RuleParts:
    bases = [_base_and_plus(t, f"f{i}") for i, t in enumerate(tabs, 1)]
    f0 = np.array([b for b, _ in bases])
    plus = np.vstack([p for _, p in bases])
    rule_rhs = np.zeros(plus.shape[1])
    for i in range(len(bases)):
        coeff = float(np.prod(np.delete(f0, i)))
        rule_rhs += coeff * (plus[i] - f0[i])
    total = np.prod(plus, axis=0) - np.prod(f0)
    return rule_rhs, total - rule_rhs, 1


def _power_parts(tabs: Sequence[EvaluationTable], k: Optional[int]) -> _RuleParts:
    k = _integer_exponent(k)
    if k < 1:
        raise PreconditionError(f"正のべき乗則は k ≥ 1 を要求します（k={k}）")
    f0, fp = _base_and_plus(tabs[0], "f")
    df = fp - f0
    err = np.zeros_like(df)
    for i in range(1, k):
        err += f0 ** (k - 1 - i) * df * (fp**i - f0**i)
    return k * f0 ** (k - 1) * df, err, 1


def _negative_power_parts(tabs: Sequence[EvaluationTable], k: Optional[int]) -> _RuleParts:
    k = _integer_exponent(k)
    if k > -1:
        raise PreconditionError(f"負のべき乗則は k ≤ −1 を要求します（k={k}）")
    q = -k
    f0, fp = _base_and_plus(tabs[0], "f")
    _require_nonzero(np.append(fp, f0), "f の値")
    df = fp - f0
    d_inv = 1.0 / fp - 1.0 / f0
    err = q * d_inv * df
    for i in range(1, q):
        err -= f0 ** (1 + i) * d_inv * (fp ** (-i) - f0 ** (-i))
    err *= f0 ** (-q)
    return -q * f0 ** (-q - 1) * df, err, -1


def _quotient_parts(tabs: Sequence[EvaluationTable], k: Optional[int]) -> _RuleParts:
    f0, fp = _base_and_plus(tabs[0], "f")
    g0, gp = _base_and_plus(tabs[1], "g")
    _require_nonzero(np.append(gp, g0), "g の値")
    df, dg = fp - f0, gp - g0
    rule_rhs = (g0 * df - f0 * dg) / g0**2
    err = (fp / gp - f0 / g0) * dg / g0
    return rule_rhs, err, -1


_GSG_RULES: dict = {
    Rule.PRODUCT: (_product_parts, 2),
    Rule.PRODUCT_K: (_product_k_parts, None),
    Rule.POWER: (_power_parts, 1),
    Rule.NEGATIVE_POWER: (_negative_power_parts, 1),
    Rule.QUOTIENT: (_quotient_parts, 2),
}


def gsg_rule(
    rule: Rule,
    xs: SampleSet,
    tabs: Sequence[EvaluationTable],
    k: Optional[int] = None,
    rank_tol: float = 0.0,
) -> CalculusDecomposition:
    """
    GSG の計算規則を公式部分と誤差項 E^s に分解する。

    total（= rule_value + sign·E^s）は合成関数の GSG に一致する。
    POWER / NEGATIVE_POWER の k は実際の指数（k ≥ 1 / k ≤ −1）。
    """
    rule = Rule(rule)
    if rule is Rule.CHAIN:
        raise PreconditionError("連鎖律の誤差項は GSG 版がありません。gcsg_chain を使ってください")
    if rule not in _GSG_RULES:
        raise PreconditionError(f"{rule.value} 規則には誤差項の公式がありません（GCSCG 版のみ）")
    parts, count = _GSG_RULES[rule]
    _require_tables(xs, tabs, count, rule)
    if rule is Rule.PRODUCT_K and len(tabs) < 2:
        raise PreconditionError(f"k 個の積の規則には 2 個以上の関数が必要です（{len(tabs)} 個）")
    rule_rhs, err_rhs, sign = parts(tabs, k)
    return CalculusDecomposition(
        rule=rule,
        rule_value=apply_pinv_transpose(xs, rule_rhs, rank_tol),
        error_term=apply_pinv_transpose(xs, err_rhs, rank_tol),
        sign=sign,
    )


def gsg_error_term(
    rule: Rule,
    xs: SampleSet,
    tabs: Sequence[EvaluationTable],
    k: Optional[int] = None,
    rank_tol: float = 0.0,
) -> Vector:
    """E^s（例: 積なら (Sᵀ)†δˢ_{f|g}）。X⁻ と反転テーブルを渡せば X⁻ 上の値になる。"""
    return gsg_rule(rule, xs, tabs, k, rank_tol).error_term


# --------------------------------------------------------
# GCSG の計算規則（E^c = ½(E^s(X) + E^s(X⁻))）
# --------------------------------------------------------
def _centred_rule(
    rule: Rule,
    xs: SampleSet,
    tabs: Sequence[EvaluationTable],
    k: Optional[int] = None,
    rank_tol: float = 0.0,
) -> CalculusDecomposition:
    forward = gsg_rule(rule, xs, tabs, k, rank_tol)
    backward = gsg_rule(rule, reflect(xs), [reflected_table(t) for t in tabs], k, rank_tol)
    return CalculusDecomposition(
        rule=forward.rule,
        rule_value=as_vector(0.5 * (forward.rule_value + backward.rule_value), "rule_value"),
        error_term=as_vector(0.5 * (forward.error_term + backward.error_term), "error_term"),
        sign=forward.sign,
    )


def gcsg_product(
    xs: SampleSet, tab_f: EvaluationTable, tab_g: EvaluationTable, rank_tol: float = 0.0
) -> CalculusDecomposition:
    """∇ᶜ(fg)(X) = f(x⁰)∇ᶜg(X) + g(x⁰)∇ᶜf(X) + E^c_{fg}(X)"""
    return _centred_rule(Rule.PRODUCT, xs, [tab_f, tab_g], rank_tol=rank_tol)


def gcsg_product_k(
    xs: SampleSet, tabs: Sequence[EvaluationTable], rank_tol: float = 0.0
) -> CalculusDecomposition:
    """∇ᶜ(f₁⋯f_k)(X) = Σᵢ Πⱼ≠ᵢ f_j(x⁰)∇ᶜf_i(X) + E^c"""
    if len(tabs) < 2:
        raise PreconditionError(f"k 個の積の規則には 2 個以上の関数が必要です（{len(tabs)} 個）")
    return _centred_rule(Rule.PRODUCT_K, xs, list(tabs), rank_tol=rank_tol)


def gcsg_power(xs: SampleSet, tab_f: EvaluationTable, k: int, rank_tol: float = 0.0) -> CalculusDecomposition:
    """
    ∇ᶜ(f^k)(X) の分解。k ≥ 1 は正のべき乗則（+E^c）、
    k ≤ −1 は負のべき乗則（−E^c、f は x⁰ と x⁰±dⁱ で非零）。
    """
    k = _integer_exponent(k)
    if k == 0:
        raise PreconditionError("k = 0 のべき乗則は定義されていません（f⁰ は定数）")
    rule = Rule.POWER if k > 0 else Rule.NEGATIVE_POWER
    return _centred_rule(rule, xs, [tab_f], k=k, rank_tol=rank_tol)


def gcsg_quotient(
    xs: SampleSet, tab_f: EvaluationTable, tab_g: EvaluationTable, rank_tol: float = 0.0
) -> CalculusDecomposition:
    """∇ᶜ(f/g)(X) = [g(x⁰)∇ᶜf − f(x⁰)∇ᶜg]/g²(x⁰) − E^c_{f/g}。g は x⁰, x⁰±dⁱ で非零。"""
    return _centred_rule(Rule.QUOTIENT, xs, [tab_f, tab_g], rank_tol=rank_tol)


# --------------------------------------------------------
# 連鎖律
# --------------------------------------------------------
def _g_values(g_tabs: Sequence[EvaluationTable]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(g(x⁰), g(x⁰+dⁱ) の m×p 配列, g(x⁰−dⁱ) の m×p 配列)"""
    g0 = np.array([_base(t, f"g{j}") for j, t in enumerate(g_tabs, 1)])
    plus = np.column_stack([t.f_plus for t in g_tabs])
    if any(t.f_minus is None for t in g_tabs):
        raise MissingEvaluationError("連鎖律には g の反転点での値が必要です")
    minus = np.column_stack([t.f_minus for t in g_tabs])
    return g0, plus, minus


def image_directions(g_tabs: Sequence[EvaluationTable]) -> Tuple[Vector, Matrix]:
    """g(x⁰) と hⁱ = g(x⁰+dⁱ) − g(x⁰)（m×p）を返す。"""
    if not g_tabs:
        raise DimensionMismatchError("g の成分テーブルが空です")
    g0, plus, _ = _g_values(g_tabs)
    return as_vector(g0, "g_x0"), as_matrix(plus - g0, "h")


def build_chain_context(
    xs: SampleSet,
    g_tabs: Sequence[EvaluationTable],
    image_table: Optional[EvaluationTable],
) -> ChainContext:
    """
    X 上の g の成分テーブルと、f の g(x⁰)±hⁱ での値から ChainContext を作る。

    - hⁱ がすべて 0 かつ δᶜ_g = 0 なら g は X∪X⁻ 上で定数（image_set = None）
    - 一部の hⁱ だけが 0、または像の点が重なる場合は DegenerateImageError
    """
    if not g_tabs:
        raise DimensionMismatchError("g の成分テーブルが空です")
    for tab in g_tabs:
        check_table(xs, tab)
    g0, plus, minus = _g_values(g_tabs)
    h = plus - g0
    g_matrix_c = 0.5 * (plus - minus)
    delta = radius(xs)

    if not np.any(h):
        if np.any(g_matrix_c):
            raise DegenerateImageError("g(X) が 1 点に潰れていますが、反転点では g が変化しています")
        logger.debug("build_chain_context: g は X∪X⁻ 上で定数です")
        return ChainContext(
            inner_set=xs,
            image_set=None,
            image_table=None,
            g_matrix_c=as_matrix(g_matrix_c, "delta_c_g"),
            delta=delta,
            constant_inner=True,
            g_x0=as_vector(g0, "g_x0"),
        )

    try:
        image_set = SampleSet(x0=g0, directions=h)
    except SampleSetError as e:
        raise DegenerateImageError(f"像集合 g(X) が退化しています: {e}") from e

    if image_table is None:
        raise MissingEvaluationError("f の g(x⁰)±hⁱ での値（image_table）が必要です")
    if image_table.m != xs.m:
        raise DimensionMismatchError(
            f"像テーブルの長さ {image_table.m} が方向数 {xs.m} と一致しません"
        )
    if image_table.f_minus is None:
        raise MissingEvaluationError("像テーブルには g(x⁰)−hⁱ での値が必要です")

    delta_g = radius(image_set)
    logger.debug(f"build_chain_context: p={g0.size}, Δ={delta:.3e}, Δ_g={delta_g:.3e}")
    return ChainContext(
        inner_set=xs,
        image_set=image_set,
        image_table=image_table,
        g_matrix_c=as_matrix(g_matrix_c, "delta_c_g"),
        delta=delta,
        delta_g=delta_g,
        g_x0=as_vector(g0, "g_x0"),
    )


def make_chain_context(xs: SampleSet, f: ScalarFn, g: VectorFn) -> ChainContext:
    """呼び出し可能な f, g から ChainContext を作る（f は g(x⁰)±hⁱ で評価）。"""
    g_tabs = evaluate_vector(g, xs, centred=True)
    g0, h = image_directions(g_tabs)
    image_table = None if not np.any(h) else evaluate_image(f, g0, h)
    return build_chain_context(xs, g_tabs, image_table)


def _chain_jacobian_t(ctx: ChainContext, rank_tol: float) -> Matrix:
    """J^c_g(X)ᵀ = (Sᵀ)†δᶜ_g(X)（n×p）"""
    cols = [apply_pinv_transpose(ctx.inner_set, ctx.g_matrix_c[:, j], rank_tol) for j in range(ctx.p)]
    return as_matrix(np.column_stack(cols), "jacobian_t")


def gcsg_chain(ctx: ChainContext, tab_fg: EvaluationTable, rank_tol: float = 0.0) -> CalculusDecomposition:
    """
    ∇ᶜ(f∘g)(X) = J^c_g(X)ᵀ∇ᶜf(g(X)) − E。

    A = δᶜ_g(X)(S_gᵀ)†, b = δᶜ_f(g(X)), Ẽ = b − δᶜ_{f∘g}(X), Ê = A − I として
    E = (Sᵀ)†[AẼ + Êb − ÊẼ]。
    """
    if ctx.constant_inner or ctx.image_set is None or ctx.image_table is None:
        raise DegenerateImageError("g が定数のため像集合 g(X) が退化しています（gcscg_chain は 0 を返します）")
    xs = ctx.inner_set
    check_table(xs, tab_fg)
    s_g_t_pinv = pseudoinverse(direction_matrix(ctx.image_set).T, rank_tol)  # p×m
    a = ctx.g_matrix_c @ s_g_t_pinv
    b = delta_c(ctx.image_table)
    e_tilde = b - delta_c(tab_fg)
    e_hat = a - np.eye(xs.m)
    error_rhs = a @ e_tilde + e_hat @ b - e_hat @ e_tilde

    grad_f_image = apply_pinv_transpose(ctx.image_set, b, rank_tol)
    rule_value = _chain_jacobian_t(ctx, rank_tol) @ grad_f_image
    return CalculusDecomposition(
        rule=Rule.CHAIN,
        rule_value=as_vector(rule_value, "rule_value"),
        error_term=apply_pinv_transpose(xs, error_rhs, rank_tol),
        sign=-1,
    )


# --------------------------------------------------------
# GCSCG（誤差項を落とした計算規則による近似）
# --------------------------------------------------------
def _rule_estimate(
    xs: SampleSet, value: Vector, rule: Rule, eval_count: int, rank_tol: float
) -> GradientEstimate:
    return make_estimate(xs, value, rule.method_tag, eval_count, rank_tol)


def _count(tabs: Sequence[EvaluationTable]) -> int:
    return sum(t.value_count for t in tabs)


def gcscg_product(
    xs: SampleSet, tab_f: EvaluationTable, tab_g: EvaluationTable, rank_tol: float = 0.0
) -> GradientEstimate:
    """f(x⁰)∇ᶜg(X) + g(x⁰)∇ᶜf(X)"""
    f0, g0 = _base(tab_f, "f"), _base(tab_g, "g")
    value = f0 * gcsg(xs, tab_g, rank_tol).value + g0 * gcsg(xs, tab_f, rank_tol).value
    return _rule_estimate(xs, value, Rule.PRODUCT, _count([tab_f, tab_g]), rank_tol)


def gcscg_product_k(
    xs: SampleSet, tabs: Sequence[EvaluationTable], rank_tol: float = 0.0
) -> GradientEstimate:
    """Σᵢ Πⱼ≠ᵢ f_j(x⁰)·∇ᶜf_i(X)"""
    if len(tabs) < 2:
        raise PreconditionError(f"k 個の積の規則には 2 個以上の関数が必要です（{len(tabs)} 個）")
    f0 = np.array([_base(t, f"f{i}") for i, t in enumerate(tabs, 1)])
    value = np.zeros(xs.n)
    for i, tab in enumerate(tabs):
        value = value + float(np.prod(np.delete(f0, i))) * gcsg(xs, tab, rank_tol).value
    return _rule_estimate(xs, value, Rule.PRODUCT_K, _count(tabs), rank_tol)


def gcscg_power(xs: SampleSet, tab_f: EvaluationTable, k: float, rank_tol: float = 0.0) -> GradientEstimate:
    """k f(x⁰)^{k−1}∇ᶜf(X)（k は実数）"""
    k = float(k)
    f0 = _base(tab_f, "f")
    if f0 == 0.0 and k - 1 < 0:
        raise PreconditionError(f"k−1 < 0 のとき f(x⁰) は非零である必要があります（k={k}）")
    if f0 < 0 and not k.is_integer():
        raise PreconditionError(f"f(x⁰) < 0 に対して整数でない指数 k={k} は実数値になりません")
    coeff = k * f0 ** (k - 1) if k != 1.0 else 1.0
    value = coeff * gcsg(xs, tab_f, rank_tol).value
    return _rule_estimate(xs, value, Rule.POWER, tab_f.value_count, rank_tol)


def gcscg_quotient(
    xs: SampleSet, tab_f: EvaluationTable, tab_g: EvaluationTable, rank_tol: float = 0.0
) -> GradientEstimate:
    """[g(x⁰)∇ᶜf(X) − f(x⁰)∇ᶜg(X)]/g²(x⁰)。g(x⁰) ≠ 0 だけを要求する。"""
    f0, g0 = _base(tab_f, "f"), _base(tab_g, "g")
    if g0 == 0.0:
        raise PreconditionError("商の規則には g(x⁰) ≠ 0 が必要です")
    value = (g0 * gcsg(xs, tab_f, rank_tol).value - f0 * gcsg(xs, tab_g, rank_tol).value) / g0**2
    return _rule_estimate(xs, value, Rule.QUOTIENT, _count([tab_f, tab_g]), rank_tol)


def gcscg_exp(xs: SampleSet, tab_f: EvaluationTable, a: float = math.e, rank_tol: float = 0.0) -> GradientEstimate:
    """a^{f(x⁰)}·ln(a)·∇ᶜf(X)"""
    if not a > 0:
        raise PreconditionError(f"指数関数の底は正である必要があります（a={a}）")
    f0 = _base(tab_f, "f")
    value = a**f0 * math.log(a) * gcsg(xs, tab_f, rank_tol).value
    return _rule_estimate(xs, value, Rule.EXP, tab_f.value_count, rank_tol)


def gcscg_log(xs: SampleSet, tab_f: EvaluationTable, a: float = math.e, rank_tol: float = 0.0) -> GradientEstimate:
    """∇ᶜf(X)/(f(x⁰)·ln a)"""
    if not a > 0 or a == 1.0:
        raise PreconditionError(f"対数の底は正かつ 1 以外である必要があります（a={a}）")
    f0 = _base(tab_f, "f")
    if f0 == 0.0:
        raise PreconditionError("対数の規則には f(x⁰) ≠ 0 が必要です")
    value = gcsg(xs, tab_f, rank_tol).value / (f0 * math.log(a))
    return _rule_estimate(xs, value, Rule.LOG, tab_f.value_count, rank_tol)


def gcscg_chain(ctx: ChainContext, rank_tol: float = 0.0) -> GradientEstimate:
    """J^c_g(X)ᵀ∇ᶜf(g(X))。g が定数なら 0。"""
    xs = ctx.inner_set
    # g は各点で 1 回（2m+1）、f は像テーブルが持つ値の個数（g(x⁰) を含めて 2m+1）
    eval_count = 2 * xs.m + 1
    if ctx.constant_inner or ctx.image_set is None or ctx.image_table is None:
        return _rule_estimate(xs, np.zeros(xs.n), Rule.CHAIN, eval_count, rank_tol)
    grad_f_image = apply_pinv_transpose(ctx.image_set, delta_c(ctx.image_table), rank_tol)
    value = _chain_jacobian_t(ctx, rank_tol) @ grad_f_image
    return _rule_estimate(xs, value, Rule.CHAIN, eval_count + ctx.image_table.value_count, rank_tol)


# --------------------------------------------------------
# 呼び出し可能オブジェクト向けの薄いラッパー
# --------------------------------------------------------
def tables_for(fns: Sequence[Callable[[Vector], float]], xs: SampleSet) -> List[EvaluationTable]:
    """各関数を X∪X⁻ と x⁰ で評価したテーブルのリスト。"""
    return [evaluate(fn, xs, centred=True, include_x0=True) for fn in fns]
