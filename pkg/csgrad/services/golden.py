from __future__ import annotations

import logging
import math
from typing import Any, Callable, Dict, List, Tuple

import numpy as np

from ..config import get_verify_cases, get_verify_seed
from ..domain.errors import CsgradError, DegenerateImageError
from ..domain.record import CheckResult
from ..domain.sample_set import SampleSet
from .calculus import (
    gcscg_chain,
    gcscg_exp,
    gcscg_log,
    gcscg_product,
    gcsg_chain,
    gcsg_power,
    gcsg_product,
    gcsg_product_k,
    gcsg_quotient,
    make_chain_context,
    tables_for,
)
from .evaluation import evaluate
from .matcore import pseudoinverse, solve_least_squares
from .oracle import lookup, lookup_vector
from .sampleset import delta_c, direction_matrix, from_points, generate
from .simplexgrad import augmented_set, augmented_table, gcsg, gcsg_via_average, gsg, projector_onto_span

logger = logging.getLogger(__name__)

# ランク落ちの集合では打ち切りを明示する
DEGENERATE_RANK_TOL = 1e-10


class _CheckFailed(Exception):
    pass


def _expect_close(actual: Any, expected: Any, rtol: float = 1e-12, atol: float = 0.0, what: str = "") -> None:
    a = np.asarray(actual, dtype=np.float64)
    e = np.asarray(expected, dtype=np.float64)
    if a.shape != e.shape or not np.allclose(a, e, rtol=rtol, atol=atol):
        raise _CheckFailed(f"{what}: {a.tolist()} ≠ {e.tolist()}")


def _expect_small(diff: float, scale: float, rtol: float, what: str) -> None:
    if not diff <= rtol * max(1.0, scale):
        raise _CheckFailed(f"{what}: 差 {diff:.3e} が許容値 {rtol:g}·{max(1.0, scale):.3e} を超えています")


# --------------------------------------------------------
# ランダムな入力
# --------------------------------------------------------
def conditioned_matrix(rng: np.random.Generator, rows: int, cols: int, rank: int | None = None) -> np.ndarray:
    """U diag(s) Vᵀ（s ∈ [0.1, 10]）。rank を指定するとそれ以降の特異値を 0 にする。"""
    k = min(rows, cols)
    u, _ = np.linalg.qr(rng.standard_normal((rows, k)))
    v, _ = np.linalg.qr(rng.standard_normal((cols, k)))
    s = rng.uniform(0.1, 10.0, size=k)
    if rank is not None:
        s[rank:] = 0.0
    return (u * s) @ v.T


def random_smooth(rng: np.random.Generator, n: int) -> Callable[[np.ndarray], float]:
    a, b, c = rng.standard_normal(n), rng.standard_normal(n), rng.standard_normal(n)
    return lambda y: float(0.5 * math.sin(a @ y) + 0.3 * (b @ y) ** 2 + 0.2 * (c @ y) ** 3)


def random_positive(rng: np.random.Generator, n: int) -> Callable[[np.ndarray], float]:
    """値が [1.2, 2.8] に収まる滑らかな関数。"""
    a, b = rng.standard_normal(n), rng.standard_normal(n)
    return lambda y: float(2.0 + 0.5 * math.sin(a @ y) + 0.3 * math.cos(b @ y))


def random_quadratic(rng: np.random.Generator, n: int) -> Tuple[Callable[[np.ndarray], float], Callable]:
    a = rng.standard_normal((n, n))
    a = 0.5 * (a + a.T)
    b, c = rng.standard_normal(n), float(rng.standard_normal())
    return (lambda y: float(y @ a @ y + b @ y + c)), (lambda y: 2.0 * a @ y + b)


def random_set(rng: np.random.Generator, n: int, m: int, degenerate: bool = False) -> SampleSet:
    """x⁰ はランダム、半径 1。degenerate=True なら方向をランク 1 つ落ちの部分空間に閉じ込める。"""
    x0 = rng.standard_normal(n)
    if degenerate and min(n, m) >= 2:
        basis = conditioned_matrix(rng, n, min(n, m) - 1)
        coeffs = rng.standard_normal((m, basis.shape[1]))
        directions = coeffs @ basis.T
        directions /= np.max(np.linalg.norm(directions, axis=1))
        return SampleSet(x0=x0, directions=directions)
    return generate(n, m, seed=int(rng.integers(0, 2**31 - 1)), x0=x0)


# --------------------------------------------------------
# 検証スイート
# --------------------------------------------------------
class GoldenSuite:
    """
    手計算できる例（golden）とランダムな性質検査をまとめて実行する。

    - golden: y⁴ の GCSG、射影行列、連鎖律・指数・対数の例
    - property: Penrose 条件、平均形との一致、計算規則の恒等式、GCSCG の厳密性
    """

    def __init__(self, cfg: Dict[str, Any]) -> None:
        self.cfg = cfg
        self.cases: int = get_verify_cases(cfg)
        self.seed: int = get_verify_seed(cfg)

    def run(self) -> List[CheckResult]:
        results = self.golden_checks() + self.property_checks()
        failed = [r.name for r in results if not r.passed]
        if failed:
            logger.error(f"検証に失敗しました: {', '.join(failed)}")
        else:
            logger.info(f"検証 {len(results)} 項目がすべて成功しました")
        return results

    def _check(self, name: str, body: Callable[[], str]) -> CheckResult:
        try:
            detail = body()
        except (_CheckFailed, CsgradError) as e:
            return CheckResult(name=name, passed=False, detail=str(e))
        return CheckResult(name=name, passed=True, detail=detail)

    def _rng(self, salt: int) -> np.random.Generator:
        return np.random.default_rng([self.seed, salt])

    # ------------------------------------------------------
    # 手計算の例
    # ------------------------------------------------------
    def golden_checks(self) -> List[CheckResult]:
        return [
            self._check("golden.gcsg_quartic", self._golden_quartic),
            self._check("golden.projector", self._golden_projector),
            self._check("golden.chain_scalar", self._golden_chain_scalar),
            self._check("golden.chain_vector", self._golden_chain_vector),
            self._check("golden.exp", self._golden_exp),
            self._check("golden.log", self._golden_log),
        ]

    def _golden_quartic(self) -> str:
        f = lookup("quartic1d")
        xs = from_points([-1.0, 0.0, 1.0])
        tab = evaluate(f, xs)
        _expect_close(gcsg(xs, tab).value, [-17.6], what="GCSG ⟨−1,0,1⟩")
        _expect_close(gcsg_via_average(xs, tab).value, [-17.6], what="平均形 GCSG")
        _expect_close(gsg(xs, tab).value, [-0.2], what="GSG ⟨−1,0,1⟩")
        _expect_close(gsg(augmented_set(xs), augmented_table(tab)).value, [-17.6], what="拡大集合の GSG")
        xs_alt = from_points([0.0, 1.0, -1.0])
        _expect_close(gcsg(xs_alt, evaluate(f, xs_alt)).value, [0.0], atol=1e-15, what="GCSG ⟨0,1,−1⟩")
        return "−17.6 / 0 / −0.2"

    def _golden_projector(self) -> str:
        s = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
        expected = np.array([[2.0, -1.0, 1.0], [-1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 3.0
        _expect_close(projector_onto_span(s).matrix, expected, atol=1e-15, what="Proj_U")
        return "(1/3)[[2,−1,1],[−1,2,1],[1,1,2]]"

    def _golden_chain_scalar(self) -> str:
        f, g = lookup("square1d"), lookup_vector("square_plus_one")
        xs = from_points([2.0, 3.0])
        ctx = make_chain_context(xs, f, g)
        _expect_close(gcscg_chain(ctx).value, [40.0], what="GCSCG(f∘g)")
        direct = gcsg(xs, evaluate(lambda y: f(g(y)), xs)).value
        _expect_close(direct, [48.0], what="GCSG(f∘g)")
        dec = gcsg_chain(ctx, evaluate(lambda y: f(g(y)), xs))
        _expect_close(dec.error_term, [-8.0], what="E")
        _expect_close(dec.total, direct, what="40 − E")
        return "40 / 48 / E=−8"

    def _golden_chain_vector(self) -> str:
        f, g = lookup("scaled_sphere3"), lookup_vector("paperchain_g")
        xs = from_points([(1.0, 2.0), (2.0, 2.0), (1.0, 3.0)])
        ctx = make_chain_context(xs, f, g)
        b = delta_c(ctx.image_table)
        _expect_close(b, [22.0, 22.0], what="δᶜ_f(g(X))")
        grad_image = solve_least_squares(direction_matrix(ctx.image_set).T, b)
        _expect_close(grad_image, [0.0, 4.4, 8.8], atol=1e-14, what="∇ᶜf(g(X))")
        _expect_close(gcscg_chain(ctx).value, [22.0, 22.0], what="GCSCG(f∘g)")
        return "α(22, 22), α = 1"

    def _golden_exp(self) -> str:
        f = lookup("paperexp")
        e2 = 2.0 * math.e**2
        xs = from_points([(1.0, 1.0), (2.0, 1.0), (1.0, 2.0)])
        tab = evaluate(f, xs)
        _expect_close(gcscg_exp(xs, tab).value, [e2, e2], what="GCSCG(e^f)")
        direct = gcsg(xs, evaluate(lambda y: math.exp(f(y)), xs)).value
        _expect_close(direct, [72.85, 72.85], rtol=0.0, atol=1e-2, what="GCSG(e^f)")
        under = from_points([(1.0, 1.0), (2.0, 1.0)])
        _expect_close(gcscg_exp(under, evaluate(f, under)).value, [e2, 0.0], atol=1e-12, what="underdetermined")
        return "(2e², 2e²) / (2e², 0)"

    def _golden_log(self) -> str:
        f = lookup("paperlog")
        xs = from_points([(2.0, 2.0), (3.0, 2.0), (2.0, 3.0)])
        _expect_close(gcscg_log(xs, evaluate(f, xs)).value, [4.0 / 9.0, 8.0 / 9.0], what="GCSCG(ln f)")
        direct = gcsg(xs, evaluate(lambda y: math.log(f(y)), xs)).value
        _expect_close(direct, [0.4236, 0.9229], rtol=0.0, atol=1e-3, what="GCSG(ln f)")
        return "(4/9, 8/9)"

    # ------------------------------------------------------
    # ランダムな性質検査
    # ------------------------------------------------------
    def property_checks(self) -> List[CheckResult]:
        return [
            self._check("property.penrose", self._prop_penrose),
            self._check("property.negation_lemma", self._prop_negation),
            self._check("property.gcsg_average", self._prop_average),
            self._check("property.augmented_set", self._prop_augmented),
            self._check("property.calculus_identities", self._prop_calculus),
            self._check("property.chain_identity", self._prop_chain),
            self._check("property.gcscg_exactness", self._prop_exactness),
        ]

    def _prop_penrose(self) -> str:
        rng = self._rng(1)
        for _ in range(self.cases):
            rows, cols = (int(v) for v in rng.integers(1, 9, size=2))
            a = conditioned_matrix(rng, rows, cols, rank=int(rng.integers(1, min(rows, cols) + 1)))
            p = pseudoinverse(a, DEGENERATE_RANK_TOL)
            scale = 1.0 + np.linalg.norm(a, 2)
            for name, residual in (
                ("APA = A", a @ p @ a - a),
                ("PAP = P", p @ a @ p - p),
                ("(AP)ᵀ = AP", (a @ p).T - a @ p),
                ("(PA)ᵀ = PA", (p @ a).T - p @ a),
            ):
                _expect_small(float(np.linalg.norm(residual)), scale, 1e-10, name)
            pt = pseudoinverse(a.T, DEGENERATE_RANK_TOL)
            _expect_small(float(np.max(np.abs(pt - p.T))), 1.0 + np.linalg.norm(p, 2), 1e-12, "(Aᵀ)† = (A†)ᵀ")
            b = rng.standard_normal(rows)
            x = solve_least_squares(a, b, DEGENERATE_RANK_TOL)
            _expect_small(float(np.linalg.norm(x - p @ b)), float(np.linalg.norm(x)), 1e-12, "A†b")
        return f"{self.cases} 件"

    def _prop_negation(self) -> str:
        rng = self._rng(2)
        for _ in range(self.cases):
            rows = int(rng.integers(1, 6))
            cols = int(rng.integers(rows, 8))
            a = conditioned_matrix(rng, rows, cols)
            lhs = pseudoinverse(np.hstack([a, -a]))
            pa = pseudoinverse(a)
            rhs = 0.5 * np.vstack([pa, -pa])
            _expect_small(float(np.linalg.norm(lhs - rhs)), float(np.linalg.norm(rhs)), 1e-10, "[A −A]†")
        return f"{self.cases} 件"

    def _prop_average(self) -> str:
        rng = self._rng(3)
        for i in range(self.cases):
            n, m = (int(v) for v in rng.integers(1, 6, size=2))
            degenerate = i % 2 == 1
            xs = random_set(rng, n, m, degenerate=degenerate)
            tol = DEGENERATE_RANK_TOL if degenerate else 0.0
            tab = evaluate(random_smooth(rng, n), xs)
            direct = gcsg(xs, tab, tol).value
            avg = gcsg_via_average(xs, tab, tol).value
            _expect_small(float(np.linalg.norm(direct - avg)), float(np.linalg.norm(direct)), 1e-12, "平均形")
        return f"{self.cases} 件（半数はランク落ち）"

    def _prop_augmented(self) -> str:
        rng = self._rng(4)
        for _ in range(self.cases):
            n = int(rng.integers(1, 5))
            m = int(rng.integers(n, n + 4))
            xs = random_set(rng, n, m)
            tab = evaluate(random_smooth(rng, n), xs)
            direct = gcsg(xs, tab).value
            aug = gsg(augmented_set(xs), augmented_table(tab)).value
            _expect_small(float(np.linalg.norm(direct - aug)), float(np.linalg.norm(direct)), 1e-10, "拡大集合")
        return f"{self.cases} 件"

    def _prop_calculus(self) -> str:
        rng = self._rng(5)
        for i in range(self.cases):
            n, m = (int(v) for v in rng.integers(1, 5, size=2))
            degenerate = i % 4 == 3
            tol = DEGENERATE_RANK_TOL if degenerate else 0.0
            xs = random_set(rng, n, m, degenerate=degenerate)
            f, g, h = random_smooth(rng, n), random_positive(rng, n), random_smooth(rng, n)
            tf, tg, th = tables_for([f, g, h], xs)

            def agrees(dec, compound, what: str) -> None:
                direct = gcsg(xs, evaluate(compound, xs), tol).value
                scale = max(np.linalg.norm(direct), np.linalg.norm(dec.rule_value), np.linalg.norm(dec.error_term))
                _expect_small(float(np.linalg.norm(dec.total - direct)), float(scale), 1e-10, what)

            agrees(gcsg_product(xs, tf, tg, tol), lambda y: f(y) * g(y), "積")
            agrees(gcsg_product_k(xs, [tf, tg, th], tol), lambda y: f(y) * g(y) * h(y), "3 個の積")
            agrees(gcsg_power(xs, tf, 3, tol), lambda y: f(y) ** 3, "べき乗 k=3")
            agrees(gcsg_power(xs, tg, -2, tol), lambda y: g(y) ** -2, "負のべき乗 k=−2")
            agrees(gcsg_quotient(xs, tf, tg, tol), lambda y: f(y) / g(y), "商")
        return f"{self.cases} 件 × 5 規則"

    def _prop_chain(self) -> str:
        rng = self._rng(6)
        checked = 0
        for _ in range(self.cases):
            n, m, p = (int(v) for v in rng.integers(1, 4, size=3))
            xs = random_set(rng, n, m)
            a, b = rng.standard_normal((p, n)), rng.standard_normal((p, n))
            f = random_smooth(rng, p)

            def g(y: np.ndarray, a=a, b=b) -> np.ndarray:
                return np.sin(a @ y) + b @ y

            try:
                ctx = make_chain_context(xs, f, g)
            except DegenerateImageError:
                continue
            dec = gcsg_chain(ctx, evaluate(lambda y: f(g(y)), xs))
            direct = gcsg(xs, evaluate(lambda y: f(g(y)), xs)).value
            scale = max(np.linalg.norm(direct), np.linalg.norm(dec.rule_value), np.linalg.norm(dec.error_term))
            _expect_small(float(np.linalg.norm(dec.total - direct)), float(scale), 1e-9, "連鎖律")
            checked += 1
        return f"{checked} 件"

    def _prop_exactness(self) -> str:
        rng = self._rng(7)
        for _ in range(self.cases):
            n = int(rng.integers(1, 4))
            m = int(rng.integers(n, n + 3))
            xs = random_set(rng, n, m)
            (f, df), (g, dg) = random_quadratic(rng, n), random_quadratic(rng, n)
            x0 = xs.x0
            tf, tg = tables_for([f, g], xs)
            truth = f(x0) * dg(x0) + g(x0) * df(x0)
            value = gcscg_product(xs, tf, tg).value
            _expect_small(float(np.linalg.norm(value - truth)), float(np.linalg.norm(truth)), 1e-10, "積の厳密性")
            truth_exp = math.exp(f(x0)) * df(x0)
            value_exp = gcscg_exp(xs, tf).value
            _expect_small(
                float(np.linalg.norm(value_exp - truth_exp)), float(np.linalg.norm(truth_exp)), 1e-10, "指数則の厳密性"
            )
        return f"{self.cases} 件"
