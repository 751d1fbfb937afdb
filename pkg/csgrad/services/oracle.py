from __future__ import annotations

import logging
import math
from dataclasses import replace
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from ..domain.bounds import LipschitzData
from ..domain.errors import ConfigError, PreconditionError
from ..domain.functions import TestFunction, VectorTestFunction
from ..domain.matrix import Vector, as_vector

logger = logging.getLogger(__name__)


def _zero_lipschitz(center: Vector, radius: float) -> float:
    return 0.0


def _sup_abs(center: Vector, radius: float) -> np.ndarray:
    """閉球 B(center, radius) 上の |y_i| の上界"""
    return np.abs(np.asarray(center, dtype=np.float64)) + radius


# --------------------------------------------------------
# 関数ファミリー
# --------------------------------------------------------
def linear(c: Sequence[float], name: str = "linear") -> TestFunction:
    c_arr = np.asarray(c, dtype=np.float64)
    return TestFunction(
        name=name,
        dim=c_arr.size,
        evaluator=lambda y: float(c_arr @ y),
        gradient=lambda y: c_arr.copy(),
        hessian=lambda y: np.zeros((c_arr.size, c_arr.size)),
        hessian_lipschitz=_zero_lipschitz,
        reference_point=tuple(0.5 * np.sign(c_arr) + 0.25),
        description=f"cᵀy, c={c_arr.tolist()}",
    )


def quadratic(a: Sequence[Sequence[float]], b: Sequence[float], name: str = "quadratic") -> TestFunction:
    """yᵀAy + bᵀy（A は対称化して使う）。"""
    a_arr = np.asarray(a, dtype=np.float64)
    a_arr = 0.5 * (a_arr + a_arr.T)
    b_arr = np.asarray(b, dtype=np.float64)
    n = b_arr.size
    return TestFunction(
        name=name,
        dim=n,
        evaluator=lambda y: float(y @ a_arr @ y + b_arr @ y),
        gradient=lambda y: 2.0 * a_arr @ y + b_arr,
        hessian=lambda y: 2.0 * a_arr,
        hessian_lipschitz=_zero_lipschitz,
        reference_point=tuple(np.linspace(-0.5, 0.5, n)),
        description="yᵀAy + bᵀy",
    )


def scaled_sphere(alpha: float, dim: int, name: str) -> TestFunction:
    """α‖y‖²"""
    return TestFunction(
        name=name,
        dim=dim,
        evaluator=lambda y: float(alpha * (y @ y)),
        gradient=lambda y: 2.0 * alpha * y,
        hessian=lambda y: 2.0 * alpha * np.eye(dim),
        hessian_lipschitz=_zero_lipschitz,
        reference_point=tuple(np.ones(dim)),
        description=f"{alpha}·‖y‖²",
    )


def _quartic1d() -> TestFunction:
    return TestFunction(
        name="quartic1d",
        dim=1,
        evaluator=lambda y: float(y[0] ** 4),
        gradient=lambda y: np.array([4.0 * y[0] ** 3]),
        hessian=lambda y: np.array([[12.0 * y[0] ** 2]]),
        hessian_lipschitz=lambda c, r: 24.0 * float(_sup_abs(c, r)[0]),
        reference_point=(-1.0,),
        description="y⁴",
    )


def _quartic3() -> TestFunction:
    return TestFunction(
        name="quartic3",
        dim=3,
        evaluator=lambda y: float(np.sum(y**4) / 4.0),
        gradient=lambda y: y**3,
        hessian=lambda y: np.diag(3.0 * y**2),
        hessian_lipschitz=lambda c, r: 6.0 * float(np.max(_sup_abs(c, r))),
        reference_point=(0.5, -0.4, 0.8),
        description="Σ y_i⁴/4",
    )


def _expsin() -> TestFunction:
    # 3 階導関数は対角（e^{y₁}, −8cos(2y₂)）
    return TestFunction(
        name="expsin",
        dim=2,
        evaluator=lambda y: float(math.exp(y[0]) + math.sin(2.0 * y[1])),
        gradient=lambda y: np.array([math.exp(y[0]), 2.0 * math.cos(2.0 * y[1])]),
        hessian=lambda y: np.diag([math.exp(y[0]), -4.0 * math.sin(2.0 * y[1])]),
        hessian_lipschitz=lambda c, r: max(math.exp(float(c[0]) + r), 8.0),
        reference_point=(0.3, 0.2),
        description="e^{y₁} + sin(2y₂)",
    )


def _rosenbrock() -> TestFunction:
    def hess(y: Vector) -> np.ndarray:
        return np.array(
            [[1200.0 * y[0] ** 2 - 400.0 * y[1] + 2.0, -400.0 * y[0]], [-400.0 * y[0], 200.0]]
        )

    def lip(c: Vector, r: float) -> float:
        # 3 階テンソルのフロベニウスノルム
        m = float(_sup_abs(c, r)[0])
        return math.sqrt((2400.0 * m) ** 2 + 3.0 * 400.0**2)

    return TestFunction(
        name="rosenbrock",
        dim=2,
        evaluator=lambda y: float(100.0 * (y[1] - y[0] ** 2) ** 2 + (1.0 - y[0]) ** 2),
        gradient=lambda y: np.array(
            [-400.0 * y[0] * (y[1] - y[0] ** 2) - 2.0 * (1.0 - y[0]), 200.0 * (y[1] - y[0] ** 2)]
        ),
        hessian=hess,
        hessian_lipschitz=lip,
        reference_point=(0.5, 0.5),
        description="100(y₂−y₁²)² + (1−y₁)²",
    )


def _paperexp() -> TestFunction:
    return replace(
        scaled_sphere(1.0, 2, "paperexp"),
        reference_point=(1.0, 1.0),
        description="y₁² + y₂²（指数則の例）",
    )


def _paperlog() -> TestFunction:
    return TestFunction(
        name="paperlog",
        dim=2,
        evaluator=lambda y: float(y[0] ** 2 + 2.0 * y[1] ** 2 - 3.0),
        gradient=lambda y: np.array([2.0 * y[0], 4.0 * y[1]]),
        hessian=lambda y: np.diag([2.0, 4.0]),
        hessian_lipschitz=_zero_lipschitz,
        reference_point=(2.0, 2.0),
        description="y₁² + 2y₂² − 3（対数則の例）",
    )


def _square1d(shift: float, name: str) -> TestFunction:
    return TestFunction(
        name=name,
        dim=1,
        evaluator=lambda y: float(y[0] ** 2 + shift),
        gradient=lambda y: np.array([2.0 * y[0]]),
        hessian=lambda y: np.array([[2.0]]),
        hessian_lipschitz=_zero_lipschitz,
        reference_point=(2.0,),
        description=f"y² + {shift:g}" if shift else "y²",
    )


def _paperchain_g() -> VectorTestFunction:
    g3 = TestFunction(
        name="paperchain_g3",
        dim=2,
        evaluator=lambda y: float(y[0] * y[1] + y[1]),
        gradient=lambda y: np.array([y[1], y[0] + 1.0]),
        hessian=lambda y: np.array([[0.0, 1.0], [1.0, 0.0]]),
        hessian_lipschitz=_zero_lipschitz,
        reference_point=(1.0, 2.0),
    )

    def comp_lip(c: Vector, r: float) -> tuple:
        y = _sup_abs(c, r)
        return (math.sqrt(5.0), math.sqrt(2.0), math.hypot(y[1], y[0] + 1.0))

    return VectorTestFunction(
        name="paperchain_g",
        dim_in=2,
        components=(linear([-2.0, 1.0], "paperchain_g1"), linear([1.0, 1.0], "paperchain_g2"), g3),
        component_lipschitz=comp_lip,
        description="(y₂−2y₁, y₁+y₂, y₁y₂+y₂)",
    )


def _square_plus_one_g() -> VectorTestFunction:
    return VectorTestFunction(
        name="square_plus_one",
        dim_in=1,
        components=(_square1d(1.0, "square_plus_one"),),
        component_lipschitz=lambda c, r: (2.0 * float(_sup_abs(c, r)[0]),),
        description="y² + 1（ℝ → ℝ の内側関数）",
    )


# --------------------------------------------------------
# レジストリ
# --------------------------------------------------------
@lru_cache(maxsize=1)
def _scalar_table() -> Dict[str, TestFunction]:
    entries = [
        _quartic1d(),
        linear([1.0, -2.0, 3.0], "linear3"),
        quadratic([[2.0, 0.5, 0.0], [0.5, 1.0, 0.3], [0.0, 0.3, 3.0]], [1.0, -1.0, 0.5]),
        _paperexp(),
        _paperlog(),
        _expsin(),
        _quartic3(),
        _rosenbrock(),
        _square1d(0.0, "square1d"),
        _square1d(1.0, "square_plus_one"),
        scaled_sphere(1.0, 3, "scaled_sphere3"),
    ]
    return {f.name: f for f in entries}


@lru_cache(maxsize=1)
def _vector_table() -> Dict[str, VectorTestFunction]:
    entries = [_paperchain_g(), _square_plus_one_g()]
    return {g.name: g for g in entries}


def registry() -> List[TestFunction]:
    return list(_scalar_table().values())


def vector_registry() -> List[VectorTestFunction]:
    return list(_vector_table().values())


def lookup(name: str) -> TestFunction:
    table = _scalar_table()
    if name not in table:
        raise ConfigError(f"未知の関数名です: {name}（利用可能: {', '.join(sorted(table))}）")
    return table[name]


def lookup_vector(name: str) -> VectorTestFunction:
    table = _vector_table()
    if name not in table:
        raise ConfigError(f"未知のベクトル値関数名です: {name}（利用可能: {', '.join(sorted(table))}）")
    return table[name]


def lipschitz_for(fn: TestFunction, center: Sequence[float], ball_radius: float) -> Optional[LipschitzData]:
    """解析的な L を持つ関数なら LipschitzData を、持たなければ None を返す。"""
    if fn.hessian_lipschitz is None:
        return None
    c = as_vector(center, "center")
    return LipschitzData(hessian_lipschitz=fn.hessian_lipschitz(c, ball_radius), gradient_at_ref=fn.grad(c))


def vector_lipschitz_for(g: VectorTestFunction, center: Sequence[float], ball_radius: float) -> LipschitzData:
    c = as_vector(center, "center")
    if g.component_lipschitz is None or any(comp.hessian_lipschitz is None for comp in g.components):
        raise PreconditionError(f"{g.name} には成分ごとの Lipschitz 定数がありません")
    return LipschitzData(
        component_lipschitz=tuple(g.component_lipschitz(c, ball_radius)),
        component_hessian_lipschitz=tuple(comp.hessian_lipschitz(c, ball_radius) for comp in g.components),
    )


# --------------------------------------------------------
# 独立な検証用オラクル
# --------------------------------------------------------
def finite_difference_gradient(f: Callable[[Vector], float], x: Sequence[float], h: float = 1e-6) -> Vector:
    """座標ごとの中心差分 (f(x+h eᵢ) − f(x−h eᵢ))/2h"""
    if not h > 0:
        raise PreconditionError(f"差分幅 h は正である必要があります（h={h}）")
    x = np.array(x, dtype=np.float64).reshape(-1)
    out = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        out[i] = (f(x + e) - f(x - e)) / (2.0 * h)
    return out


def _fd_hessian(fn: TestFunction, y: Vector, h: float) -> np.ndarray:
    cols = [(fn.grad(y + h * e) - fn.grad(y - h * e)) / (2.0 * h) for e in np.eye(fn.dim)]
    hess = np.column_stack(cols)
    return 0.5 * (hess + hess.T)


def estimate_hessian_lipschitz(
    fn: TestFunction,
    center: Sequence[float],
    ball_radius: float,
    samples: int = 200,
    seed: int = 0,
    h: float = 1e-5,
) -> float:
    """
    球内のランダムな点の組で max ‖∇²f(x)−∇²f(y)‖/‖x−y‖ を測る。
    サンプルに基づく下からの見積もりであり、上界としての保証はない。
    """
    if not ball_radius > 0 or samples < 1:
        raise PreconditionError("ball_radius は正、samples は 1 以上である必要があります")
    c = as_vector(center, "center")
    rng = np.random.default_rng(seed)

    def point() -> Vector:
        v = rng.standard_normal(fn.dim)
        return c + v / np.linalg.norm(v) * ball_radius * rng.uniform() ** (1.0 / fn.dim)

    def hessian(y: Vector) -> np.ndarray:
        return fn.hessian(y) if fn.hessian is not None else _fd_hessian(fn, y, h)

    best = 0.0
    for _ in range(samples):
        x, y = point(), point()
        dist = float(np.linalg.norm(x - y))
        if dist == 0.0:
            continue
        best = max(best, float(np.linalg.norm(hessian(x) - hessian(y), 2)) / dist)
    logger.warning(f"{fn.name}: L の数値見積もり {best:.4g} は保証付きの上界ではありません")
    return best
