from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .matrix import Matrix, Vector

Evaluator = Callable[[Vector], float]
GradientFn = Callable[[Vector], Vector]
HessianFn = Callable[[Vector], Matrix]
# (中心, 半径) → 閉球上で有効な上界
BallConstant = Callable[[Vector, float], float]


@dataclass(frozen=True)
class TestFunction:
    """
    解析的な勾配（と任意でヘッセ行列・Hessian-Lipschitz 定数）を持つ検証用関数。

    hessian_lipschitz(center, radius):
      - 閉球 B(center, radius) 上の ∇²f の Lipschitz 定数の上界
        粗い上界でもよい（大きめでも上界の正しさは保たれる）
    reference_point:
      - 実験で使う既定の基準点 x⁰
    """

    __test__ = False  # pytest に収集させない

    name: str
    dim: int
    evaluator: Evaluator
    gradient: GradientFn
    hessian: Optional[HessianFn] = None
    hessian_lipschitz: Optional[BallConstant] = None
    reference_point: Optional[Tuple[float, ...]] = None
    description: str = ""

    def __call__(self, y: Sequence[float]) -> float:
        return float(self.evaluator(np.asarray(y, dtype=np.float64)))

    def grad(self, y: Sequence[float]) -> Vector:
        return np.asarray(self.gradient(np.asarray(y, dtype=np.float64)), dtype=np.float64)

    def x0(self) -> Vector:
        if self.reference_point is None:
            return np.zeros(self.dim)
        return np.asarray(self.reference_point, dtype=np.float64)


@dataclass(frozen=True)
class VectorTestFunction:
    """
    ベクトル値写像 g: ℝⁿ → ℝᵖ。成分ごとの TestFunction と、
    成分の Lipschitz 定数 L_{g_i}（勾配ノルムの上界）を返す関数を持つ。
    成分の L_{∇²g_i} は各成分の hessian_lipschitz から取る。
    """

    __test__ = False

    name: str
    dim_in: int
    components: Tuple[TestFunction, ...]
    component_lipschitz: Optional[Callable[[Vector, float], Tuple[float, ...]]] = None
    description: str = ""

    @property
    def dim_out(self) -> int:
        return len(self.components)

    def __call__(self, y: Sequence[float]) -> Vector:
        return np.array([c(y) for c in self.components], dtype=np.float64)

    def jacobian(self, y: Sequence[float]) -> Matrix:
        return np.vstack([c.grad(y) for c in self.components])

    def x0(self) -> Vector:
        """基準点を持つ最初の成分の基準点（どの成分にも無ければ原点）。"""
        for c in self.components:
            if c.reference_point is not None:
                return c.x0()
        return np.zeros(self.dim_in)
