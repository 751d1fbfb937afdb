from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Optional, Tuple

from .errors import PreconditionError
from .matrix import Vector
from .sample_set import Classification


class ComparisonSpace(str, Enum):
    """誤差をどの目標と比べるか。FULL_SPACE は ∇f(x⁰)、SUBSPACE_U は Proj_U ∇f(x⁰)。"""

    FULL_SPACE = "full"
    SUBSPACE_U = "subspace_u"


@dataclass(frozen=True)
class LipschitzData:
    """
    誤差上界に使う Lipschitz 定数。

    hessian_lipschitz:
      - ∇²f の Lipschitz 定数 L（指定された球上）
    component_lipschitz / component_hessian_lipschitz:
      - ベクトル値写像 g の各成分の L_{g_i} と L_{∇²g_i}
    """

    hessian_lipschitz: float = 0.0
    gradient_at_ref: Optional[Vector] = None
    component_lipschitz: Tuple[float, ...] = ()
    component_hessian_lipschitz: Tuple[float, ...] = ()

    def __post_init__(self) -> None:
        constants = (self.hessian_lipschitz, *self.component_lipschitz, *self.component_hessian_lipschitz)
        if any(c < 0 for c in constants):
            raise PreconditionError("Lipschitz 定数は非負である必要があります")
        object.__setattr__(self, "hessian_lipschitz", float(self.hessian_lipschitz))
        object.__setattr__(self, "component_lipschitz", tuple(float(c) for c in self.component_lipschitz))
        object.__setattr__(
            self, "component_hessian_lipschitz", tuple(float(c) for c in self.component_hessian_lipschitz)
        )

    @property
    def g_star(self) -> float:
        """L_{g*} = max_i L_{g_i}"""
        return max(self.component_lipschitz, default=0.0)

    @property
    def hessian_g_star(self) -> float:
        """L_{∇²g*} = max_i L_{∇²g_i}"""
        return max(self.component_hessian_lipschitz, default=0.0)


@dataclass(frozen=True)
class BoundReport:
    """
    理論誤差上界とその材料。

    applicable が False（Undetermined な集合）のとき bound は None。
    """

    bound: Optional[float]
    m: int
    delta: float
    conditioning: Optional[float]
    classification: Classification
    comparison_space: ComparisonSpace
    applicable: bool = True
    constants: Dict[str, float] = field(default_factory=dict)

    @classmethod
    def not_applicable(cls, m: int, delta: float, classification: Classification) -> "BoundReport":
        return cls(
            bound=None,
            m=m,
            delta=delta,
            conditioning=None,
            classification=classification,
            comparison_space=ComparisonSpace.SUBSPACE_U,
            applicable=False,
        )
