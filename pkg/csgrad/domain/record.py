from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

from .bounds import ComparisonSpace


@dataclass(frozen=True)
class SweepPoint:
    delta: float
    error: float
    bound: Optional[float] = None


@dataclass(frozen=True)
class ConvergenceRecord:
    """
    1 回の Δ スイープの結果。

    points:
      - Δ の降順に並んだ (Δ, 絶対誤差, 上界) の組
    fitted_slope / slope_ci:
      - log₁₀ 誤差 vs log₁₀ Δ の最小二乗傾きと残差帯の半幅
        使える点（誤差 > フロア）が 4 点未満なら None
    """

    method: str
    function: str
    geometry: str
    points: Tuple[SweepPoint, ...]
    comparison_space: ComparisonSpace = ComparisonSpace.FULL_SPACE
    fitted_slope: Optional[float] = None
    slope_ci: Optional[float] = None

    @property
    def deltas(self) -> Tuple[float, ...]:
        return tuple(p.delta for p in self.points)

    @property
    def errors(self) -> Tuple[float, ...]:
        return tuple(p.error for p in self.points)

    @property
    def bounds(self) -> Tuple[Optional[float], ...]:
        return tuple(p.bound for p in self.points)


@dataclass(frozen=True)
class CheckResult:
    """検証スイートの 1 項目の結果。"""

    name: str
    passed: bool
    detail: str = ""
