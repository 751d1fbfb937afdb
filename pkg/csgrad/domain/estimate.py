from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .matrix import Matrix, Vector
from .sample_set import Classification, EvaluationTable, SampleSet


class Rule(str, Enum):
    """計算規則のタグ。GCSCG のメソッド名は "gcscg:<rule>" になる。"""

    PRODUCT = "product"
    PRODUCT_K = "product_k"
    POWER = "power"
    NEGATIVE_POWER = "negative_power"
    QUOTIENT = "quotient"
    EXP = "exp"
    LOG = "log"
    CHAIN = "chain"

    @property
    def method_tag(self) -> str:
        return f"gcscg:{self.value}"


# ----------------------
# GradientEstimate
# ----------------------
@dataclass(frozen=True)
class GradientEstimate:
    """
    近似勾配とそのメタデータ。

    method:
      - "gsg" / "gcsg" / "gcsg-average" / "gcscg:<rule>"
    eval_count:
      - 推定に実際に使った関数値の個数
        GSG は m+1、δᶜ だけを使う GCSG は 2m
    """

    value: Vector
    method: str
    m: int
    delta: float
    eval_count: int
    classification: Optional[Classification] = None

    @property
    def n(self) -> int:
        return int(self.value.size)


@dataclass(frozen=True)
class CentredJacobian:
    """p×n 行列。i 行目が ∇ᶜg_i(X)ᵀ。"""

    matrix: Matrix

    @property
    def p(self) -> int:
        return int(self.matrix.shape[0])


@dataclass(frozen=True)
class Projector:
    """span S への直交射影（n×n、対称かつ冪等）。"""

    matrix: Matrix
    rank: int

    @property
    def n(self) -> int:
        return int(self.matrix.shape[0])


# ----------------------
# 計算規則の分解
# ----------------------
@dataclass(frozen=True)
class CalculusDecomposition:
    """
    rule_value（公式部分）と error_term（厳密な誤差項 E）の組。
    total = rule_value + sign · error_term で、合成関数の GCSG に一致する。
    sign は積・べき乗で +1、商・負べき・連鎖律で −1。
    """

    rule: Rule
    rule_value: Vector
    error_term: Vector
    sign: int = 1

    @property
    def total(self) -> Vector:
        return self.rule_value + self.sign * self.error_term


@dataclass(frozen=True)
class ChainContext:
    """
    連鎖律の幾何情報。

    inner_set:
      - ℝⁿ 上の X
    image_set:
      - g(X)（方向 hⁱ = g(x⁰+dⁱ) − g(x⁰)）。g が X∪X⁻ 上で定数のときは None
    image_table:
      - f の g(x⁰)±hⁱ での値
    g_matrix_c:
      - δᶜ_g(X)（m×p、(i, j) 成分は ½(g_j(x⁰+dⁱ) − g_j(x⁰−dⁱ))）
    """

    inner_set: SampleSet
    image_set: Optional[SampleSet]
    image_table: Optional[EvaluationTable]
    g_matrix_c: Matrix
    delta: float
    delta_g: float = 0.0
    constant_inner: bool = False
    g_x0: Vector = field(default_factory=lambda: np.zeros(0))

    @property
    def delta_star(self) -> float:
        return max(self.delta, self.delta_g)

    @property
    def p(self) -> int:
        return int(self.g_matrix_c.shape[1])

