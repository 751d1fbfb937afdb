from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Any, Optional, Sequence, Tuple

import numpy as np

from .errors import InvalidMatrixError, SampleSetError
from .matrix import Matrix, Vector, as_matrix, as_vector


class Classification(str, Enum):
    """m と rank S による 4 分類（どれか 1 つだけが成り立つ）。"""

    OVERDETERMINED = "overdetermined"
    DETERMINED = "determined"
    UNDERDETERMINED = "underdetermined"
    UNDETERMINED = "undetermined"


# ----------------------
# SampleSet 本体
# ----------------------
@dataclass(frozen=True)
class SampleSet:
    """
    順序付きサンプル集合 X = ⟨x⁰, x⁰+d¹, …, x⁰+dᵐ⟩。

    x0:
      - 基準点（次元 n）
    directions:
      - m×n 配列。i 行目が方向ベクトル dⁱ（順序を保持する）

    不変条件:
      - m ≥ 1、全ベクトルの次元が一致
      - どの dⁱ も零でなく、m+1 個の点はビット単位で互いに異なる
    """

    x0: Vector
    directions: Matrix

    def __post_init__(self) -> None:
        try:
            x0 = as_vector(self.x0, "x0")
            raw = np.array(self.directions, dtype=np.float64)
            if raw.ndim == 1:
                # 1 次元の場合: x0 がスカラーなら各要素を 1 本の方向とみなす
                raw = raw.reshape(-1, 1) if x0.size == 1 else raw.reshape(1, -1)
            directions = as_matrix(raw, "directions")
        except InvalidMatrixError as e:
            raise SampleSetError(str(e)) from e

        if directions.shape[1] != x0.size:
            raise SampleSetError(
                f"方向ベクトルの次元 {directions.shape[1]} が x0 の次元 {x0.size} と一致しません"
            )

        zero_rows = [i + 1 for i, d in enumerate(directions) if not np.any(d)]
        if zero_rows:
            raise SampleSetError(f"方向ベクトル d{zero_rows} が零です（点は互いに異なる必要があります）")

        points = np.vstack([x0, x0 + directions])
        if np.unique(points, axis=0).shape[0] != points.shape[0]:
            raise SampleSetError("サンプル点が重複しています（点は互いに異なる必要があります）")

        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "directions", directions)

    @property
    def n(self) -> int:
        """空間の次元。"""
        return int(self.x0.size)

    @property
    def m(self) -> int:
        """方向（点ペア）の数。"""
        return int(self.directions.shape[0])

    def points(self) -> Matrix:
        """x⁰, x⁰+d¹, …, x⁰+dᵐ を行に並べた (m+1)×n 配列。"""
        return np.vstack([self.x0, self.x0 + self.directions])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SampleSet):
            return NotImplemented
        return bool(
            np.array_equal(self.x0, other.x0) and np.array_equal(self.directions, other.directions)
        )

    def __hash__(self) -> int:
        return hash((self.x0.tobytes(), self.directions.tobytes(), self.directions.shape))


# ----------------------
# EvaluationTable
# ----------------------
@dataclass(frozen=True)
class EvaluationTable:
    """
    サンプル集合上の関数値。関数評価そのものとは切り離してあるので、
    キャッシュ済み・リモート評価の値をそのまま注入できる。

    f_x0:
      - f(x⁰)。δᶜ だけを使う場合は None でよい
    f_plus:
      - f(x⁰+dⁱ), i = 1..m
    f_minus:
      - f(x⁰−dⁱ), i = 1..m（中心差分を使わない場合は None）
    """

    f_x0: Optional[float]
    f_plus: Tuple[float, ...]
    f_minus: Optional[Tuple[float, ...]] = None

    def __post_init__(self) -> None:
        plus = _finite_tuple(self.f_plus, "f_plus")
        if not plus:
            raise SampleSetError("f_plus が空です")
        minus = None if self.f_minus is None else _finite_tuple(self.f_minus, "f_minus")
        if minus is not None and len(minus) != len(plus):
            raise SampleSetError(
                f"f_minus の長さ {len(minus)} が f_plus の長さ {len(plus)} と一致しません"
            )
        f_x0 = None
        if self.f_x0 is not None:
            f_x0 = float(self.f_x0)
            if not np.isfinite(f_x0):
                raise SampleSetError("f_x0 が有限ではありません")
        object.__setattr__(self, "f_x0", f_x0)
        object.__setattr__(self, "f_plus", plus)
        object.__setattr__(self, "f_minus", minus)

    @property
    def m(self) -> int:
        return len(self.f_plus)

    @property
    def value_count(self) -> int:
        """テーブルが保持する関数値の個数（= 消費した評価回数）。"""
        count = len(self.f_plus)
        if self.f_minus is not None:
            count += len(self.f_minus)
        if self.f_x0 is not None:
            count += 1
        return count


def _finite_tuple(values: Sequence[Any], name: str) -> Tuple[float, ...]:
    out = tuple(float(v) for v in values)
    if not all(np.isfinite(v) for v in out):
        raise SampleSetError(f"{name} に有限でない値が含まれています")
    return out
