from __future__ import annotations

from typing import Any

import numpy as np
from numpy.typing import NDArray

from .errors import InvalidMatrixError

# 行列・ベクトルは読み取り専用の float64 ndarray として扱う（値オブジェクト）
Matrix = NDArray[np.float64]
Vector = NDArray[np.float64]


def _freeze(arr: NDArray[np.float64]) -> NDArray[np.float64]:
    arr.flags.writeable = False
    return arr


def as_matrix(a: Any, name: str = "matrix") -> Matrix:
    """
    2 次元の有限な実行列に変換する。

    - 1 次元入力は行ベクトル（1×k）とみなす
    - 空行列・NaN/Inf を含む入力は InvalidMatrixError
    - 戻り値は入力と独立したコピーで、書き込み不可
    """
    arr = np.array(a, dtype=np.float64, copy=True)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise InvalidMatrixError(f"{name} は 2 次元である必要があります（ndim={arr.ndim}）")
    if arr.size == 0:
        raise InvalidMatrixError(f"{name} が空です（shape={arr.shape}）")
    if not np.all(np.isfinite(arr)):
        raise InvalidMatrixError(f"{name} に有限でない要素（NaN/Inf）が含まれています")
    return _freeze(arr)


def as_vector(v: Any, name: str = "vector") -> Vector:
    """1 次元の有限な実ベクトルに変換する（スカラーは長さ 1）。"""
    arr = np.array(v, dtype=np.float64, copy=True)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise InvalidMatrixError(f"{name} は 1 次元である必要があります（ndim={arr.ndim}）")
    if arr.size == 0:
        raise InvalidMatrixError(f"{name} が空です")
    if not np.all(np.isfinite(arr)):
        raise InvalidMatrixError(f"{name} に有限でない要素（NaN/Inf）が含まれています")
    return _freeze(arr)
