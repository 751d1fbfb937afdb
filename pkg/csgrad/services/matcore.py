from __future__ import annotations

import logging
from typing import Any, Tuple

import numpy as np

from ..domain.errors import DimensionMismatchError, InvalidMatrixError
from ..domain.matrix import Matrix, Vector, as_matrix, as_vector

logger = logging.getLogger(__name__)

_EPS = float(np.finfo(np.float64).eps)


def _svd(a: Matrix) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    return np.linalg.svd(a, full_matrices=False)


def _cutoff(a: Matrix, s: np.ndarray, rank_tol: float) -> float:
    """rank_tol·σ_max。rank_tol = 0 は max(rows, cols)·eps を使う。"""
    if rank_tol < 0:
        raise InvalidMatrixError(f"rank_tol は非負である必要があります（{rank_tol}）")
    tol = rank_tol if rank_tol > 0 else max(a.shape) * _EPS
    smax = float(s[0]) if s.size else 0.0
    return tol * smax


def pseudoinverse(a: Any, rank_tol: float = 0.0) -> Matrix:
    """
    Moore–Penrose 擬似逆行列 A† を SVD で計算する。

    σ_i ≤ rank_tol·σ_max の特異値は 0 とみなす（rank_tol = 0 で既定の相対許容値）。
    戻り値は cols×rows の読み取り専用配列。
    """
    a = as_matrix(a, "a")
    u, s, vt = _svd(a)
    cutoff = _cutoff(a, s, rank_tol)
    s_inv = np.zeros_like(s)
    keep = s > cutoff
    s_inv[keep] = 1.0 / s[keep]
    out = (vt.T * s_inv) @ u.T
    logger.debug(f"pseudoinverse: shape={a.shape}, rank={int(keep.sum())}")
    return as_matrix(out, "pseudoinverse")


def spectral_norm(a: Any) -> float:
    """最大特異値（誘導 2-ノルム）。"""
    a = as_matrix(a, "a")
    return float(np.linalg.norm(a, 2))


def numerical_rank(a: Any, rank_tol: float = 0.0) -> int:
    """rank_tol·σ_max より大きい特異値の個数。"""
    a = as_matrix(a, "a")
    s = np.linalg.svd(a, compute_uv=False)
    return int(np.count_nonzero(s > _cutoff(a, s, rank_tol)))


def solve_least_squares(a: Any, b: Any, rank_tol: float = 0.0) -> Vector:
    """
    最小ノルム最小二乗解 A†b を、擬似逆行列を作らずに計算する。
    pseudoinverse(a) @ b と同じ SVD・同じ打ち切りを使う。
    """
    a = as_matrix(a, "a")
    b = as_vector(b, "b")
    if a.shape[0] != b.size:
        raise DimensionMismatchError(
            f"行数 {a.shape[0]} と右辺の次元 {b.size} が一致しません"
        )
    u, s, vt = _svd(a)
    cutoff = _cutoff(a, s, rank_tol)
    keep = s > cutoff
    coeffs = np.zeros_like(s)
    coeffs[keep] = (u.T @ b)[keep] / s[keep]
    return as_vector(vt.T @ coeffs, "solution")
