from __future__ import annotations


class CsgradError(ValueError):
    """ライブラリ全体の基底例外。メッセージは破られた不変条件を平易に述べる。"""


class InvalidMatrixError(CsgradError):
    """空・非有限値を含む行列／ベクトル。"""


class DimensionMismatchError(CsgradError):
    """演算対象の形状が合わない。"""


class SampleSetError(CsgradError):
    """サンプル集合の不変条件違反（零方向・重複点・次元不一致・不正ファイル）。"""


class MissingEvaluationError(CsgradError):
    """評価テーブルに必要な値（反転点の値、f(x⁰) など）が無い。"""


class PreconditionError(CsgradError):
    """規則ごとの前提条件（零除算、a ≤ 0 など）違反。"""


class DegenerateImageError(CsgradError):
    """連鎖律の像集合 g(X) が退化している。"""


class RankDeficiencyError(CsgradError):
    """フルランクを要求する演算にランク落ちの行列が渡された。"""


class InsufficientDataError(CsgradError):
    """傾きフィットに使える点が足りない。"""


class ConfigError(CsgradError):
    """実行設定の誤り（未知の関数名、空の Δ リストなど）。"""
