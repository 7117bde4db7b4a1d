"""離散・連続混合変数に対する k 近傍相互情報量推定。

Chebyshev（最大値）距離での KSG 型推定に、距離ゼロの同点を近傍として数える
混合変数の規則を加えたもの。離散の整数 ID は one-hot に展開して同じ距離で扱う。
点 i ごとの推定値

    ψ(k_i) + ψ(M) − ψ(n_x,i + 1) − ψ(n_y,i + 1)

を平均する。ρ_i > 0 なら k_i = k で n_x, n_y は ρ_i 未満の点数、ρ_i = 0 なら
k_i, n_x, n_y はいずれも距離ゼロの点数（自身を除く）。
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import digamma

from src.config.constants import MI_NEIGHBORS
from src.config.errors import DegenerateSampleError
from src.tasks.batch import one_hot

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MiEstimate:
    """相互情報量の推定結果（単位: nats）。

    Attributes:
        value: 0 でクランプした報告値
        raw: クランプ前の推定値
        k: 近傍数
        samples: サンプル数
    """

    value: float
    raw: float
    k: int
    samples: int


def _embed(values: np.ndarray, name: str) -> np.ndarray:
    """整数 ID は one-hot に、実数は (M, d) の行列に揃える。"""
    values = np.asarray(values)
    if values.ndim == 1 and (
        np.issubdtype(values.dtype, np.integer) or values.dtype == bool
    ):
        ids = values.astype(np.int64)
        if ids.min() < 0:
            raise ValueError(f"{name} ids must be non-negative")
        return one_hot(ids, int(ids.max()) + 1)
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 1:
        values = values[:, None]
    if values.ndim != 2:
        raise ValueError(f"{name} must be 1-D or 2-D, got shape {values.shape}")
    if not np.all(np.isfinite(values)):
        raise DegenerateSampleError(f"{name} contains non-finite values")
    spread = values.std(axis=0)
    flat = np.flatnonzero(spread == 0)
    if flat.size:
        raise DegenerateSampleError(
            f"{name} column {flat[0]} has zero variance", column=int(flat[0])
        )
    return values


def _count_within(tree: cKDTree, points: np.ndarray, radius: np.ndarray) -> np.ndarray:
    """各点について半径 radius 以内（境界を含む）の点数から自身を除いた数。"""
    counts = tree.query_ball_point(points, r=radius, p=np.inf, return_length=True)
    return np.asarray(counts, dtype=np.int64) - 1


def mi_mixture(xs: np.ndarray, hs: np.ndarray, k: int = MI_NEIGHBORS) -> MiEstimate:
    """I(X; H) を推定する。

    Args:
        xs: (M,) の整数 ID、または (M,) / (M, d) の実数
        hs: (M,) / (M, d) の実数、または (M,) の整数 ID
        k: 近傍数

    Returns:
        推定結果

    Raises:
        ValueError: 長さが一致しない、または k < 1 の場合
        DegenerateSampleError: サンプル数が k 以下、または連続列の分散がゼロの場合
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    count = len(xs)
    if len(hs) != count:
        raise ValueError(f"xs and hs must have equal length, got {count} and {len(hs)}")
    if count <= k:
        raise DegenerateSampleError(f"need more than k={k} samples, got {count}")

    x = _embed(xs, "xs")
    h = _embed(hs, "hs")
    joint = np.hstack([x, h])
    tree_x, tree_h, tree_joint = cKDTree(x), cKDTree(h), cKDTree(joint)

    dist, _ = tree_joint.query(joint, k=k + 1, p=np.inf)
    rho = dist[:, -1]
    tied = rho == 0

    k_i = np.full(count, k, dtype=np.int64)
    n_x = np.empty(count, dtype=np.int64)
    n_h = np.empty(count, dtype=np.int64)
    open_ = ~tied
    if open_.any():
        # ρ 未満の厳密な内側
        inner = np.nextafter(rho[open_], 0.0)
        n_x[open_] = _count_within(tree_x, x[open_], inner)
        n_h[open_] = _count_within(tree_h, h[open_], inner)
    if tied.any():
        k_i[tied] = _count_within(tree_joint, joint[tied], np.zeros(tied.sum()))
        n_x[tied] = _count_within(tree_x, x[tied], np.zeros(tied.sum()))
        n_h[tied] = _count_within(tree_h, h[tied], np.zeros(tied.sum()))
        logger.debug("%d of %d samples have tied neighbours", int(tied.sum()), count)

    terms = digamma(k_i) + digamma(count) - digamma(n_x + 1) - digamma(n_h + 1)
    # 総和の順序に依存しないよう正確に丸める
    raw = math.fsum(terms.tolist()) / count
    return MiEstimate(value=max(raw, 0.0), raw=raw, k=k, samples=count)


def mi_window_pairs(
    values: np.ndarray,
    hidden: np.ndarray,
    times: np.ndarray,
    window: int = 1,
    discrete: bool = True,
    symbols: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """系列から (入力窓, 隠れ状態) の組を取り出す。

    Args:
        values: (M, T) の生の入力値
        hidden: (M, T+1, N) の隠れ状態（先頭は h_0）
        times: (M,) 各系列から取り出す時刻 t（window−1 ≤ t < T）
        window: 1 なら x_t、2 なら (x_{t−1}, x_t)
        discrete: 入力が離散 ID か
        symbols: 離散入力の記号数（window 2 で組を 1 つの ID に符号化する）

    Returns:
        (xs, hs) のタプル。hs は h_t（x_t を読んだ直後の状態）
    """
    if window not in (1, 2):
        raise ValueError(f"window must be 1 or 2, got {window}")
    times = np.asarray(times, dtype=np.int64)
    rows = np.arange(len(times))
    if np.any(times < window - 1) or np.any(times >= values.shape[1]):
        raise ValueError("times out of range for the requested window")
    current = values[rows, times]
    hs = hidden[rows, times + 1]
    if window == 1:
        return current, hs
    previous = values[rows, times - 1]
    if discrete:
        base = symbols if symbols is not None else int(values.max()) + 1
        return previous.astype(np.int64) * base + current.astype(np.int64), hs
    return np.stack([previous, current], axis=1), hs


def informative_columns(hs: np.ndarray) -> np.ndarray:
    """分散ゼロの列を除いた隠れ状態。"""
    hs = np.asarray(hs, dtype=np.float64)
    return hs[:, hs.std(axis=0) > 0]
