"""線形代数モジュール。

行列積、対角非負の QR 分解、重み初期化、スペクトルノルム推定、
および格子セル単位で分岐できる乱数ストリームを提供する。
"""

from dataclasses import dataclass
try:
    from typing import Self
except ImportError:  # Python < 3.11
    from typing_extensions import Self

import numpy as np

from src.config.constants import QR_RANK_TOL, InitScheme, OrthogonalScheme
from src.config.errors import DimensionError, SingularMatrixError


@dataclass(frozen=True)
class RngStream:
    """再現可能な乱数ストリーム。

    (seed, key) が同じなら実行環境やスケジューリングに依らず同じ系列を返す。
    key は格子セル番号やシード番号で分岐するために使う。
    """

    seed: int
    key: tuple[int, ...] = ()
    algorithm: str = "philox"

    def generator(self) -> np.random.Generator:
        """新しい Generator を作る（呼ぶたびに系列の先頭から）。"""
        if self.algorithm != "philox":
            raise ValueError(f"unsupported rng algorithm: {self.algorithm}")
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=self.key)
        return np.random.Generator(np.random.Philox(seq))

    def child(self, *key: int) -> Self:
        """key を追加した子ストリームを返す。"""
        return type(self)(self.seed, (*self.key, *key), self.algorithm)


def as_generator(rng: RngStream | np.random.Generator) -> np.random.Generator:
    """RngStream または Generator から Generator を得る。"""
    if isinstance(rng, RngStream):
        return rng.generator()
    return rng


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """行列積 a·b。

    Raises:
        DimensionError: a の列数と b の行数が異なる場合
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionError(f"matmul expects 2-D matrices, got {a.ndim}-D and {b.ndim}-D")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def qr_pos(a: np.ndarray, tol: float = QR_RANK_TOL) -> tuple[np.ndarray, np.ndarray]:
    """R の対角成分を非負にした（一意な）QR 分解。

    Householder 法（LAPACK）で分解したあと、列ごとに符号を揃える。
    縦長行列 (m ≥ k) では縮約形 Q (m×k), R (k×k) を返す。

    Args:
        a: 分解する行列（正方または縦長）
        tol: ランク落ちとみなす |R_ii| のしきい値

    Returns:
        (Q, R) のタプル

    Raises:
        DimensionError: 横長行列の場合
        SingularMatrixError: |R_ii| < tol の対角成分がある場合
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] < a.shape[1]:
        raise DimensionError(f"qr_pos expects a square or tall matrix, got {a.shape}")
    q, r = np.linalg.qr(a, mode="reduced")
    diag = np.diag(r)
    signs = np.where(diag < 0, -1.0, 1.0)
    q = q * signs
    r = r * signs[:, None]
    small = np.flatnonzero(np.abs(diag) < tol)
    if small.size:
        index = int(small[0])
        raise SingularMatrixError(index, float(abs(diag[index])))
    return q, r


def init_orthogonal(
    size: int,
    rng: RngStream | np.random.Generator,
    scheme: OrthogonalScheme = OrthogonalScheme.QR_GAUSSIAN,
) -> np.ndarray:
    """ランダム直交行列を生成する。

    Args:
        size: 行列サイズ（1 以上）
        rng: 乱数源
        scheme: QR_GAUSSIAN（正規乱数行列の QR）または BLOCK_ROTATION

    Returns:
        size×size の直交行列
    """
    if size < 1:
        raise ValueError(f"size must be >= 1, got {size}")
    if scheme is OrthogonalScheme.BLOCK_ROTATION:
        return block_rotation_orthogonal(size, rng)
    gen = as_generator(rng)
    q, _ = qr_pos(gen.standard_normal((size, size)))
    return q


def block_rotation_orthogonal(
    size: int, rng: RngStream | np.random.Generator
) -> np.ndarray:
    """2×2 回転ブロックを対角に並べた直交行列を生成する。

    回転角は U(−π, π)。奇数サイズでは最後に ±1 の 1×1 ブロックを置く。
    """
    gen = as_generator(rng)
    out = np.zeros((size, size))
    angles = gen.uniform(-np.pi, np.pi, size // 2)
    for i, theta in enumerate(angles):
        c, s = np.cos(theta), np.sin(theta)
        j = 2 * i
        out[j : j + 2, j : j + 2] = [[c, -s], [s, c]]
    if size % 2:
        out[-1, -1] = gen.choice([-1.0, 1.0])
    return out


def init_gaussian(
    rows: int,
    cols: int,
    scheme: InitScheme,
    rng: RngStream | np.random.Generator,
) -> np.ndarray:
    """正規分布の重み行列を生成する。

    fan_in = cols, fan_out = rows として、分散は
    GLOROT_NORMAL で 2/(fan_in + fan_out)、KAIMING で 2/fan_in。
    """
    if rows < 1 or cols < 1:
        raise ValueError(f"dimensions must be >= 1, got ({rows}, {cols})")
    if scheme is InitScheme.GLOROT_NORMAL:
        variance = 2.0 / (rows + cols)
    else:
        variance = 2.0 / cols
    gen = as_generator(rng)
    return gen.normal(0.0, np.sqrt(variance), (rows, cols))


def spectral_norm(
    a: np.ndarray,
    iters: int = 50,
    rng: RngStream | np.random.Generator | None = None,
) -> float:
    """べき乗法で最大特異値を推定する。

    同じ乱数源からは同じ開始ベクトルを引くため、推定値は iters について
    単調非減少になる。rng を省略すると RngStream(0) を使う。
    """
    a = np.asarray(a, dtype=np.float64)
    return float(batched_spectral_norm(a[None], iters, rng)[0])


def batched_spectral_norm(
    mats: np.ndarray,
    iters: int = 50,
    rng: RngStream | np.random.Generator | None = None,
) -> np.ndarray:
    """(S, m, n) の行列束それぞれの最大特異値をべき乗法で推定する。

    開始ベクトルは rng から引いたランダムな単位ベクトル。
    反復が零ベクトルに潰れた行列は新しいランダムベクトルから再開する
    （ゼロ行列では推定値 0 のまま）。
    """
    if iters < 1:
        raise ValueError(f"iters must be >= 1, got {iters}")
    gen = as_generator(RngStream(0) if rng is None else rng)
    mats = np.asarray(mats, dtype=np.float64)
    count, _, cols = mats.shape
    v = _random_unit(gen, count, cols)
    estimate = np.zeros(count)
    for _ in range(iters):
        u = np.einsum("kij,kj->ki", mats, v)
        estimate = np.maximum(estimate, np.linalg.norm(u, axis=1))
        w = np.einsum("kij,ki->kj", mats, u)
        norm = np.linalg.norm(w, axis=1)
        ok = norm > 0
        v[ok] = w[ok] / norm[ok, None]
        collapsed = np.flatnonzero(~ok)
        if collapsed.size:
            v[collapsed] = _random_unit(gen, collapsed.size, cols)
    return estimate


def _random_unit(gen: np.random.Generator, count: int, cols: int) -> np.ndarray:
    v = gen.standard_normal((count, cols))
    return v / np.linalg.norm(v, axis=1, keepdims=True)
