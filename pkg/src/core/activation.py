"""活性化関数モジュール。

gain n と saturation s を持つ活性化関数族

    γ(x; n, s) = (1 − s)·softplus(n·x)/n + s·sigmoid(n·x)

と、その x, n, s に関する偏導関数を評価する。s = 0 で softplus、s = 1 で
sigmoid となり、n → ∞ で ReLU / Heaviside に近づく（極限として扱い特別扱いしない）。
"""

from dataclasses import dataclass
from typing import NamedTuple
try:
    from typing import Self
except ImportError:  # Python < 3.11
    from typing_extensions import Self

import numpy as np
from scipy.special import expit

from src.config.constants import GAIN_FLOOR, Scenario
from src.config.errors import DimensionError, NonFiniteError

ArrayLike = float | np.ndarray


def softplus(z: ArrayLike) -> np.ndarray:
    """オーバーフローしない softplus: max(z, 0) + log1p(exp(−|z|))。"""
    return np.logaddexp(0.0, z)


def sigmoid(z: ArrayLike) -> np.ndarray:
    """オーバーフローしない sigmoid。"""
    return expit(z)


def _prepare(
    x: ArrayLike, n: ArrayLike, s: ArrayLike
) -> tuple[np.ndarray, np.ndarray, np.ndarray, bool]:
    """引数を配列化し、定義域を検証する。

    Raises:
        NonFiniteError: 引数に NaN を含む場合
        ValueError: gain が正でない場合
    """
    scalar = all(np.ndim(v) == 0 for v in (x, n, s))
    xa = np.asarray(x, dtype=np.float64)
    na = np.asarray(n, dtype=np.float64)
    sa = np.asarray(s, dtype=np.float64)
    for name, arr in (("x", xa), ("gain", na), ("saturation", sa)):
        if np.isnan(arr).any():
            raise NonFiniteError(name)
    if (na <= 0).any():
        raise ValueError(f"gain must be positive, got {na.min()}")
    return xa, na, sa, scalar


def _out(value: np.ndarray, scalar: bool) -> ArrayLike:
    return float(value) if scalar else value


def gamma(x: ArrayLike, n: ArrayLike, s: ArrayLike) -> ArrayLike:
    """γ(x; n, s) を評価する。

    Args:
        x: 入力（スカラーまたは配列）
        n: gain（正の値）
        s: saturation（制約なし）

    Returns:
        γ の値。全引数がスカラーなら float

    Raises:
        ValueError: n が正でない場合
        NonFiniteError: NaN を含む場合
    """
    xa, na, sa, scalar = _prepare(x, n, s)
    z = na * xa
    value = (1.0 - sa) * softplus(z) / na + sa * sigmoid(z)
    return _out(value, scalar)


def gamma_dx(x: ArrayLike, n: ArrayLike, s: ArrayLike) -> ArrayLike:
    """∂γ/∂x = (1 − s)·σ(nx) + n·s·σ(nx)(1 − σ(nx))。"""
    xa, na, sa, scalar = _prepare(x, n, s)
    z = na * xa
    sig = sigmoid(z)
    value = (1.0 - sa) * sig + na * sa * sig * sigmoid(-z)
    return _out(value, scalar)


def gamma_dn(x: ArrayLike, n: ArrayLike, s: ArrayLike) -> ArrayLike:
    """∂γ/∂n = ((1 − s)/n)(x·σ(nx) − softplus(nx)/n) + s·x·σ(nx)(1 − σ(nx))。"""
    xa, na, sa, scalar = _prepare(x, n, s)
    z = na * xa
    sig = sigmoid(z)
    value = (1.0 - sa) / na * (xa * sig - softplus(z) / na) + sa * xa * sig * sigmoid(
        -z
    )
    return _out(value, scalar)


def gamma_ds(x: ArrayLike, n: ArrayLike, s: ArrayLike) -> ArrayLike:
    """∂γ/∂s = σ(nx) − softplus(nx)/n（γ は s について affine なので s に依存しない）。"""
    xa, na, _, scalar = _prepare(x, n, s)
    z = na * xa
    value = sigmoid(z) - softplus(z) / na + np.zeros_like(np.asarray(s, dtype=float))
    return _out(value, scalar)


@dataclass(frozen=True)
class ShapeParams:
    """形状パラメータ (gain, saturation) と適応シナリオ。

    STATIC / HOMOGENEOUS では 0 次元配列（全ニューロン共有）、
    HETEROGENEOUS では長さ N のベクトルを保持する。
    """

    gain: np.ndarray
    saturation: np.ndarray
    scenario: Scenario

    def __post_init__(self) -> None:
        gain = np.asarray(self.gain, dtype=np.float64)
        saturation = np.asarray(self.saturation, dtype=np.float64)
        if gain.shape != saturation.shape:
            raise DimensionError(
                f"gain shape {gain.shape} != saturation shape {saturation.shape}"
            )
        heterogeneous = self.scenario is Scenario.HETEROGENEOUS
        if heterogeneous != (gain.ndim == 1):
            raise DimensionError(
                f"{self.scenario.value} scenario expects "
                f"{'vector' if heterogeneous else 'scalar'} shape parameters, "
                f"got shape {gain.shape}"
            )
        if not np.all(np.isfinite(gain)) or not np.all(np.isfinite(saturation)):
            raise NonFiniteError("shape parameters")
        if (gain <= 0).any():
            raise ValueError(f"gain must be positive, got {gain.min()}")
        object.__setattr__(self, "gain", gain)
        object.__setattr__(self, "saturation", saturation)

    @classmethod
    def create(
        cls, gain: float, saturation: float, scenario: Scenario, size: int
    ) -> Self:
        """シナリオに応じた初期形状パラメータを作る。

        HETEROGENEOUS では全成分を同じ値で初期化する。
        """
        if scenario is Scenario.HETEROGENEOUS:
            return cls(np.full(size, gain), np.full(size, saturation), scenario)
        return cls(np.asarray(gain), np.asarray(saturation), scenario)

    @property
    def size(self) -> int | None:
        """ニューロン毎のパラメータ長（共有なら None）。"""
        return int(self.gain.shape[0]) if self.gain.ndim == 1 else None

    def replace_values(self, gain: np.ndarray, saturation: np.ndarray) -> Self:
        """値を置き換え、gain を下限でクランプした新しいインスタンスを返す。"""
        return type(self)(
            np.maximum(np.asarray(gain, dtype=np.float64), GAIN_FLOOR),
            np.asarray(saturation, dtype=np.float64),
            self.scenario,
        )

    def check_width(self, width: int) -> None:
        """ニューロン数との整合性を検証する。"""
        if self.size is not None and self.size != width:
            raise DimensionError(
                f"heterogeneous shape params have length {self.size}, "
                f"input has length {width}"
            )


class ActivationParts(NamedTuple):
    """要素ごとの γ とその偏導関数（BPTT 用）。"""

    value: np.ndarray
    dx: np.ndarray
    dn: np.ndarray
    ds: np.ndarray


def gamma_vec(x: np.ndarray, params: ShapeParams) -> np.ndarray:
    """γ を要素ごとに適用する（最後の軸がニューロン軸）。

    Raises:
        DimensionError: heterogeneous パラメータ長と x の長さが異なる場合
    """
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        return x.copy()
    params.check_width(x.shape[-1])
    return gamma(x, params.gain, params.saturation)


def gamma_parts(x: np.ndarray, params: ShapeParams) -> ActivationParts:
    """γ と ∂γ/∂x, ∂γ/∂n, ∂γ/∂s を一度に評価する。"""
    x = np.asarray(x, dtype=np.float64)
    if x.size:
        params.check_width(x.shape[-1])
    xa, na, sa, _ = _prepare(x, params.gain, params.saturation)
    z = na * xa
    sig = sigmoid(z)
    sig_c = sigmoid(-z)
    sp = softplus(z)
    branch_ds = sig - sp / na
    value = (1.0 - sa) * sp / na + sa * sig
    dx = (1.0 - sa) * sig + na * sa * sig * sig_c
    dn = (1.0 - sa) / na * (xa * sig - sp / na) + sa * xa * sig * sig_c
    return ActivationParts(value, dx, dn, branch_ds * np.ones_like(value))
