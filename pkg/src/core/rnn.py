"""バニラ RNN モジュール。

    h_t = γ(W_rec·h_{t−1} + W_in·x_t + b; n, s),   y_t = W_out·h_t + b_out

の順伝播、マスク付き交差エントロピー損失、および形状パラメータを含む
完全な BPTT 勾配を numpy で手組みする。
"""

import logging
from dataclasses import dataclass, fields, replace
try:
    from typing import Self
except ImportError:  # Python < 3.11
    from typing_extensions import Self

import numpy as np
from scipy.special import softmax

from src.config.constants import InitScheme, OrthogonalScheme, Scenario
from src.config.errors import DimensionError, NonFiniteError
from src.core.activation import ShapeParams, gamma_parts, gamma_vec
from src.core.linalg import RngStream, as_generator, init_gaussian, init_orthogonal
from src.tasks.batch import TaskBatch
from src.tasks.metrics import masked_cross_entropy

logger = logging.getLogger(__name__)

WEIGHT_NAMES: tuple[str, ...] = ("w_rec", "w_in", "w_out", "b", "b_out")
SHAPE_NAMES: tuple[str, ...] = ("gain", "saturation")


@dataclass(frozen=True)
class RnnModel:
    """RNN のパラメータ一式（学習中は不変値として扱う）。"""

    w_rec: np.ndarray
    w_in: np.ndarray
    w_out: np.ndarray
    b: np.ndarray
    b_out: np.ndarray
    shape: ShapeParams

    def __post_init__(self) -> None:
        n = self.w_rec.shape[0]
        expected = {
            "w_rec": (n, n),
            "w_in": (n, self.w_in.shape[1] if self.w_in.ndim == 2 else -1),
            "w_out": (self.w_out.shape[0] if self.w_out.ndim == 2 else -1, n),
            "b": (n,),
            "b_out": (self.w_out.shape[0] if self.w_out.ndim == 2 else -1,),
        }
        for name, shape in expected.items():
            value = getattr(self, name)
            if value.shape != shape:
                raise DimensionError(f"{name} has shape {value.shape}, expected {shape}")
            if not np.all(np.isfinite(value)):
                raise NonFiniteError(name)
        self.shape.check_width(n)

    @property
    def hidden_size(self) -> int:
        return self.w_rec.shape[0]

    @property
    def input_size(self) -> int:
        return self.w_in.shape[1]

    @property
    def output_size(self) -> int:
        return self.w_out.shape[0]

    @property
    def scenario(self) -> Scenario:
        return self.shape.scenario

    def tensors(self) -> dict[str, np.ndarray]:
        """重み・バイアス・形状パラメータを名前付きで返す。"""
        out = {name: getattr(self, name) for name in WEIGHT_NAMES}
        out["gain"] = self.shape.gain
        out["saturation"] = self.shape.saturation
        return out

    def with_tensors(self, updates: dict[str, np.ndarray]) -> Self:
        """一部のテンソルを置き換えた新しいモデルを返す（gain は下限でクランプ）。"""
        weights = {k: v for k, v in updates.items() if k in WEIGHT_NAMES}
        shape = self.shape
        if "gain" in updates or "saturation" in updates:
            shape = shape.replace_values(
                updates.get("gain", shape.gain),
                updates.get("saturation", shape.saturation),
            )
        return replace(self, shape=shape, **weights)


@dataclass(frozen=True)
class ForwardTrace:
    """順伝播の記録（先頭軸はバッチ）。

    Attributes:
        pre_activations: (B, T, N) γ の引数
        hidden_states: (B, T+1, N) h_0 を含む隠れ状態
        outputs: (B, T, N_out) 線形読み出し
    """

    pre_activations: np.ndarray
    hidden_states: np.ndarray
    outputs: np.ndarray

    @property
    def final_state(self) -> np.ndarray:
        """最後の隠れ状態 (B, N)。"""
        return self.hidden_states[:, -1]


@dataclass(frozen=True)
class Gradients:
    """損失の各パラメータに関する勾配。

    gain / saturation は HOMOGENEOUS でスカラー（0 次元）、HETEROGENEOUS で
    ベクトル、STATIC では None。
    """

    w_rec: np.ndarray
    w_in: np.ndarray
    w_out: np.ndarray
    b: np.ndarray
    b_out: np.ndarray
    gain: np.ndarray | None = None
    saturation: np.ndarray | None = None

    def as_dict(self) -> dict[str, np.ndarray]:
        """None でない勾配を名前付きで返す。"""
        return {
            f.name: getattr(self, f.name)
            for f in fields(self)
            if getattr(self, f.name) is not None
        }

    def global_norm(self) -> float:
        """全勾配を連結したベクトルの L2 ノルム。"""
        return float(np.sqrt(sum(np.sum(g**2) for g in self.as_dict().values())))


def init_model(
    input_size: int,
    hidden_size: int,
    output_size: int,
    shape: ShapeParams,
    rng: RngStream | np.random.Generator,
    input_scheme: InitScheme = InitScheme.GLOROT_NORMAL,
    orthogonal_scheme: OrthogonalScheme = OrthogonalScheme.QR_GAUSSIAN,
) -> RnnModel:
    """ランダム初期化したモデルを作る。

    W_rec は直交初期化、W_in は正規分布初期化、読み出しとバイアスはゼロ。
    """
    gen = as_generator(rng)
    return RnnModel(
        w_rec=init_orthogonal(hidden_size, gen, orthogonal_scheme),
        w_in=init_gaussian(hidden_size, input_size, input_scheme, gen),
        w_out=np.zeros((output_size, hidden_size)),
        b=np.zeros(hidden_size),
        b_out=np.zeros(output_size),
        shape=shape,
    )


def _as_batched(inputs: np.ndarray) -> np.ndarray:
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim == 2:
        return inputs[None]
    if inputs.ndim != 3:
        raise DimensionError(f"inputs must be (T, N_in) or (B, T, N_in), got {inputs.shape}")
    return inputs


def forward(
    model: RnnModel, inputs: np.ndarray, h0: np.ndarray | None = None
) -> ForwardTrace:
    """系列全体の順伝播を行う。

    Args:
        model: RNN モデル
        inputs: (T, N_in) または (B, T, N_in) の入力（2 次元はバッチ 1 として扱う）
        h0: 初期隠れ状態 (N,) または (B, N)。省略時はゼロ

    Returns:
        順伝播の記録

    Raises:
        DimensionError: 次元が一致しない場合
        NonFiniteError: 隠れ状態が有限でなくなった場合（時刻インデックス付き）
    """
    x = _as_batched(inputs)
    batch, steps, width = x.shape
    n = model.hidden_size
    if width != model.input_size:
        raise DimensionError(f"input width {width} != model input size {model.input_size}")
    if h0 is None:
        h = np.zeros((batch, n))
    else:
        h = np.broadcast_to(np.asarray(h0, dtype=np.float64), (batch, n)).copy()

    pre = np.empty((batch, steps, n))
    hidden = np.empty((batch, steps + 1, n))
    hidden[:, 0] = h
    drive = x @ model.w_in.T + model.b
    for t in range(steps):
        z = h @ model.w_rec.T + drive[:, t]
        h = gamma_vec(z, model.shape)
        if not np.all(np.isfinite(h)):
            raise NonFiniteError("hidden state", step=t)
        pre[:, t] = z
        hidden[:, t + 1] = h
    outputs = hidden[:, 1:] @ model.w_out.T + model.b_out
    return ForwardTrace(pre, hidden, outputs)


def backward(
    model: RnnModel, batch: TaskBatch, trace: ForwardTrace
) -> tuple[float, Gradients]:
    """既存の順伝播記録に対して BPTT を行う。

    Returns:
        (損失, 勾配) のタプル。勾配は損失の厳密な導関数

    Raises:
        ValueError: マスクが空の場合
        NonFiniteError: 損失が有限でない場合
    """
    loss = masked_cross_entropy(trace.outputs, batch)
    if not np.isfinite(loss):
        raise NonFiniteError("loss")

    mask = batch.score_mask
    count = int(mask.sum())
    x = _as_batched(batch.inputs)
    hidden = trace.hidden_states
    steps = x.shape[1]

    d_logits = softmax(trace.outputs, axis=-1)
    np.put_along_axis(
        d_logits,
        batch.targets[..., None],
        np.take_along_axis(d_logits, batch.targets[..., None], axis=-1) - 1.0,
        axis=-1,
    )
    d_logits *= mask[..., None] / count

    d_w_out = np.einsum("bto,btn->on", d_logits, hidden[:, 1:])
    d_b_out = d_logits.sum(axis=(0, 1))
    d_h_out = d_logits @ model.w_out

    parts = gamma_parts(trace.pre_activations, model.shape)
    d_h = np.empty_like(d_h_out)
    d_z = np.empty_like(d_h_out)
    carry = np.zeros_like(d_h_out[:, 0])
    for t in range(steps - 1, -1, -1):
        d_h[:, t] = d_h_out[:, t] + carry
        d_z[:, t] = d_h[:, t] * parts.dx[:, t]
        carry = d_z[:, t] @ model.w_rec

    grads = {
        "w_rec": np.einsum("btn,btm->nm", d_z, hidden[:, :-1]),
        "w_in": np.einsum("btn,bti->ni", d_z, x),
        "w_out": d_w_out,
        "b": d_z.sum(axis=(0, 1)),
        "b_out": d_b_out,
    }
    scenario = model.scenario
    if scenario.adaptive:
        per_neuron_n = (d_h * parts.dn).sum(axis=(0, 1))
        per_neuron_s = (d_h * parts.ds).sum(axis=(0, 1))
        if scenario is Scenario.HOMOGENEOUS:
            # 共有パラメータは各ニューロンの寄与の和
            grads["gain"] = np.asarray(per_neuron_n.sum())
            grads["saturation"] = np.asarray(per_neuron_s.sum())
        else:
            grads["gain"] = per_neuron_n
            grads["saturation"] = per_neuron_s
    return loss, Gradients(**grads)


def loss_and_grads(
    model: RnnModel, batch: TaskBatch, h0: np.ndarray | None = None
) -> tuple[float, Gradients]:
    """損失と全パラメータの勾配を計算する。"""
    trace = forward(model, batch.inputs, h0)
    return backward(model, batch, trace)


def step(model: RnnModel, h: np.ndarray, x: np.ndarray | None = None) -> np.ndarray:
    """1 ステップの状態更新（x 省略時は入力ゼロ）。"""
    z = np.asarray(h, dtype=np.float64) @ model.w_rec.T + model.b
    if x is not None:
        z = z + np.asarray(x, dtype=np.float64) @ model.w_in.T
    return gamma_vec(z, model.shape)


def jacobian_at(model: RnnModel, h: np.ndarray) -> np.ndarray:
    """入力ゼロでの ∂h_t/∂h_{t−1} = diag(γ'(W_rec·h + b))·W_rec。

    Raises:
        DimensionError: h の長さが隠れ層サイズと異なる場合
    """
    h = np.asarray(h, dtype=np.float64)
    if h.shape != (model.hidden_size,):
        raise DimensionError(f"h has shape {h.shape}, expected ({model.hidden_size},)")
    return jacobians_at(model, h[None])[0]


def jacobians_at(model: RnnModel, hs: np.ndarray) -> np.ndarray:
    """(S, N) の状態それぞれでのヤコビアン (S, N, N)。"""
    z = hs @ model.w_rec.T + model.b
    slope = gamma_parts(z, model.shape).dx
    return slope[:, :, None] * model.w_rec[None]
