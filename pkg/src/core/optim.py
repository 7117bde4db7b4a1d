"""最適化モジュール。

Adam、ReduceLROnPlateau 方式の学習率スケジューラ、勾配クリッピング、
およびシナリオごとの学習対象パラメータの選択を提供する。
"""

import logging
from dataclasses import dataclass, field, replace
try:
    from typing import Self
except ImportError:  # Python < 3.11
    from typing_extensions import Self

import numpy as np

from src.config.constants import (
    ADAM_BETA1,
    ADAM_BETA2,
    ADAM_EPS,
    PLATEAU_FACTOR,
    PLATEAU_MIN_LR,
    PLATEAU_PATIENCE,
    PLATEAU_THRESHOLD,
    Scenario,
)
from src.config.errors import DimensionError, NonFiniteError
from src.core.rnn import SHAPE_NAMES, WEIGHT_NAMES, Gradients, RnnModel

logger = logging.getLogger(__name__)


def trainable_names(scenario: Scenario, weights: bool = True) -> tuple[str, ...]:
    """シナリオで学習対象となるテンソル名。

    Args:
        scenario: 適応シナリオ
        weights: False なら重み・バイアスを凍結（転移学習の再学習用）
    """
    names = WEIGHT_NAMES if weights else ()
    if scenario.adaptive:
        names = (*names, *SHAPE_NAMES)
    return names


@dataclass(frozen=True)
class AdamState:
    """Adam の状態。

    Attributes:
        lr: 学習率（重みと形状パラメータで共通）
        trainable: 更新対象のテンソル名
        step: 実行済みステップ数
        m: 一次モーメント
        v: 二次モーメント
    """

    lr: float
    trainable: tuple[str, ...]
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError(f"betas must lie in [0, 1), got ({self.beta1}, {self.beta2})")
        if self.lr < 0:
            raise ValueError(f"lr must be non-negative, got {self.lr}")
        if self.step < 0:
            raise ValueError(f"step must be >= 0, got {self.step}")

    @classmethod
    def create(cls, model: RnnModel, lr: float, trainable: tuple[str, ...]) -> Self:
        """モデルの形に合わせたゼロ初期化の状態を作る。"""
        tensors = model.tensors()
        return cls(
            lr=lr,
            trainable=trainable,
            m={k: np.zeros_like(tensors[k]) for k in trainable},
            v={k: np.zeros_like(tensors[k]) for k in trainable},
        )

    def with_lr(self, lr: float) -> Self:
        return replace(self, lr=lr)


def adam_update(
    param: np.ndarray,
    grad: np.ndarray,
    m: np.ndarray,
    v: np.ndarray,
    step: int,
    lr: float,
    beta1: float = ADAM_BETA1,
    beta2: float = ADAM_BETA2,
    eps: float = ADAM_EPS,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """1 テンソル分のバイアス補正付き Adam 更新。

    Args:
        step: 今回のステップ番号（1 始まり）

    Returns:
        (新パラメータ, 新 m, 新 v)
    """
    m = beta1 * m + (1.0 - beta1) * grad
    v = beta2 * v + (1.0 - beta2) * grad**2
    m_hat = m / (1.0 - beta1**step)
    v_hat = v / (1.0 - beta2**step)
    return param - lr * m_hat / (np.sqrt(v_hat) + eps), m, v


def adam_step(
    model: RnnModel, grads: Gradients, state: AdamState
) -> tuple[RnnModel, AdamState]:
    """学習対象テンソルに Adam を 1 ステップ適用する。

    更新後の gain は下限 GAIN_FLOOR でクランプされる。

    Raises:
        DimensionError: 勾配の形がパラメータと異なる場合
        NonFiniteError: 勾配が有限でない場合（更新は行わない）
    """
    tensors = model.tensors()
    available = grads.as_dict()
    for name in state.trainable:
        if name not in available:
            raise DimensionError(f"missing gradient for {name}")
        grad = available[name]
        if grad.shape != tensors[name].shape:
            raise DimensionError(
                f"gradient {name} has shape {grad.shape}, expected {tensors[name].shape}"
            )
        if not np.all(np.isfinite(grad)):
            raise NonFiniteError(name, step=state.step)

    step = state.step + 1
    updates: dict[str, np.ndarray] = {}
    m: dict[str, np.ndarray] = {}
    v: dict[str, np.ndarray] = {}
    for name in state.trainable:
        updates[name], m[name], v[name] = adam_update(
            tensors[name],
            available[name],
            state.m[name],
            state.v[name],
            step,
            state.lr,
            state.beta1,
            state.beta2,
            state.eps,
        )
    return model.with_tensors(updates), replace(state, step=step, m=m, v=v)


def clip_grad_norm(grads: Gradients, max_norm: float) -> Gradients:
    """全体ノルムが max_norm を超える場合に勾配を一様に縮小する。"""
    norm = grads.global_norm()
    if norm <= max_norm:
        return grads
    scale = max_norm / norm
    logger.debug("clipping gradient norm %.3e -> %.3e", norm, max_norm)
    return Gradients(
        **{k: (v * scale if v is not None else None) for k, v in vars(grads).items()}
    )


@dataclass(frozen=True)
class PlateauScheduler:
    """監視指標（小さいほど良い）が停滞したら学習率を下げるスケジューラ。

    history には直近 patience エポックの指標だけを残す。
    """

    lr: float
    patience: int = PLATEAU_PATIENCE
    factor: float = PLATEAU_FACTOR
    threshold: float = PLATEAU_THRESHOLD
    min_lr: float = PLATEAU_MIN_LR
    best: float = float("inf")
    bad_epochs: int = 0
    history: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if not 0 < self.factor < 1:
            raise ValueError(f"factor must be between 0 and 1, got {self.factor}")
        if self.patience < 1:
            raise ValueError(f"patience must be >= 1, got {self.patience}")


def plateau_update(
    sched: PlateauScheduler, epoch_metric: float
) -> tuple[PlateauScheduler, float]:
    """1 エポック分の指標を反映し、新しいスケジューラと学習率を返す。

    相対しきい値を超える改善が patience エポック連続で無ければ lr を factor 倍する
    （min_lr 未満にはしない）。

    Raises:
        NonFiniteError: 指標が NaN の場合
    """
    if np.isnan(epoch_metric):
        raise NonFiniteError("plateau metric")
    history = (*sched.history, float(epoch_metric))[-sched.patience :]
    if epoch_metric < sched.best * (1.0 - sched.threshold):
        return replace(sched, best=epoch_metric, bad_epochs=0, history=history), sched.lr

    bad = sched.bad_epochs + 1
    lr = sched.lr
    if bad >= sched.patience:
        lr = max(sched.lr * sched.factor, sched.min_lr)
        if lr < sched.lr:
            logger.info("reducing learning rate %.3e -> %.3e", sched.lr, lr)
        bad = 0
    return replace(sched, lr=lr, bad_epochs=bad, history=history), lr
