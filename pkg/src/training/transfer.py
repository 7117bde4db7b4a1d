"""回転した数字への転移（形状パラメータのみの再学習）。

Heterogeneous で学習したチェックポイントの重み・バイアスを凍結し、
回転させたテスト画像の半分でニューロン毎の (n_i, s_i) だけを再学習して、
残り半分で正解率の回復を測る。
"""

import logging
from collections.abc import Callable
from dataclasses import asdict, dataclass
from typing import Any

import numpy as np

from src.config.constants import (
    BATCH_SIZE,
    LEARNING_RATE_DESK,
    TRANSFER_ROTATION_DEG,
    Scenario,
    TaskId,
)
from src.config.errors import ConfigError, NumericalError
from src.config.settings import RunConfig
from src.core.linalg import RngStream
from src.core.optim import AdamState, trainable_names
from src.core.rnn import RnnModel
from src.tasks.digits import load_digit_splits, rotate_digits
from src.training.trainer import digits_epoch, evaluate_dataset
from src.utils.checkpoint import Checkpoint

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TransferEpoch:
    """再学習 1 エポックの記録。"""

    epoch: int
    train_loss: float
    accuracy: float
    gain: tuple[float, ...]
    saturation: tuple[float, ...]

    @property
    def spread(self) -> tuple[float, float]:
        """(n_i の標準偏差, s_i の標準偏差)。"""
        return float(np.std(self.gain)), float(np.std(self.saturation))


@dataclass(frozen=True)
class TransferResult:
    """転移の結果。

    Attributes:
        degrees: 回転角
        original_accuracy: 回転前の評価画像での正解率
        pre_accuracy: 回転後・再学習前の正解率
        post_accuracy: 再学習後の正解率
        epochs: エポック 0（再学習前）から始まる記録
        model: 再学習後のモデル
        status: completed / failed
        failure: 失敗時のメッセージ
    """

    degrees: float
    original_accuracy: float
    pre_accuracy: float
    post_accuracy: float
    epochs: tuple[TransferEpoch, ...]
    model: RnnModel
    status: str = "completed"
    failure: str | None = None

    @property
    def recovered(self) -> float:
        """回転で失った正解率のうち再学習で取り戻した割合（失っていなければ NaN）。"""
        lost = self.original_accuracy - self.pre_accuracy
        if lost <= 0:
            return float("nan")
        return (self.post_accuracy - self.pre_accuracy) / lost

    @property
    def spread_increased(self) -> bool:
        """(n_i, s_i) の散らばりが再学習で広がったか。"""
        first, last = self.epochs[0].spread, self.epochs[-1].spread
        return last[0] > first[0] or last[1] > first[1]

    def to_dict(self) -> dict[str, Any]:
        return {
            "degrees": self.degrees,
            "original_accuracy": self.original_accuracy,
            "pre_accuracy": self.pre_accuracy,
            "post_accuracy": self.post_accuracy,
            "recovered": self.recovered,
            "status": self.status,
            "failure": self.failure,
            "epochs": [
                {**asdict(e), "gain": list(e.gain), "saturation": list(e.saturation)}
                for e in self.epochs
            ],
        }

    def spread_table(self) -> list[tuple[Any, ...]]:
        """(epoch, train_loss, accuracy, gain_std, saturation_std) の行。"""
        return [(e.epoch, e.train_loss, e.accuracy, *e.spread) for e in self.epochs]

    def trajectory_table(self) -> list[tuple[Any, ...]]:
        """(epoch, neuron, gain, saturation) の行。"""
        return [
            (e.epoch, i, g, s)
            for e in self.epochs
            for i, (g, s) in enumerate(zip(e.gain, e.saturation, strict=True))
        ]


def _snapshot(model: RnnModel) -> tuple[tuple[float, ...], tuple[float, ...]]:
    return tuple(model.shape.gain.tolist()), tuple(model.shape.saturation.tolist())


def run_transfer(
    checkpoint: Checkpoint,
    degrees: float = TRANSFER_ROTATION_DEG,
    epochs: int = 5,
    learning_rate: float = LEARNING_RATE_DESK,
    batch_size: int = BATCH_SIZE,
    seed: int = 0,
    data_dir: str | None = None,
    min_accuracy: float | None = None,
    on_epoch: Callable[[TransferEpoch], None] | None = None,
) -> TransferResult:
    """チェックポイントの (n_i, s_i) だけを回転画像で再学習する。

    評価画像は元の学習と同じテスト分割を回転し、クラス均衡に半分ずつ
    再学習用と評価用に分けたもの。

    Args:
        checkpoint: Heterogeneous・数字タスクのチェックポイント
        degrees: 回転角（度）
        epochs: 再学習エポック数
        learning_rate: 再学習の学習率（0 でパラメータは変化しない）
        batch_size: バッチサイズ
        seed: シャッフルと分割のシード
        data_dir: IDX データのディレクトリ（省略時はチェックポイントの設定）
        min_accuracy: 元の正解率がこれ未満のチェックポイントを拒否する
        on_epoch: エポックごとのコールバック

    Returns:
        転移の結果

    Raises:
        ConfigError: Heterogeneous 以外・数字タスク以外のチェックポイント、
            または元の正解率が min_accuracy 未満の場合
    """
    model = checkpoint.model
    if model.scenario is not Scenario.HETEROGENEOUS:
        raise ConfigError(
            f"transfer retrains per-neuron shape parameters and needs a heterogeneous "
            f"checkpoint, got {model.scenario.value}"
        )
    if epochs < 0:
        raise ConfigError(f"epochs must be >= 0, got {epochs}")
    if learning_rate < 0:
        raise ConfigError(f"learning_rate must be non-negative, got {learning_rate}")
    source = RunConfig.from_dict(checkpoint.config).resolved()
    if source.task is not TaskId.DIGITS:
        raise ConfigError(f"transfer needs a digits checkpoint, got {source.task.value}")

    _, test = load_digit_splits(
        data_dir if data_dir is not None else source.data_dir,
        source.downscale,
        source.permutation_seed,
        source.split_seed,
    )
    _, upright_test = rotate_digits(test, 0.0, seed)
    rotated_train, rotated_test = rotate_digits(test, degrees, seed)
    original = evaluate_dataset(model, upright_test).accuracy
    if min_accuracy is not None and original < min_accuracy:
        raise ConfigError(
            f"checkpoint accuracy {original:.4f} is below min_accuracy {min_accuracy}"
        )

    pre = evaluate_dataset(model, rotated_test).accuracy
    gain, saturation = _snapshot(model)
    history = [TransferEpoch(0, float("nan"), pre, gain, saturation)]
    if on_epoch is not None:
        on_epoch(history[0])
    logger.info("transfer %.1f deg: original %.4f, rotated %.4f", degrees, original, pre)

    adam = AdamState.create(
        model, learning_rate, trainable_names(Scenario.HETEROGENEOUS, weights=False)
    )
    gen = RngStream(seed, (4,)).generator()
    status, failure = "completed", None
    try:
        for epoch in range(1, epochs + 1):
            model, adam, loss, _ = digits_epoch(model, adam, rotated_train, batch_size, gen)
            gain, saturation = _snapshot(model)
            accuracy = evaluate_dataset(model, rotated_test).accuracy
            history.append(TransferEpoch(epoch, loss, accuracy, gain, saturation))
            logger.info("transfer epoch %d: accuracy %.4f", epoch, accuracy)
            if on_epoch is not None:
                on_epoch(history[-1])
    except NumericalError as e:
        status, failure = "failed", str(e)
        logger.error("transfer aborted: %s", e)

    return TransferResult(
        degrees=degrees,
        original_accuracy=original,
        pre_accuracy=pre,
        post_accuracy=history[-1].accuracy,
        epochs=tuple(history),
        model=model,
        status=status,
        failure=failure,
    )
