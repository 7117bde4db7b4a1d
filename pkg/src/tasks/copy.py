"""Copy タスク。

L 個のランダム記号、T_delay 個の空白、想起マーカーと L−1 個の空白を入力し、
最後の L ステップで記号列をそのまま再生させる。
"""

from dataclasses import dataclass

import numpy as np

from src.config.constants import BATCH_SIZE, COPY_ALPHABET, COPY_DELAY_DESK, COPY_PAYLOAD
from src.config.errors import ConfigError
from src.core.linalg import RngStream, as_generator
from src.tasks.batch import TaskBatch, one_hot


@dataclass(frozen=True)
class CopyConfig:
    """Copy タスクの設定。

    Attributes:
        alphabet: 記号の種類数 K（ID 0..K−1）
        payload: 記号列の長さ L
        delay: 待機ステップ数 T_delay
        batch_size: バッチ内の系列数
    """

    alphabet: int = COPY_ALPHABET
    payload: int = COPY_PAYLOAD
    delay: int = COPY_DELAY_DESK
    batch_size: int = BATCH_SIZE

    def __post_init__(self) -> None:
        if self.alphabet < 2:
            raise ConfigError(f"alphabet must be >= 2, got {self.alphabet}")
        if self.payload < 1:
            raise ConfigError(f"payload must be >= 1, got {self.payload}")
        if self.delay < 0:
            raise ConfigError(f"delay must be >= 0, got {self.delay}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")

    @property
    def blank(self) -> int:
        """空白記号の ID。"""
        return self.alphabet

    @property
    def marker(self) -> int:
        """想起マーカーの ID。"""
        return self.alphabet + 1

    @property
    def width(self) -> int:
        """one-hot 幅（記号 + 空白 + マーカー）。"""
        return self.alphabet + 2

    @property
    def length(self) -> int:
        """系列長 2L + T_delay。"""
        return 2 * self.payload + self.delay


def copy_batch(cfg: CopyConfig, rng: RngStream | np.random.Generator) -> TaskBatch:
    """Copy タスクのバッチを生成する。

    Args:
        cfg: タスク設定
        rng: 乱数源（RngStream なら同じ値から常に同じバッチ）

    Returns:
        入力は幅 K+2 の one-hot、採点マスクは最後の L ステップのみ
    """
    gen = as_generator(rng)
    batch, length, payload = cfg.batch_size, cfg.length, cfg.payload
    symbols = gen.integers(0, cfg.alphabet, size=(batch, payload))

    ids = np.full((batch, length), cfg.blank, dtype=np.int64)
    ids[:, :payload] = symbols
    recall = length - payload
    ids[:, recall] = cfg.marker

    targets = np.full((batch, length), cfg.blank, dtype=np.int64)
    targets[:, recall:] = symbols
    mask = np.zeros((batch, length), dtype=bool)
    mask[:, recall:] = True

    return TaskBatch(
        inputs=one_hot(ids, cfg.width),
        targets=targets,
        score_mask=mask,
        task="copy",
        vocab_size=cfg.width,
        metadata={"delay": cfg.delay, "payload": payload, "alphabet": cfg.alphabet},
    )
