"""タスクバッチの定義。"""

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from src.config.errors import DimensionError


@dataclass(frozen=True)
class TaskBatch:
    """学習・評価に渡す 1 バッチ。

    Attributes:
        inputs: (B, T, N_in) の入力
        targets: (B, T) のクラス ID（分類タスクでは最終ステップのみ有効）
        score_mask: (B, T) の採点位置
        task: タスク名
        vocab_size: 出力クラス数
        metadata: タスク固有の付加情報
    """

    inputs: np.ndarray
    targets: np.ndarray
    score_mask: np.ndarray
    task: str
    vocab_size: int
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.inputs.ndim != 3:
            raise DimensionError(f"inputs must be (B, T, N_in), got {self.inputs.shape}")
        if self.targets.shape != self.inputs.shape[:2]:
            raise DimensionError(
                f"targets shape {self.targets.shape} != {self.inputs.shape[:2]}"
            )
        if self.score_mask.shape != self.targets.shape:
            raise DimensionError(
                f"score_mask shape {self.score_mask.shape} != {self.targets.shape}"
            )
        if self.targets.size and (
            self.targets.min() < 0 or self.targets.max() >= self.vocab_size
        ):
            raise ValueError(f"targets must lie in [0, {self.vocab_size})")

    @property
    def size(self) -> int:
        """バッチ内の系列数。"""
        return self.inputs.shape[0]

    @property
    def length(self) -> int:
        """系列長 T。"""
        return self.inputs.shape[1]


def one_hot(ids: np.ndarray, width: int) -> np.ndarray:
    """整数 ID 配列を one-hot 表現 (..., width) に変換する。"""
    return np.eye(width)[np.asarray(ids, dtype=np.int64)]
