"""評価指標モジュール。"""

from typing import NamedTuple

import numpy as np
from scipy.special import log_softmax

from src.tasks.batch import TaskBatch


class Metrics(NamedTuple):
    """採点位置での評価指標。

    Attributes:
        accuracy: argmax がターゲットに一致した割合
        bpc: 平均交差エントロピー / ln 2（bits per character）
        loss: 平均交差エントロピー（nats）
        count: 採点位置の数
    """

    accuracy: float
    bpc: float
    loss: float
    count: int


def masked_cross_entropy(outputs: np.ndarray, batch: TaskBatch) -> float:
    """採点位置での平均交差エントロピー（nats）。"""
    mask = batch.score_mask
    count = int(mask.sum())
    if count == 0:
        raise ValueError("score mask selects no positions")
    logp = log_softmax(outputs, axis=-1)
    picked = np.take_along_axis(logp, batch.targets[..., None], axis=-1)[..., 0]
    return float(-picked[mask].sum() / count)


def metrics(outputs: np.ndarray, batch: TaskBatch) -> Metrics:
    """出力ロジットから正解率と BPC を計算する。

    Raises:
        ValueError: 採点マスクが空、または形が一致しない場合
    """
    if outputs.shape[:2] != batch.targets.shape:
        raise ValueError(
            f"outputs shape {outputs.shape[:2]} != targets shape {batch.targets.shape}"
        )
    mask = batch.score_mask
    count = int(mask.sum())
    if count == 0:
        raise ValueError("score mask selects no positions")
    loss = masked_cross_entropy(outputs, batch)
    hits = outputs.argmax(axis=-1) == batch.targets
    return Metrics(
        accuracy=float(hits[mask].mean()),
        bpc=loss / np.log(2.0),
        loss=loss,
        count=count,
    )


def merge_metrics(parts: list[Metrics]) -> Metrics:
    """複数バッチの指標を採点位置数で重み付けして統合する。"""
    total = sum(p.count for p in parts)
    if total == 0:
        raise ValueError("no scored positions to merge")
    accuracy = sum(p.accuracy * p.count for p in parts) / total
    loss = sum(p.loss * p.count for p in parts) / total
    return Metrics(accuracy, loss / np.log(2.0), loss, total)
