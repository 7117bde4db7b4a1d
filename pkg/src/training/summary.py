"""複数の学習記録の集計。"""

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from src.training.trainer import RunRecord


def epochs_to_target(record: RunRecord, tolerance: float = 0.05) -> int | None:
    """正解率が記録中の最高値の (1 − tolerance) 倍に初めて達したエポック。

    Args:
        record: 学習記録
        tolerance: 最高値からの相対許容差

    Returns:
        エポック番号（行が無ければ None）
    """
    if not 0 <= tolerance < 1:
        raise ValueError(f"tolerance must be in [0, 1), got {tolerance}")
    if not record.rows:
        return None
    target = (1.0 - tolerance) * record.accuracies.max()
    for row in record.rows:
        if row.accuracy >= target:
            return row.epoch
    return None


def epochs_to_reach(record: RunRecord, accuracy: float) -> int | None:
    """正解率が accuracy 以上になった最初のエポック（到達しなければ None）。"""
    for row in record.rows:
        if row.accuracy >= accuracy:
            return row.epoch
    return None


def modal_value(values: Sequence[float] | np.ndarray, bins: int = 20) -> float:
    """ヒストグラムで最も頻度の高いビンの中心。

    NaN は無視する。同数のビンがあれば小さい方を返す。

    Raises:
        ValueError: 有限な値が 1 つも無い場合、または bins < 1 の場合
    """
    if bins < 1:
        raise ValueError(f"bins must be >= 1, got {bins}")
    arr = np.asarray(values, dtype=np.float64)
    arr = arr[np.isfinite(arr)]
    if arr.size == 0:
        raise ValueError("values must contain at least one finite number")
    if arr.min() == arr.max():
        return float(arr[0])
    counts, edges = np.histogram(arr, bins=bins)
    peak = int(np.argmax(counts))
    return float((edges[peak] + edges[peak + 1]) / 2)


@dataclass(frozen=True)
class RunSummary:
    """複数シードの集計。

    Attributes:
        runs: 記録の数
        completed: 最後まで完了した記録の数
        accuracy_mean: 最終正解率の平均
        accuracy_std: 最終正解率の標準偏差
        bpc_mean: 最終 BPC の平均
        bpc_std: 最終 BPC の標準偏差
        accuracy_mode: 最終正解率の最頻値
        epochs_to_target: 最高値の 95% に達するまでのエポック数の平均
    """

    runs: int
    completed: int
    accuracy_mean: float
    accuracy_std: float
    bpc_mean: float
    bpc_std: float
    accuracy_mode: float
    epochs_to_target: float


def summarize(records: Sequence[RunRecord], bins: int = 20) -> RunSummary:
    """記録の最終行を集計する。

    Raises:
        ValueError: 記録が空の場合
    """
    if not records:
        raise ValueError("records must not be empty")
    accuracy = np.array([r.final.accuracy for r in records])
    bpc = np.array([r.final.bpc for r in records])
    speeds = [epochs_to_target(r) for r in records]
    reached = [s for s in speeds if s is not None]
    return RunSummary(
        runs=len(records),
        completed=sum(r.status == "completed" for r in records),
        accuracy_mean=float(accuracy.mean()),
        accuracy_std=float(accuracy.std()),
        bpc_mean=float(bpc.mean()),
        bpc_std=float(bpc.std()),
        accuracy_mode=modal_value(accuracy, bins),
        epochs_to_target=float(np.mean(reached)) if reached else float("nan"),
    )
