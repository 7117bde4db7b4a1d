"""学習記録の集計のテスト。"""

import math

import pytest

from src.training.summary import (
    epochs_to_reach,
    epochs_to_target,
    modal_value,
    summarize,
)
from src.training.trainer import EpochRow, RunRecord


def make_record(accuracies: list[float], status: str = "completed") -> RunRecord:
    record = RunRecord(config={}, status=status)
    for epoch, accuracy in enumerate(accuracies):
        record.add(EpochRow(epoch, epoch * 10, 0.0, accuracy, 1.0 - accuracy, 1e-3, 1.0, 0.0))
    return record


class TestEpochsToTarget:
    """収束速度の指標のテスト。"""

    def test_first_epoch_within_tolerance(self) -> None:
        """最高値の 95% に初めて達したエポックを返すことを確認。"""
        record = make_record([0.1, 0.5, 0.96, 0.99, 1.0])
        assert epochs_to_target(record) == 2

    def test_zero_tolerance(self) -> None:
        """tolerance 0 では最高値に達したエポックを返すことを確認。"""
        record = make_record([0.1, 0.8, 0.8, 0.7])
        assert epochs_to_target(record, tolerance=0.0) == 1

    def test_empty_record(self) -> None:
        """行が無ければ None を返すことを確認。"""
        assert epochs_to_target(RunRecord(config={})) is None

    def test_invalid_tolerance(self) -> None:
        """tolerance が [0, 1) の外で ValueError が発生することを確認。"""
        with pytest.raises(ValueError, match="tolerance"):
            epochs_to_target(make_record([0.5]), tolerance=1.0)

    def test_epochs_to_reach(self) -> None:
        """指定した正解率に達したエポックを返すことを確認。"""
        record = make_record([0.1, 0.5, 0.9])
        assert epochs_to_reach(record, 0.5) == 1
        assert epochs_to_reach(record, 0.95) is None


class TestModalValue:
    """最頻値のテスト。"""

    def test_peak_bin_center(self) -> None:
        """最も頻度の高いビンの中心を返すことを確認。"""
        values = [0.0, 0.9, 0.91, 0.92, 1.0]
        assert modal_value(values, bins=10) == pytest.approx(0.95)

    def test_constant_values(self) -> None:
        """全て同じ値ならその値を返すことを確認。"""
        assert modal_value([0.3, 0.3, 0.3]) == 0.3

    def test_ignores_nan(self) -> None:
        """NaN を無視することを確認。"""
        assert modal_value([float("nan"), 0.5, 0.5]) == 0.5

    def test_all_nan_raises(self) -> None:
        """有限な値が無いと ValueError が発生することを確認。"""
        with pytest.raises(ValueError, match="at least one finite"):
            modal_value([float("nan")])

    def test_invalid_bins(self) -> None:
        """bins < 1 で ValueError が発生することを確認。"""
        with pytest.raises(ValueError, match="bins must be >= 1"):
            modal_value([1.0], bins=0)


class TestSummarize:
    """複数シードの集計のテスト。"""

    def test_mean_and_std(self) -> None:
        """最終行の平均と標準偏差を確認。"""
        records = [make_record([0.1, 0.6]), make_record([0.1, 0.8])]
        summary = summarize(records)
        assert summary.runs == 2
        assert summary.completed == 2
        assert summary.accuracy_mean == pytest.approx(0.7)
        assert summary.accuracy_std == pytest.approx(0.1)
        assert summary.bpc_mean == pytest.approx(0.3)
        assert summary.epochs_to_target == 1.0

    def test_counts_failed_runs(self) -> None:
        """失敗した記録が完了数に含まれないことを確認。"""
        records = [make_record([0.1, 0.5]), make_record([0.1], status="failed")]
        assert summarize(records).completed == 1

    def test_empty_raises(self) -> None:
        """記録が空なら ValueError が発生することを確認。"""
        with pytest.raises(ValueError, match="must not be empty"):
            summarize([])

    def test_single_record_has_zero_std(self) -> None:
        """記録が 1 つなら標準偏差 0 であることを確認。"""
        summary = summarize([make_record([0.2, 0.4])])
        assert summary.accuracy_std == 0.0
        assert not math.isnan(summary.accuracy_mode)
