"""学習ループモジュールのテスト。"""

import math
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

import src.training.trainer as trainer
from src.config.constants import DATA_DIR_ENV, Scenario, TaskId
from src.config.errors import ConfigError, DimensionError, FormatError
from src.config.settings import GridSpec, RunConfig
from src.training.trainer import (
    EpochRow,
    RunRecord,
    cell_name,
    check_model,
    epoch_count,
    evaluate,
    initial_model,
    load_record,
    prepare_task,
    resume_run,
    save_run,
    train_run,
    trainperf_grid,
)
from src.utils.checkpoint import load_checkpoint
from src.utils.tables import read_table

CORPUS = "the quick brown fox jumps over the lazy dog. " * 40


def tiny_copy(**overrides) -> RunConfig:
    """数秒で終わる Copy タスクの設定。"""
    cfg = RunConfig(
        task=TaskId.COPY,
        hidden_size=16,
        learning_rate=1e-2,
        iterations=60,
        eval_interval=20,
        batch_size=16,
        copy_alphabet=4,
        copy_payload=3,
        copy_delay=5,
        eval_size=64,
    )
    return replace(cfg, **overrides)


def tiny_digits(**overrides) -> RunConfig:
    cfg = RunConfig(
        task=TaskId.DIGITS,
        scenario=Scenario.HETEROGENEOUS,
        gain=1.0,
        saturation=0.5,
        hidden_size=8,
        downscale=2,
        epochs=1,
        learning_rate=1e-2,
    )
    return replace(cfg, **overrides)


@pytest.fixture(autouse=True)
def no_data_dir(monkeypatch: pytest.MonkeyPatch) -> None:
    """環境変数の IDX ディレクトリを無効にし、同梱データを使う。"""
    monkeypatch.delenv(DATA_DIR_ENV, raising=False)


@pytest.fixture
def corpus_path(tmp_path: Path) -> Path:
    path = tmp_path / "corpus.txt"
    path.write_text(CORPUS, encoding="utf-8")
    return path


class TestCopyRun:
    """Copy タスクの学習のテスト。"""

    def test_rows_and_learning(self) -> None:
        """評価区間ごとに行が記録され、BPC が下がることを確認。"""
        result = train_run(tiny_copy())
        rows = result.record.rows
        assert [r.epoch for r in rows] == [0, 1, 2, 3]
        assert [r.iteration for r in rows] == [0, 20, 40, 60]
        assert rows[0].bpc == pytest.approx(math.log2(6))
        assert math.isnan(rows[0].train_loss)
        assert rows[-1].bpc < math.log2(6)
        assert result.record.status == "completed"
        assert not result.failed

    def test_partial_last_interval(self) -> None:
        """反復回数が評価間隔で割り切れない場合に最後の区間が短くなることを確認。"""
        result = train_run(tiny_copy(iterations=50))
        assert [r.iteration for r in result.record.rows] == [0, 20, 40, 50]

    def test_zero_iterations(self) -> None:
        """反復 0 回で epoch 0 の行だけが残り、モデルが初期値のままであることを確認。"""
        cfg = tiny_copy(iterations=0)
        result = train_run(cfg)
        assert len(result.record.rows) == 1
        start = initial_model(cfg, result.data)
        for name, value in start.tensors().items():
            np.testing.assert_array_equal(result.checkpoint().model.tensors()[name], value)

    def test_deterministic(self) -> None:
        """同じ設定から同じ記録とモデルが得られることを確認。"""
        a = train_run(tiny_copy(iterations=20))
        b = train_run(tiny_copy(iterations=20))
        np.testing.assert_array_equal(a.record.accuracies, b.record.accuracies)
        assert [r.bpc for r in a.record.rows] == [r.bpc for r in b.record.rows]
        np.testing.assert_array_equal(a.model.w_rec, b.model.w_rec)

    def test_seed_changes_run(self) -> None:
        """シードが異なれば初期重みが異なることを確認。"""
        a = train_run(tiny_copy(iterations=0, seed=0))
        b = train_run(tiny_copy(iterations=0, seed=1))
        assert not np.array_equal(a.model.w_rec, b.model.w_rec)

    def test_numerical_failure_keeps_rows(self, monkeypatch: pytest.MonkeyPatch) -> None:
        """学習中の非有限値で status=failed となり、それまでの行が残ることを確認。"""
        cfg = tiny_copy()
        data = prepare_task(cfg)
        original = trainer.copy_batch

        def nan_batch(copy_cfg, gen):
            batch = original(copy_cfg, gen)
            return replace(batch, inputs=np.full_like(batch.inputs, np.nan))

        monkeypatch.setattr(trainer, "copy_batch", nan_batch)
        result = train_run(cfg, data)
        assert result.failed
        assert [r.epoch for r in result.record.rows] == [0]
        assert "hidden state" in result.record.failure

    def test_mle_snapshots(self) -> None:
        """mle_every ごとに MLE が記録されることを確認。"""
        result = train_run(tiny_copy(iterations=40, mle_every=2))
        mles = [r.mle for r in result.record.rows]
        assert mles[1] is None
        assert math.isfinite(mles[0]) and math.isfinite(mles[2])

    def test_on_epoch_callback(self) -> None:
        """各行の記録後にコールバックが呼ばれることを確認。"""
        seen: list[int] = []
        train_run(tiny_copy(), on_epoch=lambda row: seen.append(row.epoch))
        assert seen == [0, 1, 2, 3]

    def test_invalid_config_raises(self) -> None:
        """不正な設定で計算前に ConfigError が発生することを確認。"""
        with pytest.raises(ConfigError, match="hidden_size"):
            train_run(tiny_copy(hidden_size=0))


class TestOtherTasks:
    """数字・文字 LM タスクの学習のテスト。"""

    def test_digits_heterogeneous(self) -> None:
        """Heterogeneous ではニューロン毎の形状パラメータが記録されることを確認。"""
        result = train_run(tiny_digits())
        rows = result.record.rows
        assert [r.epoch for r in rows] == [0, 1]
        assert len(rows[-1].gain) == 8
        assert rows[-1].iteration > 0
        assert len(result.record.shape_table()) == 2 * 8
        assert rows[0].accuracy == pytest.approx(0.1, abs=0.05)

    def test_digits_homogeneous_scalar_shape(self) -> None:
        """Homogeneous では形状パラメータがスカラーで記録されることを確認。"""
        result = train_run(tiny_digits(scenario=Scenario.HOMOGENEOUS))
        assert isinstance(result.record.final.gain, float)
        assert result.record.shape_table()[0][1] is None

    def test_charlm_initial_bpc(self, corpus_path: Path) -> None:
        """学習前の BPC が log2 V になることを確認。"""
        cfg = RunConfig(
            task=TaskId.CHARLM,
            corpus=str(corpus_path),
            hidden_size=8,
            epochs=1,
            batch_size=4,
            chunk=20,
            learning_rate=1e-2,
        )
        result = train_run(cfg)
        vocab = len(set(CORPUS))
        assert result.data.input_size == vocab
        assert result.record.rows[0].bpc == pytest.approx(math.log2(vocab))
        assert result.record.final.bpc < math.log2(vocab)

    def test_charlm_scheduler_starts_at_base_lr(self, corpus_path: Path) -> None:
        """スケジューラ有効時も最初のエポックは基準の学習率であることを確認。"""
        cfg = RunConfig(
            task=TaskId.CHARLM,
            corpus=str(corpus_path),
            hidden_size=8,
            epochs=2,
            batch_size=4,
            chunk=20,
            scheduler=True,
            learning_rate=5e-3,
        )
        rows = train_run(cfg).record.rows
        assert rows[1].lr == 5e-3

    def test_charlm_requires_corpus(self) -> None:
        """コーパス無しの文字 LM で ConfigError が発生することを確認。"""
        with pytest.raises(ConfigError, match="requires a corpus"):
            train_run(RunConfig(task=TaskId.CHARLM))

    def test_charlm_evaluate_splits(self, corpus_path: Path) -> None:
        """検証・テスト分割を別々に評価できることを確認。"""
        cfg = RunConfig(task=TaskId.CHARLM, corpus=str(corpus_path), hidden_size=4, chunk=20)
        data = prepare_task(cfg)
        model = initial_model(cfg, data)
        valid = evaluate(model, data, "valid")
        test = evaluate(model, data, "test")
        assert valid.count == len(data.corpus.valid) - 1
        assert test.count == len(data.corpus.test) - 1


class TestRecordIo:
    """記録の保存・読み込みのテスト。"""

    def test_save_run_files(self, tmp_path: Path) -> None:
        """実行ディレクトリに全ファイルが書き出されることを確認。"""
        result = train_run(tiny_copy(iterations=20))
        run_dir = save_run(result, tmp_path / "run")
        for name in ("config.json", "record.json", "epochs.csv", "shape.csv", "checkpoint.bin"):
            assert (run_dir / name).exists()
        version, rows = read_table(run_dir / "epochs.csv")
        assert version == 1
        assert [int(r["epoch"]) for r in rows] == [0, 1]
        assert RunConfig.from_json(run_dir / "config.json") == RunConfig.from_dict(
            result.record.config
        )

    def test_load_record(self, tmp_path: Path) -> None:
        """保存した記録が読み戻せることを確認。"""
        result = train_run(tiny_copy(iterations=20))
        save_run(result, tmp_path)
        loaded = load_record(tmp_path)
        assert loaded.status == "completed"
        assert loaded.final == result.record.final
        assert math.isnan(loaded.rows[0].train_loss)

    def test_checkpoint_matches_model(self, tmp_path: Path) -> None:
        """保存したチェックポイントのモデルが学習結果と一致することを確認。"""
        result = train_run(tiny_copy(iterations=20))
        save_run(result, tmp_path)
        loaded = load_checkpoint(tmp_path / "checkpoint.bin")
        np.testing.assert_array_equal(loaded.model.w_out, result.model.w_out)
        assert loaded.epoch == 1
        assert loaded.optimizer.step == 20
        assert loaded.iteration == 20

    def test_record_rejects_non_increasing_epoch(self) -> None:
        """エポック番号が増加しない行で ValueError が発生することを確認。"""
        row = EpochRow(0, 0, float("nan"), 0.1, 3.0, 1e-3, 1.0, 0.0)
        record = RunRecord(config={})
        record.add(row)
        with pytest.raises(ValueError, match="epoch must increase"):
            record.add(row)

    def test_empty_record_final_raises(self) -> None:
        """行の無い記録の final で ValueError が発生することを確認。"""
        with pytest.raises(ValueError, match="no rows"):
            _ = RunRecord(config={}).final


def assert_same_state(a: trainer.TrainResult, b: trainer.TrainResult) -> None:
    """モデル・Adam・記録がビット単位で一致することを確認する。"""
    for name, value in a.model.tensors().items():
        np.testing.assert_array_equal(b.model.tensors()[name], value, err_msg=name)
    assert a.optimizer.step == b.optimizer.step
    assert a.optimizer.lr == b.optimizer.lr
    for name in a.optimizer.trainable:
        np.testing.assert_array_equal(b.optimizer.m[name], a.optimizer.m[name])
        np.testing.assert_array_equal(b.optimizer.v[name], a.optimizer.v[name])
    assert a.scheduler == b.scheduler
    assert [r.epoch for r in a.record.rows] == [r.epoch for r in b.record.rows]
    assert a.record.rows[1:] == b.record.rows[1:]


class TestResume:
    """チェックポイントからの学習再開のテスト。"""

    def test_digits_resume_matches_straight_run(self, tmp_path: Path) -> None:
        """1 エポック学習して保存、1 エポック再開した結果が 2 エポック通しと一致することを確認。"""
        save_run(train_run(tiny_digits(epochs=1)), tmp_path)
        resumed = resume_run(tmp_path, tiny_digits(epochs=2))
        straight = train_run(tiny_digits(epochs=2))
        assert_same_state(straight, resumed)
        assert resumed.record.status == "completed"

    def test_copy_resume_matches_straight_run(self, tmp_path: Path) -> None:
        """Copy の反復を 20 回で区切って再開しても 40 回通しと一致することを確認。"""
        save_run(train_run(tiny_copy(iterations=20)), tmp_path)
        resumed = resume_run(tmp_path, tiny_copy(iterations=40))
        straight = train_run(tiny_copy(iterations=40))
        assert_same_state(straight, resumed)
        assert resumed.record.final.iteration == 40

    def test_charlm_resume_keeps_scheduler(self, corpus_path: Path, tmp_path: Path) -> None:
        """スケジューラの状態も引き継がれ、通しの学習と一致することを確認。"""
        cfg = RunConfig(
            task=TaskId.CHARLM,
            corpus=str(corpus_path),
            hidden_size=8,
            epochs=2,
            batch_size=4,
            chunk=20,
            scheduler=True,
            learning_rate=5e-3,
        )
        save_run(train_run(cfg), tmp_path)
        resumed = resume_run(tmp_path, replace(cfg, epochs=4))
        straight = train_run(replace(cfg, epochs=4))
        assert resumed.scheduler is not None
        assert_same_state(straight, resumed)

    def test_resumed_run_saves_and_resumes_again(self, tmp_path: Path) -> None:
        """再開した実行を保存すると記録が全エポックを含み、さらに再開できることを確認。"""
        first, second = tmp_path / "first", tmp_path / "second"
        save_run(train_run(tiny_copy(iterations=20)), first)
        save_run(resume_run(first, tiny_copy(iterations=40)), second)
        assert [r.epoch for r in load_record(second).rows] == [0, 1, 2]
        third = resume_run(second, tiny_copy(iterations=60))
        assert_same_state(train_run(tiny_copy(iterations=60)), third)

    def test_defaults_to_saved_config(self, tmp_path: Path) -> None:
        """設定を省略すると保存された設定で続け、追加のエポックが無いことを確認。"""
        result = train_run(tiny_copy(iterations=20))
        save_run(result, tmp_path)
        resumed = resume_run(tmp_path)
        assert resumed.record.rows[1:] == result.record.rows[1:]

    def test_failed_run_cannot_resume(self, tmp_path: Path) -> None:
        """失敗した実行の再開で ConfigError が発生することを確認。"""
        result = train_run(tiny_copy(iterations=20))
        result.record.status = "failed"
        save_run(result, tmp_path)
        with pytest.raises(ConfigError, match="cannot be resumed"):
            resume_run(tmp_path)

    def test_scenario_mismatch(self, tmp_path: Path) -> None:
        """シナリオが異なる設定での再開で ConfigError が発生することを確認。"""
        save_run(train_run(tiny_digits()), tmp_path)
        with pytest.raises(ConfigError, match="scenario"):
            resume_run(tmp_path, tiny_digits(epochs=2, scenario=Scenario.STATIC))

    def test_fewer_epochs_than_checkpoint(self, tmp_path: Path) -> None:
        """チェックポイントより短い設定での再開で ConfigError が発生することを確認。"""
        save_run(train_run(tiny_copy(iterations=60)), tmp_path)
        with pytest.raises(ConfigError, match="beyond the configured"):
            resume_run(tmp_path, tiny_copy(iterations=20))

    def test_corrupt_checkpoint(self, tmp_path: Path) -> None:
        """壊れたチェックポイントで FormatError が発生することを確認。"""
        save_run(train_run(tiny_copy(iterations=20)), tmp_path)
        path = tmp_path / "checkpoint.bin"
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(FormatError):
            resume_run(tmp_path)


class TestCheckModel:
    """モデル次元の検証のテスト。"""

    def test_hidden_mismatch(self) -> None:
        """隠れ層サイズが異なると DimensionError が発生することを確認。"""
        cfg = tiny_copy()
        data = prepare_task(cfg)
        model = initial_model(cfg, data)
        with pytest.raises(DimensionError, match="hidden size 16 does not match"):
            check_model(model, cfg.with_overrides(hidden_size=32), data)

    def test_matching_model_passes(self) -> None:
        """次元が一致すれば例外が発生しないことを確認。"""
        cfg = tiny_copy()
        data = prepare_task(cfg)
        check_model(initial_model(cfg, data), cfg, data)


class TestEpochCount:
    """記録行数の計算のテスト。"""

    def test_copy_rounds_up(self) -> None:
        """Copy では反復数を評価間隔で切り上げることを確認。"""
        assert epoch_count(tiny_copy(iterations=41)) == 3

    def test_epoch_tasks(self) -> None:
        """数字タスクではエポック数そのものであることを確認。"""
        assert epoch_count(tiny_digits(epochs=4)) == 4


class TestTrainperfGrid:
    """学習性能の格子のテスト。"""

    def test_cell_matches_single_run(self, tmp_path: Path) -> None:
        """セルの値が同じ設定の単独学習の最終正解率と一致することを確認。"""
        cfg = tiny_copy(iterations=20)
        grid = GridSpec(gains=(1.0,), saturations=(0.5,), seeds=1, base_seed=3)
        table = trainperf_grid(grid, cfg, cells_dir=tmp_path)
        single = train_run(
            cfg.with_overrides(gain=1.0, saturation=0.5, scenario=Scenario.STATIC, seed=3)
        )
        assert table.rows[0].value == single.record.final.accuracy
        assert (tmp_path / cell_name(1.0, 0.5, 0) / "record.json").exists()

    def test_cell_name(self) -> None:
        """セルのディレクトリ名の形式を確認。"""
        assert cell_name(1.25, 0.5, 2) == "n1.25_s0.5_seed2"


class TestDeskScaleReproduction:
    """既定規模（T_delay = 50、2 万反復、8×8 数字）での学習結果の傾向のテスト。"""

    COPY_CHANCE = 1 / 8

    @pytest.mark.slow
    @pytest.mark.parametrize("seed", range(3))
    def test_copy_softplus_solves_sigmoid_stays_at_chance(self, seed: int) -> None:
        """(n, s) = (1, 0) は 0.99 以上、(1, 1) は偶然水準 ±5 ポイントに留まることを確認。"""
        softplus = train_run(RunConfig(task=TaskId.COPY, gain=1.0, saturation=0.0, seed=seed))
        sigmoid = train_run(RunConfig(task=TaskId.COPY, gain=1.0, saturation=1.0, seed=seed))
        assert softplus.record.final.accuracy >= 0.99
        assert abs(sigmoid.record.final.accuracy - self.COPY_CHANCE) <= 0.05

    @pytest.mark.slow
    def test_copy_only_softplus_axis_learns(self) -> None:
        """s ∈ {0, 0.5, 1} × n ∈ {1, 5} で 0.9 を超えるのが s = 0 のセルだけであることを確認。"""
        grid = GridSpec(gains=(1.0, 5.0), saturations=(0.0, 0.5, 1.0))
        table = trainperf_grid(grid, RunConfig(task=TaskId.COPY), workers=3)
        assert table.failures == 0
        for cell in table.aggregate():
            if cell.saturation == 0.0:
                assert cell.mean > 0.9, cell
            else:
                assert cell.mean <= 0.9, cell

    @pytest.mark.slow
    def test_digits_homogeneous_no_worse_no_slower(self) -> None:
        """3 シード平均で Homogeneous が Static に劣らず、遅れもしないことを確認。

        最終正解率は Static −0.5 ポイント以上、Static の最終正解率への到達は
        Static のエポック数以内。
        """
        static_runs, homo_runs = [], []
        for seed in range(3):
            cfg = RunConfig(task=TaskId.DIGITS, seed=seed)
            static_runs.append(train_run(cfg).record)
            homo_runs.append(
                train_run(cfg.with_overrides(scenario=Scenario.HOMOGENEOUS)).record
            )
        static_final = np.mean([r.final.accuracy for r in static_runs])
        homo_curve = np.mean([r.accuracies for r in homo_runs], axis=0)
        assert homo_curve[-1] >= static_final - 0.005
        reached = np.flatnonzero(homo_curve >= static_final)
        assert reached.size > 0
        assert reached[0] <= static_runs[0].final.epoch
