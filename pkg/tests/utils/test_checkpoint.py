"""チェックポイント入出力モジュールのテスト。"""

import json
import struct
import tempfile
from pathlib import Path

import numpy as np
import pytest

from src.config.constants import CHECKPOINT_MAGIC, Scenario
from src.config.errors import FormatError
from src.core.activation import ShapeParams
from src.core.linalg import RngStream
from src.core.optim import AdamState, PlateauScheduler, plateau_update, trainable_names
from src.core.rnn import RnnModel, init_model
from src.utils.checkpoint import (
    Checkpoint,
    get_checkpoint_info,
    load_checkpoint,
    save_checkpoint,
)


def make_model(scenario: Scenario = Scenario.HETEROGENEOUS) -> RnnModel:
    shape = ShapeParams.create(2.0, 0.25, scenario, 5)
    model = init_model(3, 5, 4, shape, RngStream(0))
    gen = np.random.default_rng(1)
    return model.with_tensors(
        {"w_out": gen.normal(size=(4, 5)), "b": gen.normal(size=5)}
    )


class TestSaveCheckpoint:
    """チェックポイント保存のテスト。"""

    def test_save_creates_file(self) -> None:
        """ファイルが作成されることを確認。"""
        with tempfile.TemporaryDirectory() as tmpdir:
            output_path = Path(tmpdir) / "model.bin"
            result = save_checkpoint(Checkpoint(make_model()), output_path)
            assert result.exists()
            assert result == output_path

    def test_save_creates_parent_directory(self) -> None:
        """親ディレクトリが自動作成されることを確認。"""
        with tempfile.TemporaryDirectory() as tmpdir:
            output_path = Path(tmpdir) / "subdir" / "model.bin"
            assert save_checkpoint(Checkpoint(make_model()), output_path).exists()

    def test_file_starts_with_magic(self) -> None:
        """ファイルがマジックバイトで始まることを確認。"""
        with tempfile.TemporaryDirectory() as tmpdir:
            output_path = save_checkpoint(Checkpoint(make_model()), Path(tmpdir) / "m.bin")
            assert output_path.read_bytes()[:8] == CHECKPOINT_MAGIC


class TestLoadCheckpoint:
    """チェックポイント読み込みのテスト。"""

    @pytest.mark.parametrize("scenario", list(Scenario))
    def test_round_trip(self, scenario: Scenario) -> None:
        """保存したモデルと付加情報がそのまま読み戻せることを確認。"""
        model = make_model(scenario)
        checkpoint = Checkpoint(
            model,
            config={"task": "copy", "hidden_size": 5},
            epoch=7,
            iteration=70,
            metrics={"accuracy": 0.5},
        )
        with tempfile.TemporaryDirectory() as tmpdir:
            path = save_checkpoint(checkpoint, Path(tmpdir) / "m.bin")
            loaded = load_checkpoint(path)
        assert loaded.model.scenario is scenario
        for name, value in model.tensors().items():
            np.testing.assert_array_equal(loaded.model.tensors()[name], value)
        assert loaded.config == checkpoint.config
        assert loaded.epoch == 7
        assert loaded.iteration == 70
        assert loaded.optimizer is None
        assert loaded.scheduler is None
        assert loaded.metrics == checkpoint.metrics

    def test_optimizer_state_round_trip(self) -> None:
        """Adam のモーメントとスケジューラの状態がビット単位で読み戻せることを確認。"""
        model = make_model()
        gen = np.random.default_rng(2)
        trainable = trainable_names(Scenario.HETEROGENEOUS)
        tensors = model.tensors()
        adam = AdamState(
            lr=5e-4,
            trainable=trainable,
            step=12,
            m={k: gen.normal(size=np.shape(tensors[k])) for k in trainable},
            v={k: gen.random(np.shape(tensors[k])) for k in trainable},
        )
        scheduler = PlateauScheduler(1e-3, patience=2)
        for metric in (3.0, 2.5, 2.5):
            scheduler, _ = plateau_update(scheduler, metric)
        with tempfile.TemporaryDirectory() as tmpdir:
            path = save_checkpoint(
                Checkpoint(model, optimizer=adam, scheduler=scheduler),
                Path(tmpdir) / "m.bin",
            )
            loaded = load_checkpoint(path)
            info = get_checkpoint_info(path)
        restored = loaded.optimizer
        assert restored.trainable == trainable
        assert (restored.lr, restored.step) == (5e-4, 12)
        assert (restored.beta1, restored.beta2, restored.eps) == (
            adam.beta1,
            adam.beta2,
            adam.eps,
        )
        for name in trainable:
            np.testing.assert_array_equal(restored.m[name], adam.m[name])
            np.testing.assert_array_equal(restored.v[name], adam.v[name])
        assert loaded.scheduler == scheduler
        assert info["optimizer_step"] == 12
        assert info["n_params"] == sum(v.size for v in tensors.values())

    def test_fresh_scheduler_round_trip(self) -> None:
        """best が無限大のままのスケジューラも読み戻せることを確認。"""
        scheduler = PlateauScheduler(1e-3)
        with tempfile.TemporaryDirectory() as tmpdir:
            path = save_checkpoint(
                Checkpoint(make_model(), scheduler=scheduler), Path(tmpdir) / "m.bin"
            )
            assert load_checkpoint(path).scheduler == scheduler

    @pytest.mark.parametrize("key", ["scenario", "tensors"])
    def test_missing_header_key(self, key: str) -> None:
        """ヘッダの必須項目が欠けると FormatError が発生することを確認。"""
        with tempfile.TemporaryDirectory() as tmpdir:
            path = save_checkpoint(Checkpoint(make_model()), Path(tmpdir) / "m.bin")
            data = path.read_bytes()
            length = struct.unpack_from("<I", data, 12)[0]
            header = json.loads(data[16 : 16 + length])
            del header[key]
            encoded = json.dumps(header).encode("utf-8")
            path.write_bytes(
                data[:12] + struct.pack("<I", len(encoded)) + encoded + data[16 + length :]
            )
            with pytest.raises(FormatError, match="missing or invalid field"):
                load_checkpoint(path)
            if key == "scenario":
                with pytest.raises(FormatError, match="missing or invalid field"):
                    get_checkpoint_info(path)

    def test_bad_magic(self) -> None:
        """マジックバイトが違うと FormatError が発生することを確認。"""
        with tempfile.TemporaryDirectory() as tmpdir:
            path = Path(tmpdir) / "m.bin"
            path.write_bytes(b"NOTAMODEL" + bytes(16))
            with pytest.raises(FormatError, match="not a gamma-rnn checkpoint"):
                load_checkpoint(path)

    def test_unsupported_version(self) -> None:
        """未対応のバージョンで FormatError が発生することを確認。"""
        with tempfile.TemporaryDirectory() as tmpdir:
            path = save_checkpoint(Checkpoint(make_model()), Path(tmpdir) / "m.bin")
            data = bytearray(path.read_bytes())
            data[8:12] = struct.pack("<I", 99)
            path.write_bytes(bytes(data))
            with pytest.raises(FormatError, match="unsupported checkpoint version 99"):
                load_checkpoint(path)

    def test_truncated(self) -> None:
        """途中で切れたファイルで FormatError が発生することを確認。"""
        with tempfile.TemporaryDirectory() as tmpdir:
            path = save_checkpoint(Checkpoint(make_model()), Path(tmpdir) / "m.bin")
            path.write_bytes(path.read_bytes()[:-8])
            with pytest.raises(FormatError, match="truncated"):
                load_checkpoint(path)

    def test_trailing_bytes(self) -> None:
        """末尾に余分なバイトがあると FormatError が発生することを確認。"""
        with tempfile.TemporaryDirectory() as tmpdir:
            path = save_checkpoint(Checkpoint(make_model()), Path(tmpdir) / "m.bin")
            path.write_bytes(path.read_bytes() + bytes(8))
            with pytest.raises(FormatError, match="trailing bytes"):
                load_checkpoint(path)

    def test_missing_file(self) -> None:
        """存在しないファイルで OSError が発生することを確認。"""
        with tempfile.TemporaryDirectory() as tmpdir:
            with pytest.raises(OSError):
                load_checkpoint(Path(tmpdir) / "missing.bin")


class TestGetCheckpointInfo:
    """チェックポイント情報取得のテスト。"""

    def test_get_info_returns_correct_values(self) -> None:
        """正しい情報が返されることを確認。"""
        model = make_model()
        with tempfile.TemporaryDirectory() as tmpdir:
            path = save_checkpoint(
                Checkpoint(model, config={"task": "digits"}, epoch=3), Path(tmpdir) / "m.bin"
            )
            info = get_checkpoint_info(path)
        assert info["scenario"] == "heterogeneous"
        assert (info["input"], info["hidden"], info["output"]) == (3, 5, 4)
        assert info["epoch"] == 3
        assert info["task"] == "digits"
        assert info["n_params"] == sum(v.size for v in model.tensors().values())
