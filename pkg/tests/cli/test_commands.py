"""CLI コマンドのテスト。"""

from pathlib import Path

import numpy as np
import pytest
from typer.testing import CliRunner

from src import __version__
from src.cli.commands import app
from src.config.constants import EXIT_CONFIG
from src.utils.checkpoint import load_checkpoint
from src.utils.tables import read_table

runner = CliRunner()


def train_tiny(output_dir: Path, seed: int = 0) -> Path:
    """小さな Copy タスクを CLI で学習し、実行ディレクトリを返す。"""
    result = runner.invoke(
        app,
        [
            "train",
            "--task",
            "copy",
            "--hidden",
            "8",
            "--iterations",
            "10",
            "--eval-interval",
            "5",
            "--batch-size",
            "4",
            "--delay",
            "2",
            "--seed",
            str(seed),
            "-o",
            str(output_dir),
        ],
    )
    assert result.exit_code == 0, result.output
    return output_dir


@pytest.fixture
def run_dir(tmp_path: Path) -> Path:
    return train_tiny(tmp_path / "run")


class TestMain:
    """エントリーポイントのテスト。"""

    def test_version(self) -> None:
        """--version でバージョンが表示されることを確認。"""
        result = runner.invoke(app, ["--version"])
        assert result.exit_code == 0
        assert f"gamma-rnn version {__version__}" in result.output

    def test_no_command_shows_help(self) -> None:
        """コマンド無しでヘルプが表示されることを確認。"""
        result = runner.invoke(app, [])
        assert result.exit_code == 0
        assert "train" in result.output


class TestTrainCommand:
    """train コマンドのテスト。"""

    def test_writes_run_directory(self, run_dir: Path) -> None:
        """実行ディレクトリに記録とチェックポイントが書き出されることを確認。"""
        for name in ("config.json", "record.json", "epochs.csv", "shape.csv", "checkpoint.bin"):
            assert (run_dir / name).exists()
        _, rows = read_table(run_dir / "epochs.csv")
        assert [r["iteration"] for r in rows] == ["0", "5", "10"]

    def test_invalid_value_exits_with_config_code(self, tmp_path: Path) -> None:
        """不正な値で終了コード 1 になることを確認。"""
        result = runner.invoke(app, ["train", "--hidden", "0", "-o", str(tmp_path)])
        assert result.exit_code == EXIT_CONFIG
        assert "hidden_size" in result.output

    def test_charlm_without_corpus(self, tmp_path: Path) -> None:
        """コーパス無しの文字 LM で終了コード 1 になることを確認。"""
        result = runner.invoke(app, ["train", "--task", "charlm", "-o", str(tmp_path)])
        assert result.exit_code == EXIT_CONFIG

    def test_config_file_with_override(self, tmp_path: Path) -> None:
        """設定ファイルの値を CLI フラグが上書きすることを確認。"""
        config = tmp_path / "config.json"
        config.write_text(
            '{"task": "copy", "hidden_size": 4, "iterations": 4, "eval_interval": 2, '
            '"batch_size": 2, "copy_delay": 1, "eval_size": 8}',
            encoding="utf-8",
        )
        out = tmp_path / "run"
        result = runner.invoke(app, ["train", "-c", str(config), "--hidden", "6", "-o", str(out)])
        assert result.exit_code == 0, result.output
        assert '"hidden_size": 6' in (out / "config.json").read_text(encoding="utf-8")

    def test_paper_scale_alias(self, tmp_path: Path) -> None:
        """--paper-scale が --full-scale と同じく本番規模の設定になることを確認。"""
        out = tmp_path / "run"
        args = ["--task", "copy", "--hidden", "4", "--iterations", "0", "--delay", "1"]
        result = runner.invoke(app, ["train", *args, "--paper-scale", "-o", str(out)])
        assert result.exit_code == 0, result.output
        saved = (out / "config.json").read_text(encoding="utf-8")
        assert '"full_scale": true' in saved

    def test_empty_corpus(self, tmp_path: Path) -> None:
        """空のコーパスで終了コード 1 とエラーメッセージになることを確認。"""
        corpus = tmp_path / "empty.txt"
        corpus.write_text("", encoding="utf-8")
        result = runner.invoke(
            app, ["train", "--task", "charlm", "--corpus", str(corpus), "-o", str(tmp_path)]
        )
        assert result.exit_code == EXIT_CONFIG
        assert isinstance(result.exception, SystemExit)
        assert "Error:" in result.output

    def test_resume_extends_run(self, run_dir: Path) -> None:
        """--resume で保存された実行を続け、同じディレクトリに全行が書き出されることを確認。"""
        result = runner.invoke(app, ["train", "--resume", str(run_dir), "--iterations", "20"])
        assert result.exit_code == 0, result.output
        _, rows = read_table(run_dir / "epochs.csv")
        assert [r["iteration"] for r in rows] == ["0", "5", "10", "15", "20"]

    def test_resume_matches_straight_run(self, tmp_path: Path) -> None:
        """再開した実行のチェックポイントが通しの学習と一致することを確認。"""
        resumed = train_tiny(tmp_path / "resumed")
        result = runner.invoke(app, ["train", "--resume", str(resumed), "--iterations", "20"])
        assert result.exit_code == 0, result.output
        straight = tmp_path / "straight"
        config = resumed / "config.json"
        result = runner.invoke(
            app, ["train", "-c", str(config), "--iterations", "20", "-o", str(straight)]
        )
        assert result.exit_code == 0, result.output
        a = load_checkpoint(resumed / "checkpoint.bin")
        b = load_checkpoint(straight / "checkpoint.bin")
        for name, value in a.model.tensors().items():
            np.testing.assert_array_equal(b.model.tensors()[name], value)
        assert a.optimizer.step == b.optimizer.step == 20

    def test_resume_missing_directory(self, tmp_path: Path) -> None:
        """実行ディレクトリでない場所からの再開で終了コード 1 になることを確認。"""
        result = runner.invoke(app, ["train", "--resume", str(tmp_path / "nothing")])
        assert result.exit_code == EXIT_CONFIG


class TestEvalCommand:
    """eval / info コマンドのテスト。"""

    def test_eval_checkpoint(self, run_dir: Path) -> None:
        """チェックポイントを評価できることを確認。"""
        result = runner.invoke(app, ["eval", str(run_dir / "checkpoint.bin")])
        assert result.exit_code == 0, result.output
        assert "accuracy" in result.output

    def test_eval_hidden_mismatch(self, run_dir: Path) -> None:
        """隠れ層サイズの不一致で終了コード 1 になることを確認。"""
        result = runner.invoke(
            app, ["eval", str(run_dir / "checkpoint.bin"), "--hidden", "16"]
        )
        assert result.exit_code == EXIT_CONFIG
        assert "does not match" in result.output

    def test_eval_bad_file(self, tmp_path: Path) -> None:
        """チェックポイントでないファイルで終了コード 1 になることを確認。"""
        path = tmp_path / "bad.bin"
        path.write_bytes(b"not a checkpoint")
        result = runner.invoke(app, ["eval", str(path)])
        assert result.exit_code == EXIT_CONFIG

    def test_info(self, run_dir: Path) -> None:
        """ヘッダ情報が表示されることを確認。"""
        result = runner.invoke(app, ["info", str(run_dir / "checkpoint.bin")])
        assert result.exit_code == 0
        assert "hidden" in result.output
        assert "static" in result.output


class TestGridCommand:
    """grid コマンドのテスト。"""

    def test_jn_grid_writes_csv(self, tmp_path: Path) -> None:
        """JN 格子の行 CSV と集約 CSV が書き出されることを確認。"""
        result = runner.invoke(
            app,
            [
                "grid",
                "jn",
                "--hidden",
                "4",
                "--gains",
                "1,2",
                "--saturations",
                "0,1",
                "--samples",
                "5",
                "-o",
                str(tmp_path),
            ],
        )
        assert result.exit_code == 0, result.output
        _, rows = read_table(tmp_path / "grid_jn.csv")
        assert len(rows) == 4
        assert all(r["status"] == "ok" for r in rows)
        _, cells = read_table(tmp_path / "grid_jn_summary.csv")
        assert [(c["gain"], c["saturation"]) for c in cells][0] == ("1.0", "0.0")

    def test_block_rotation_init(self, tmp_path: Path) -> None:
        """--orthogonal で再帰行列の初期化方式を切り替えられることを確認。"""
        args = ["grid", "jn", "--hidden", "6", "--gains", "1", "--saturations", "0.5"]
        args += ["--samples", "5"]
        qr = runner.invoke(app, [*args, "-o", str(tmp_path / "qr")])
        block = runner.invoke(
            app, [*args, "--orthogonal", "block_rotation", "-o", str(tmp_path / "block")]
        )
        assert qr.exit_code == 0, qr.output
        assert block.exit_code == 0, block.output
        _, qr_rows = read_table(tmp_path / "qr" / "grid_jn.csv")
        _, block_rows = read_table(tmp_path / "block" / "grid_jn.csv")
        assert block_rows[0]["status"] == "ok"
        assert block_rows[0]["value"] != qr_rows[0]["value"]

    def test_unknown_orthogonal_scheme(self, tmp_path: Path) -> None:
        """不明な初期化方式で終了コード 1 になることを確認。"""
        result = runner.invoke(
            app, ["grid", "jn", "--orthogonal", "householder", "-o", str(tmp_path)]
        )
        assert result.exit_code == EXIT_CONFIG
        assert "unknown orthogonal scheme" in result.output

    def test_unknown_measure(self, tmp_path: Path) -> None:
        """不明な測定で終了コード 1 になることを確認。"""
        result = runner.invoke(app, ["grid", "entropy", "-o", str(tmp_path)])
        assert result.exit_code == EXIT_CONFIG

    def test_invalid_gains(self, tmp_path: Path) -> None:
        """数値でない gain 指定で終了コード 1 になることを確認。"""
        result = runner.invoke(app, ["grid", "jn", "--gains", "a,b", "-o", str(tmp_path)])
        assert result.exit_code == EXIT_CONFIG


class TestTransferCommand:
    """transfer コマンドのテスト。"""

    def test_static_checkpoint_rejected(self, run_dir: Path, tmp_path: Path) -> None:
        """Static のチェックポイントで終了コード 1 になることを確認。"""
        result = runner.invoke(
            app,
            ["transfer", str(run_dir / "checkpoint.bin"), "-o", str(tmp_path / "transfer")],
        )
        assert result.exit_code == EXIT_CONFIG
        assert "heterogeneous" in result.output


class TestSummarizeCommand:
    """summarize コマンドのテスト。"""

    def test_summarize_runs(self, tmp_path: Path) -> None:
        """複数の実行ディレクトリを集計できることを確認。"""
        first = train_tiny(tmp_path / "seed0", seed=0)
        second = train_tiny(tmp_path / "seed1", seed=1)
        result = runner.invoke(app, ["summarize", str(first), str(second)])
        assert result.exit_code == 0, result.output
        assert "2/2" in result.output

    def test_missing_run(self, tmp_path: Path) -> None:
        """存在しない実行ディレクトリで終了コード 1 になることを確認。"""
        result = runner.invoke(app, ["summarize", str(tmp_path / "missing")])
        assert result.exit_code == EXIT_CONFIG
