"""学習ループモジュール。

Copy・逐次数字・文字 LM の 3 タスクを同じ RunRecord 形式で学習・評価する。
Copy は eval_interval 反復ごと、他のタスクはエポックごとに 1 行を記録し、
学習前の評価を epoch 0 の行として必ず含める。
"""

import logging
import math
from collections.abc import Callable
from dataclasses import asdict, dataclass, field, replace
from functools import partial
from pathlib import Path
from typing import Any
try:
    from typing import Self
except ImportError:  # Python < 3.11
    from typing_extensions import Self

import numpy as np

from src import __version__
from src.config.constants import (
    DIGITS_CLASSES,
    INPUT_INIT,
    LYAP_SEEDS,
    RECORD_SCHEMA_VERSION,
    Measure,
    Scenario,
    TaskId,
)
from src.config.errors import ConfigError, DimensionError, NumericalError
from src.config.settings import GridSpec, RunConfig
from src.core.activation import ShapeParams
from src.core.linalg import RngStream
from src.core.optim import (
    AdamState,
    PlateauScheduler,
    adam_step,
    clip_grad_norm,
    plateau_update,
    trainable_names,
)
from src.core.rnn import RnnModel, backward, forward, init_model
from src.diagnostics.grid import GridTable, scan_grid
from src.diagnostics.lyapunov import mle_snapshot
from src.tasks.batch import TaskBatch
from src.tasks.charlm import CorpusSplit, charlm_batches, load_corpus
from src.tasks.copy import CopyConfig, copy_batch
from src.tasks.digits import DigitDataset, load_digit_splits
from src.tasks.metrics import Metrics, merge_metrics, metrics
from src.utils.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from src.utils.tables import read_json, write_json, write_table

logger = logging.getLogger(__name__)

STATUS_RUNNING = "running"
STATUS_COMPLETED = "completed"
STATUS_FAILED = "failed"

EVAL_BLOCK: int = 1000  # 評価時のバッチサイズ

# 実行ディレクトリのファイル名
CONFIG_FILE = "config.json"
RECORD_FILE = "record.json"
EPOCHS_FILE = "epochs.csv"
SHAPE_FILE = "shape.csv"
CHECKPOINT_FILE = "checkpoint.bin"

EPOCH_COLUMNS: tuple[str, ...] = (
    "epoch",
    "iteration",
    "train_loss",
    "accuracy",
    "bpc",
    "lr",
    "gain_mean",
    "gain_std",
    "saturation_mean",
    "saturation_std",
    "mle",
)
SHAPE_COLUMNS: tuple[str, ...] = ("epoch", "neuron", "gain", "saturation")

ShapeValue = float | tuple[float, ...]


def shape_snapshot(model: RnnModel) -> tuple[ShapeValue, ShapeValue]:
    """形状パラメータの記録用の値（共有ならスカラー、ニューロン毎ならタプル）。"""
    gain, saturation = model.shape.gain, model.shape.saturation
    if gain.ndim == 0:
        return float(gain), float(saturation)
    return tuple(gain.tolist()), tuple(saturation.tolist())


@dataclass(frozen=True)
class EpochRow:
    """1 エポック（Copy では 1 評価区間）の記録。

    Attributes:
        epoch: エポック番号（0 は学習前）
        iteration: それまでの累積パラメータ更新回数
        train_loss: エポック内の平均学習損失（epoch 0 は NaN）
        accuracy: 評価正解率
        bpc: 評価 BPC
        lr: このエポックで使った学習率
        gain: gain（共有ならスカラー、ニューロン毎ならベクトル）
        saturation: saturation（同上）
        mle: 最大 Lyapunov 指数のスナップショット（未計算なら None）
    """

    epoch: int
    iteration: int
    train_loss: float
    accuracy: float
    bpc: float
    lr: float
    gain: ShapeValue
    saturation: ShapeValue
    mle: float | None = None

    @property
    def shape_stats(self) -> tuple[float, float, float, float]:
        """(gain 平均, gain 標準偏差, saturation 平均, saturation 標準偏差)。"""
        gain = np.atleast_1d(np.asarray(self.gain, dtype=np.float64))
        saturation = np.atleast_1d(np.asarray(self.saturation, dtype=np.float64))
        return (
            float(gain.mean()),
            float(gain.std()),
            float(saturation.mean()),
            float(saturation.std()),
        )

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        for key in ("gain", "saturation"):
            if isinstance(data[key], tuple):
                data[key] = list(data[key])
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Self:
        values = dict(data)
        for key in ("gain", "saturation"):
            if isinstance(values[key], list):
                values[key] = tuple(float(v) for v in values[key])
        return cls(**values)


@dataclass
class RunRecord:
    """1 回の学習の記録。

    Attributes:
        config: 解決済みの設定（RunConfig.to_dict() の形）
        rows: エポック行（エポック番号は狭義単調増加）
        status: running / completed / failed
        failure: 失敗時のエラーメッセージ
        version: 記録したコードのバージョン
        schema_version: 記録形式のバージョン
    """

    config: dict[str, Any]
    rows: list[EpochRow] = field(default_factory=list)
    status: str = STATUS_RUNNING
    failure: str | None = None
    version: str = __version__
    schema_version: int = RECORD_SCHEMA_VERSION

    def add(self, row: EpochRow) -> None:
        """行を追加する。

        Raises:
            ValueError: エポック番号が増加していない場合
        """
        if self.rows and row.epoch <= self.rows[-1].epoch:
            raise ValueError(
                f"epoch must increase, got {row.epoch} after {self.rows[-1].epoch}"
            )
        self.rows.append(row)

    @property
    def final(self) -> EpochRow:
        """最後の行。"""
        if not self.rows:
            raise ValueError("record has no rows")
        return self.rows[-1]

    @property
    def accuracies(self) -> np.ndarray:
        return np.array([row.accuracy for row in self.rows])

    def to_dict(self) -> dict[str, Any]:
        return {
            "config": self.config,
            "rows": [row.to_dict() for row in self.rows],
            "status": self.status,
            "failure": self.failure,
            "version": self.version,
            "schema_version": self.schema_version,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Self:
        return cls(
            config=data["config"],
            rows=[EpochRow.from_dict(row) for row in data["rows"]],
            status=data["status"],
            failure=data.get("failure"),
            version=data.get("version", __version__),
            schema_version=data.get("schema_version", RECORD_SCHEMA_VERSION),
        )

    def epoch_table(self) -> list[tuple[Any, ...]]:
        """epochs.csv の行。"""
        return [
            (
                row.epoch,
                row.iteration,
                row.train_loss,
                row.accuracy,
                row.bpc,
                row.lr,
                *row.shape_stats,
                row.mle,
            )
            for row in self.rows
        ]

    def shape_table(self) -> list[tuple[Any, ...]]:
        """shape.csv の行（共有パラメータは neuron 列を空にした 1 行）。"""
        table: list[tuple[Any, ...]] = []
        for row in self.rows:
            if isinstance(row.gain, tuple):
                table.extend(
                    (row.epoch, i, g, s)
                    for i, (g, s) in enumerate(zip(row.gain, row.saturation, strict=True))
                )
            else:
                table.append((row.epoch, None, row.gain, row.saturation))
        return table


@dataclass(frozen=True)
class TaskData:
    """学習・評価に使うタスクデータ。

    タスクに応じて copy / digits (train, test) / corpus のいずれかを持つ。
    """

    task: TaskId
    input_size: int
    output_size: int
    copy: CopyConfig | None = None
    eval_batch: TaskBatch | None = None
    train: DigitDataset | None = None
    test: DigitDataset | None = None
    corpus: CorpusSplit | None = None


def prepare_task(config: RunConfig) -> TaskData:
    """設定に従ってタスクデータを用意する。

    Raises:
        ConfigError: コーパスが短すぎる場合
        OSError: データファイルを読めない場合
        FormatError: データファイルの形式が不正な場合
    """
    cfg = config.resolved()
    if cfg.task is TaskId.COPY:
        copy_cfg = CopyConfig(
            cfg.copy_alphabet, cfg.copy_payload, cfg.copy_delay, cfg.batch_size
        )
        eval_batch = copy_batch(
            replace(copy_cfg, batch_size=cfg.eval_size), RngStream(cfg.seed, (3,))
        )
        return TaskData(
            cfg.task, copy_cfg.width, copy_cfg.width, copy=copy_cfg, eval_batch=eval_batch
        )
    if cfg.task is TaskId.DIGITS:
        train, test = load_digit_splits(
            cfg.data_dir, cfg.downscale, cfg.permutation_seed, cfg.split_seed
        )
        return TaskData(cfg.task, 1, DIGITS_CLASSES, train=train, test=test)
    corpus = load_corpus(cfg.corpus, cfg.chunk)
    for name in ("train", "valid", "test"):
        if len(getattr(corpus, name)) < 2:
            raise ConfigError(f"corpus {cfg.corpus} is too small for a {name} split")
    return TaskData(cfg.task, corpus.vocab_size, corpus.vocab_size, corpus=corpus)


def check_model(model: RnnModel, config: RunConfig, data: TaskData) -> None:
    """モデルの次元が設定・タスクと一致するか検証する。

    Raises:
        DimensionError: 隠れ層・入力・出力のいずれかの次元が一致しない場合
    """
    cfg = config.resolved()
    pairs = (
        ("hidden size", model.hidden_size, cfg.hidden_size),
        ("input size", model.input_size, data.input_size),
        ("output size", model.output_size, data.output_size),
    )
    for name, actual, expected in pairs:
        if actual != expected:
            raise DimensionError(
                f"checkpoint {name} {actual} does not match configured {name} {expected}"
            )


def evaluate_dataset(model: RnnModel, dataset: DigitDataset) -> Metrics:
    """数字データ全体の指標。"""
    order = np.arange(len(dataset))
    parts = []
    for start in range(0, len(dataset), EVAL_BLOCK):
        batch = dataset.batch(order[start : start + EVAL_BLOCK])
        parts.append(metrics(forward(model, batch.inputs).outputs, batch))
    return merge_metrics(parts)


def evaluate_stream(model: RnnModel, ids: np.ndarray, vocab_size: int, chunk: int) -> Metrics:
    """文字 ID 列を 1 本のストリームとして状態を引き継ぎながら評価する。"""
    parts = []
    h = None
    for batch in charlm_batches(ids, vocab_size, 1, chunk):
        trace = forward(model, batch.inputs, h)
        parts.append(metrics(trace.outputs, batch))
        h = trace.final_state
    return merge_metrics(parts)


def evaluate(model: RnnModel, data: TaskData, split: str | None = None) -> Metrics:
    """タスクの評価指標を計算する。

    Args:
        model: RNN モデル
        data: タスクデータ
        split: 文字 LM の "valid" / "test"、数字の "train" / "test"。
            省略時は学習中の監視に使う分割（Copy は固定評価バッチ）

    Raises:
        DimensionError: モデルとタスクの次元が一致しない場合
    """
    if data.task is TaskId.COPY:
        return metrics(forward(model, data.eval_batch.inputs).outputs, data.eval_batch)
    if data.task is TaskId.DIGITS:
        return evaluate_dataset(model, data.train if split == "train" else data.test)
    corpus = data.corpus
    ids = corpus.test if split == "test" else corpus.valid
    return evaluate_stream(model, ids, corpus.vocab_size, corpus.chunk)


def _update(
    model: RnnModel,
    adam: AdamState,
    batch: TaskBatch,
    clip_norm: float | None,
    h0: np.ndarray | None = None,
) -> tuple[RnnModel, AdamState, float, np.ndarray]:
    trace = forward(model, batch.inputs, h0)
    loss, grads = backward(model, batch, trace)
    if clip_norm is not None:
        grads = clip_grad_norm(grads, clip_norm)
    model, adam = adam_step(model, grads, adam)
    return model, adam, loss, trace.final_state


def copy_interval(
    model: RnnModel,
    adam: AdamState,
    copy_cfg: CopyConfig,
    gen: np.random.Generator,
    iterations: int,
    clip_norm: float | None = None,
) -> tuple[RnnModel, AdamState, float]:
    """新しいバッチで iterations 回更新し、平均損失を返す。"""
    losses = []
    for _ in range(iterations):
        model, adam, loss, _ = _update(model, adam, copy_batch(copy_cfg, gen), clip_norm)
        losses.append(loss)
    return model, adam, float(np.mean(losses))


def digits_epoch(
    model: RnnModel,
    adam: AdamState,
    dataset: DigitDataset,
    batch_size: int,
    gen: np.random.Generator,
    clip_norm: float | None = None,
) -> tuple[RnnModel, AdamState, float, int]:
    """シャッフルした学習データを 1 周する。

    Returns:
        (モデル, オプティマイザ状態, 平均損失, 更新回数)
    """
    order = gen.permutation(len(dataset))
    losses = []
    for start in range(0, len(order), batch_size):
        batch = dataset.batch(order[start : start + batch_size])
        model, adam, loss, _ = _update(model, adam, batch, clip_norm)
        losses.append(loss)
    return model, adam, float(np.mean(losses)), len(losses)


def charlm_epoch(
    model: RnnModel,
    adam: AdamState,
    corpus: CorpusSplit,
    batch_size: int,
    clip_norm: float | None = None,
) -> tuple[RnnModel, AdamState, float, int]:
    """学習 ID 列を状態を引き継ぐ truncated BPTT で 1 周する。"""
    streams = max(1, min(batch_size, (len(corpus.train) - 1) // corpus.chunk))
    h = None
    losses = []
    weights = []
    for batch in charlm_batches(corpus.train, corpus.vocab_size, streams, corpus.chunk):
        model, adam, loss, h = _update(model, adam, batch, clip_norm, h)
        losses.append(loss)
        weights.append(batch.length)
    return model, adam, float(np.average(losses, weights=weights)), len(losses)


@dataclass(frozen=True)
class TrainResult:
    """学習の結果。"""

    record: RunRecord
    model: RnnModel
    optimizer: AdamState
    data: TaskData
    scheduler: PlateauScheduler | None = None

    @property
    def failed(self) -> bool:
        return self.record.status == STATUS_FAILED

    def checkpoint(self) -> Checkpoint:
        final = self.record.final
        return Checkpoint(
            model=self.model,
            config=self.record.config,
            epoch=final.epoch,
            iteration=final.iteration,
            optimizer=self.optimizer,
            scheduler=self.scheduler,
            metrics={"accuracy": final.accuracy, "bpc": final.bpc},
        )


def epoch_count(config: RunConfig) -> int:
    """記録行の数（epoch 0 を除く）。"""
    cfg = config.resolved()
    if cfg.task is TaskId.COPY:
        return math.ceil(cfg.iterations / cfg.eval_interval)
    return cfg.epochs


def _mle_at(model: RnnModel, stream: RngStream, epoch: int) -> float:
    try:
        return mle_snapshot(model, stream.child(2, epoch), seeds=LYAP_SEEDS)
    except NumericalError as e:
        logger.warning("MLE snapshot at epoch %d failed: %s", epoch, e)
        return float("nan")


def _row(
    epoch: int,
    iteration: int,
    train_loss: float,
    model: RnnModel,
    data: TaskData,
    lr: float,
    cfg: RunConfig,
    stream: RngStream,
) -> EpochRow:
    result = evaluate(model, data)
    gain, saturation = shape_snapshot(model)
    mle = None
    if cfg.mle_every and epoch % cfg.mle_every == 0:
        mle = _mle_at(model, stream, epoch)
    return EpochRow(
        epoch=epoch,
        iteration=iteration,
        train_loss=train_loss,
        accuracy=result.accuracy,
        bpc=result.bpc,
        lr=lr,
        gain=gain,
        saturation=saturation,
        mle=mle,
    )


def initial_model(config: RunConfig, data: TaskData) -> RnnModel:
    """設定のシードから初期モデルを作る。"""
    cfg = config.resolved()
    shape = ShapeParams.create(cfg.gain, cfg.saturation, cfg.scenario, cfg.hidden_size)
    return init_model(
        data.input_size,
        cfg.hidden_size,
        data.output_size,
        shape,
        RngStream(cfg.seed, (0,)),
        input_scheme=INPUT_INIT[cfg.task],
        orthogonal_scheme=cfg.orthogonal,
    )


def _restore(
    resume: Checkpoint, cfg: RunConfig, data: TaskData
) -> tuple[RnnModel, AdamState, PlateauScheduler | None]:
    model = resume.model
    adam = resume.optimizer
    if adam is None:
        raise ConfigError("checkpoint has no optimizer state to resume from")
    if model.scenario is not cfg.scenario:
        raise ConfigError(
            f"checkpoint scenario {model.scenario.value} does not match "
            f"configured scenario {cfg.scenario.value}"
        )
    if adam.trainable != trainable_names(cfg.scenario):
        raise ConfigError(f"checkpoint optimizer trains {adam.trainable}")
    check_model(model, cfg, data)
    scheduler = resume.scheduler
    if cfg.scheduler and scheduler is None:
        scheduler = PlateauScheduler(adam.lr)
    return model, adam, scheduler if cfg.scheduler else None


def train_run(
    config: RunConfig,
    data: TaskData | None = None,
    on_epoch: Callable[[EpochRow], None] | None = None,
    resume: Checkpoint | None = None,
    previous: RunRecord | None = None,
) -> TrainResult:
    """設定に従って 1 回の学習を行う。

    数値エラー（非有限な損失など）が起きた場合は学習を打ち切り、
    それまでの記録を status=failed として返す。
    resume を与えると、そのチェックポイントのモデル・Adam・スケジューラの状態から
    resume.epoch + 1 エポック目以降を学習する。各エポックの乱数はエポック番号から
    決まるので、途中から再開した学習は最初から通した学習と一致する。

    Args:
        config: 学習設定
        data: 用意済みのタスクデータ（省略時は設定から読み込む）
        on_epoch: 各行の記録後に呼ばれるコールバック
        resume: 再開元のチェックポイント
        previous: 再開元までの記録（その行を引き継ぐ）

    Returns:
        学習結果

    Raises:
        ConfigError: 設定が不正、または再開元が設定と合わない場合（計算の前に検出）
        DimensionError: 再開元のモデルの次元がタスクと合わない場合
    """
    cfg = config.validate().resolved()
    data = data or prepare_task(cfg)
    stream = RngStream(cfg.seed)
    total = epoch_count(cfg)
    if resume is None:
        model = initial_model(cfg, data)
        adam = AdamState.create(model, cfg.learning_rate, trainable_names(cfg.scenario))
        scheduler = PlateauScheduler(cfg.learning_rate) if cfg.scheduler else None
        start, iteration = 1, 0
    else:
        model, adam, scheduler = _restore(resume, cfg, data)
        start, iteration = resume.epoch + 1, resume.iteration
        if start > total + 1:
            raise ConfigError(
                f"checkpoint is at epoch {resume.epoch}, beyond the configured {total}"
            )
    record = RunRecord(config=cfg.to_dict())
    if previous is not None:
        record.rows = [row for row in previous.rows if row.epoch < start]
    logger.info(
        "training %s (%s, n=%s, s=%s, N=%d) for epochs %d..%d",
        cfg.task.value,
        cfg.scenario.value,
        cfg.gain,
        cfg.saturation,
        cfg.hidden_size,
        start,
        total,
    )

    try:
        if resume is None:
            record.add(_row(0, 0, float("nan"), model, data, adam.lr, cfg, stream))
            if on_epoch is not None:
                on_epoch(record.final)
        for epoch in range(start, total + 1):
            lr = adam.lr
            gen = stream.child(1, epoch).generator()
            if cfg.task is TaskId.COPY:
                steps = min(cfg.eval_interval, cfg.iterations - iteration)
                model, adam, loss = copy_interval(
                    model, adam, data.copy, gen, steps, cfg.clip_norm
                )
            elif cfg.task is TaskId.DIGITS:
                model, adam, loss, steps = digits_epoch(
                    model, adam, data.train, cfg.batch_size, gen, cfg.clip_norm
                )
            else:
                model, adam, loss, steps = charlm_epoch(
                    model, adam, data.corpus, cfg.batch_size, cfg.clip_norm
                )
            iteration += steps
            row = _row(epoch, iteration, loss, model, data, lr, cfg, stream)
            record.add(row)
            if scheduler is not None:
                scheduler, new_lr = plateau_update(scheduler, row.bpc)
                adam = adam.with_lr(new_lr)
            logger.info(
                "epoch %d: loss %.4f, accuracy %.4f, bpc %.4f",
                epoch,
                loss,
                row.accuracy,
                row.bpc,
            )
            if on_epoch is not None:
                on_epoch(row)
    except NumericalError as e:
        record.status = STATUS_FAILED
        record.failure = str(e)
        logger.error("run aborted: %s", e)
        if not record.rows:
            raise
        return TrainResult(record, model, adam, data, scheduler)

    record.status = STATUS_COMPLETED
    return TrainResult(record, model, adam, data, scheduler)


def resume_run(
    directory: Path | str,
    config: RunConfig | None = None,
    data: TaskData | None = None,
    on_epoch: Callable[[EpochRow], None] | None = None,
) -> TrainResult:
    """実行ディレクトリのチェックポイントから学習を続ける。

    Args:
        directory: save_run で書き出した実行ディレクトリ
        config: 続きの学習設定（省略時は directory の config.json。
            epochs / iterations を増やして学習を延長する）
        data: 用意済みのタスクデータ
        on_epoch: 各行の記録後に呼ばれるコールバック

    Raises:
        ConfigError: 失敗した実行、または記録とチェックポイントが食い違う場合
        FormatError: チェックポイントや記録の形式が不正な場合
        OSError: ファイルを読めない場合
    """
    directory = Path(directory)
    record = load_record(directory)
    if record.status == STATUS_FAILED:
        raise ConfigError(f"run in {directory} failed and cannot be resumed")
    checkpoint = load_checkpoint(directory / CHECKPOINT_FILE)
    if checkpoint.epoch != record.final.epoch:
        raise ConfigError(
            f"checkpoint epoch {checkpoint.epoch} does not match "
            f"record epoch {record.final.epoch} in {directory}"
        )
    if config is None:
        config = RunConfig.from_json(directory / CONFIG_FILE)
    logger.info("resuming %s from epoch %d", directory, checkpoint.epoch)
    return train_run(config, data, on_epoch, resume=checkpoint, previous=record)


def save_run(result: TrainResult, directory: Path | str) -> Path:
    """実行ディレクトリに設定・記録・CSV・チェックポイントを書き出す。

    Returns:
        実行ディレクトリのパス
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    record = result.record
    (directory / CONFIG_FILE).write_text(
        RunConfig.from_dict(record.config).to_json(), encoding="utf-8"
    )
    write_json(directory / RECORD_FILE, record.to_dict())
    write_table(directory / EPOCHS_FILE, EPOCH_COLUMNS, record.epoch_table())
    write_table(directory / SHAPE_FILE, SHAPE_COLUMNS, record.shape_table())
    save_checkpoint(result.checkpoint(), directory / CHECKPOINT_FILE)
    return directory


def load_record(path: Path | str) -> RunRecord:
    """record.json（または実行ディレクトリ）から記録を読み込む。"""
    path = Path(path)
    if path.is_dir():
        path = path / RECORD_FILE
    return RunRecord.from_dict(read_json(path))


def cell_name(gain: float, saturation: float, seed: int) -> str:
    """格子セルの実行ディレクトリ名。"""
    return f"n{gain:g}_s{saturation:g}_seed{seed}"


def _trainperf_cell(
    config: RunConfig,
    cells_dir: str | None,
    gain: float,
    saturation: float,
    stream: RngStream,
    seed: int,
) -> float:
    cfg = config.with_overrides(
        gain=gain, saturation=saturation, scenario=Scenario.STATIC, seed=stream.seed + seed
    )
    result = train_run(cfg)
    if cells_dir is not None:
        save_run(result, Path(cells_dir) / cell_name(gain, saturation, seed))
    if result.failed:
        raise NumericalError(result.record.failure)
    return result.record.final.accuracy


def trainperf_grid(
    grid: GridSpec,
    config: RunConfig,
    cells_dir: Path | str | None = None,
    workers: int = 1,
    on_done: Callable[[int], None] | None = None,
) -> GridTable:
    """格子の各セルで Static モデルを学習し、最終正解率の表を作る。

    セル (n, s) のシード k の学習は config に gain=n, saturation=s,
    seed=base_seed+k を上書きした単独の学習と同じになる。

    Args:
        grid: 格子
        config: セル共通の学習設定
        cells_dir: セルごとの実行ディレクトリを書き出す親ディレクトリ
        workers: 並列ワーカー数
        on_done: 進捗コールバック
    """
    config.validate()
    cell_fn = partial(
        _trainperf_cell, config, None if cells_dir is None else str(cells_dir)
    )
    return scan_grid(grid, cell_fn, Measure.TRAIN_PERF, workers=workers, on_done=on_done)
