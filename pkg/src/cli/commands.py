"""CLIコマンド定義モジュール。

typer + rich で学習・格子走査・転移・評価のコマンドを提供する。
終了コードは 0（成功）、1（設定エラー）、2（数値エラー）。
"""

from functools import partial
from pathlib import Path
from typing import Annotated, NoReturn

import numpy as np
import typer
from rich.console import Console
from rich.progress import BarColumn, Progress, SpinnerColumn, TextColumn
from rich.table import Table

from src import __version__
from src.config.constants import (
    BATCH_SIZE,
    CHARLM_FALLBACK_VOCAB,
    EXIT_CONFIG,
    EXIT_NUMERICAL,
    GRID_GAINS,
    GRID_SATURATIONS,
    JN_SAMPLES,
    LEARNING_RATE_DESK,
    MI_HORIZON,
    MI_NEIGHBORS,
    MI_SAMPLES,
    TRANSFER_ROTATION_DEG,
    Measure,
    NormKind,
    OrthogonalScheme,
    Scenario,
    TaskId,
)
from src.config.errors import ConfigError, GammaRnnError, NumericalError
from src.config.settings import GridSpec, RunConfig
from src.diagnostics.grid import GridTable, mi_landscape, random_model, stability_grid
from src.tasks.charlm import load_corpus
from src.tasks.copy import CopyConfig
from src.tasks.digits import load_digit_splits
from src.tasks.sources import InputSource, PixelSource, SymbolSource
from src.training.summary import epochs_to_target, summarize
from src.training.trainer import (
    CHECKPOINT_FILE,
    CONFIG_FILE,
    EpochRow,
    check_model,
    epoch_count,
    evaluate,
    load_record,
    prepare_task,
    resume_run,
    save_run,
    train_run,
    trainperf_grid,
)
from src.training.transfer import run_transfer
from src.utils.checkpoint import (
    Checkpoint,
    get_checkpoint_info,
    load_checkpoint,
    save_checkpoint,
)
from src.utils.log import setup_logging
from src.utils.tables import write_json, write_table

app = typer.Typer(
    name="gamma-rnn",
    help="適応型活性化関数 γ(n, s) を持つ RNN の学習・診断 CLI ツール",
    add_completion=False,
)

console = Console()

# デフォルト出力ディレクトリ
DEFAULT_OUTPUT_DIR = Path("./runs")

GRID_COLUMNS = ("gain", "saturation", "seed", "value", "status")
GRID_SUMMARY_COLUMNS = ("gain", "saturation", "mean", "std")


def _fail(error: Exception) -> NoReturn:
    """エラーを表示し、種類に応じた終了コードで終了する。"""
    code = EXIT_NUMERICAL if isinstance(error, NumericalError) else EXIT_CONFIG
    console.print(f"[red]Error:[/red] {error}")
    raise typer.Exit(code=code) from None


def _parse_floats(text: str | None) -> tuple[float, ...] | None:
    if text is None:
        return None
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {text}") from None


def _load_config(config: Path | None) -> RunConfig:
    return RunConfig() if config is None else RunConfig.from_json(config)


def _orthogonal_scheme(text: str) -> OrthogonalScheme:
    try:
        return OrthogonalScheme(text.lower())
    except ValueError:
        raise ConfigError(f"unknown orthogonal scheme: {text}") from None


def _progress() -> Progress:
    return Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        TextColumn("{task.completed}/{task.total}"),
        console=console,
    )


ConfigOption = Annotated[
    Path | None, typer.Option("--config", "-c", help="設定 JSON ファイル")
]
OutputOption = Annotated[Path, typer.Option("--output-dir", "-o", help="出力ディレクトリ")]


@app.command()
def train(
    config: ConfigOption = None,
    task: Annotated[
        str | None, typer.Option("--task", "-t", help=f"タスク: {', '.join(TaskId.list_all())}")
    ] = None,
    scenario: Annotated[
        str | None,
        typer.Option(help=f"適応シナリオ: {', '.join(Scenario.list_all())}"),
    ] = None,
    gain: Annotated[float | None, typer.Option("--gain", "-n", help="初期 gain n")] = None,
    saturation: Annotated[
        float | None, typer.Option("--saturation", "-s", help="初期 saturation s")
    ] = None,
    seed: Annotated[int | None, typer.Option(help="乱数シード")] = None,
    hidden: Annotated[int | None, typer.Option(help="隠れ層サイズ")] = None,
    lr: Annotated[float | None, typer.Option(help="学習率")] = None,
    epochs: Annotated[int | None, typer.Option(help="エポック数（digits / charlm）")] = None,
    iterations: Annotated[int | None, typer.Option(help="反復回数（copy）")] = None,
    eval_interval: Annotated[
        int | None, typer.Option(help="copy の評価間隔（反復）")
    ] = None,
    batch_size: Annotated[int | None, typer.Option(help="バッチサイズ")] = None,
    delay: Annotated[int | None, typer.Option(help="copy の待機ステップ数")] = None,
    data_dir: Annotated[str | None, typer.Option(help="IDX データのディレクトリ")] = None,
    corpus: Annotated[str | None, typer.Option(help="文字 LM のコーパス")] = None,
    scheduler: Annotated[
        bool | None, typer.Option("--scheduler/--no-scheduler", help="学習率スケジューラ")
    ] = None,
    clip_norm: Annotated[float | None, typer.Option(help="勾配クリッピングの上限")] = None,
    mle_every: Annotated[
        int | None, typer.Option(help="MLE スナップショットの間隔（エポック）")
    ] = None,
    full_scale: Annotated[
        bool | None,
        typer.Option("--full-scale", "--paper-scale", help="本番規模の既定値を使う"),
    ] = None,
    resume: Annotated[
        Path | None,
        typer.Option("--resume", help="この実行ディレクトリのチェックポイントから再開する"),
    ] = None,
    output_dir: Annotated[
        Path | None, typer.Option("--output-dir", "-o", help="出力ディレクトリ")
    ] = None,
) -> None:
    """1 回の学習を実行し、記録とチェックポイントを書き出す。

    --resume では保存された設定（-c があればそちら）にオプションを上書きし、
    epochs / iterations を増やした分だけ学習を続ける。出力先の既定は再開元。
    """
    if resume is not None and output_dir is None:
        output_dir = resume
    try:
        base = (
            RunConfig.from_json(resume / CONFIG_FILE)
            if resume is not None and config is None
            else _load_config(config)
        )
        cfg = (
            base.with_overrides(
                task=task,
                scenario=scenario,
                gain=gain,
                saturation=saturation,
                seed=seed,
                hidden_size=hidden,
                learning_rate=lr,
                epochs=epochs,
                iterations=iterations,
                eval_interval=eval_interval,
                batch_size=batch_size,
                copy_delay=delay,
                data_dir=data_dir,
                corpus=corpus,
                scheduler=scheduler,
                clip_norm=clip_norm,
                mle_every=mle_every,
                full_scale=full_scale,
                output_dir=None if output_dir is None else str(output_dir),
            )
            .validate()
            .resolved()
        )
        data = prepare_task(cfg)
    except (GammaRnnError, OSError) as e:
        _fail(e)

    console.print(
        f"[bold]学習:[/bold] {cfg.task.value} / {cfg.scenario.value} "
        f"(n={cfg.gain}, s={cfg.saturation}, N={cfg.hidden_size}, seed={cfg.seed})"
    )
    with _progress() as progress:
        bar = progress.add_task("学習中...", total=epoch_count(cfg) + 1)

        def advance(row: EpochRow) -> None:
            progress.update(
                bar,
                completed=row.epoch + 1,
                description=f"epoch {row.epoch}: acc {row.accuracy:.3f}",
            )

        try:
            if resume is None:
                result = train_run(cfg, data, on_epoch=advance)
            else:
                result = resume_run(resume, cfg, data, on_epoch=advance)
        except (GammaRnnError, OSError) as e:
            _fail(e)

    run_dir = save_run(result, cfg.output_dir)
    final = result.record.final
    table = Table(title="最終評価")
    table.add_column("epoch", style="cyan")
    table.add_column("accuracy", style="white")
    table.add_column("bpc", style="white")
    table.add_row(str(final.epoch), f"{final.accuracy:.4f}", f"{final.bpc:.4f}")
    console.print(table)

    if result.failed:
        console.print(f"[red]Error:[/red] 学習を中断しました: {result.record.failure}")
        console.print(f"途中までの記録: {run_dir}")
        raise typer.Exit(code=EXIT_NUMERICAL)
    console.print(f"[green]✓[/green] {run_dir} に保存しました")


def _mi_source(cfg: RunConfig, horizon: int) -> InputSource:
    """タスクに対応する MI 用の入力分布。"""
    if cfg.task is TaskId.COPY:
        copy_cfg = CopyConfig(cfg.copy_alphabet, cfg.copy_payload, cfg.copy_delay)
        return SymbolSource(cfg.copy_alphabet, copy_cfg.width, horizon)
    if cfg.task is TaskId.DIGITS:
        train_set, _ = load_digit_splits(
            cfg.data_dir, cfg.downscale, cfg.permutation_seed, cfg.split_seed
        )
        return PixelSource(train_set)
    if cfg.corpus is None:
        return SymbolSource(CHARLM_FALLBACK_VOCAB, CHARLM_FALLBACK_VOCAB, horizon)
    split = load_corpus(cfg.corpus, cfg.chunk)
    counts = np.bincount(split.train, minlength=split.vocab_size)
    probabilities = tuple((counts / counts.sum()).tolist())
    return SymbolSource(split.vocab_size, split.vocab_size, horizon, probabilities)


def write_grid(table: GridTable, output_dir: Path) -> tuple[Path, Path]:
    """格子の行 CSV と集約 CSV を書き出す。"""
    name = table.measure.value
    rows = write_table(
        output_dir / f"grid_{name}.csv",
        GRID_COLUMNS,
        [(r.gain, r.saturation, r.seed, r.value, r.status) for r in table.rows],
    )
    summary = write_table(
        output_dir / f"grid_{name}_summary.csv",
        GRID_SUMMARY_COLUMNS,
        [(c.gain, c.saturation, c.mean, c.std) for c in table.aggregate()],
    )
    return rows, summary


@app.command()
def grid(
    measure: Annotated[
        str, typer.Argument(help=f"測定: {', '.join(Measure.list_all())}")
    ],
    config: ConfigOption = None,
    task: Annotated[
        str | None, typer.Option("--task", "-t", help="mi / trainperf のタスク")
    ] = None,
    hidden: Annotated[int, typer.Option(help="隠れ層サイズ（jn / mle / mi）")] = 64,
    gains: Annotated[
        str | None, typer.Option(help="gain の値（カンマ区切り、省略時は 17 点）")
    ] = None,
    saturations: Annotated[
        str | None, typer.Option(help="saturation の値（カンマ区切り、省略時は 5 点）")
    ] = None,
    seeds: Annotated[int, typer.Option(help="セルあたりのシード数")] = 1,
    base_seed: Annotated[int, typer.Option(help="基準シード")] = 0,
    samples: Annotated[
        int | None, typer.Option(help="サンプル数（jn / mi）")
    ] = None,
    norm: Annotated[
        str, typer.Option(help="JN のノルム: operator, frobenius")
    ] = NormKind.OPERATOR.value,
    k: Annotated[int, typer.Option("--k", help="MI の近傍数")] = MI_NEIGHBORS,
    window: Annotated[int, typer.Option(help="MI の入力窓（1 または 2）")] = 1,
    horizon: Annotated[int, typer.Option(help="MI の駆動ステップ数")] = MI_HORIZON,
    orthogonal: Annotated[
        str | None,
        typer.Option(
            help=f"再帰行列の直交初期化: {', '.join(s.value for s in OrthogonalScheme)}"
        ),
    ] = None,
    workers: Annotated[int, typer.Option("--workers", "-w", help="並列ワーカー数")] = 1,
    output_dir: OutputOption = DEFAULT_OUTPUT_DIR,
) -> None:
    """(n, s) 格子で JN・MLE・MI・学習性能を測定し CSV に書き出す。"""
    try:
        kind = Measure(measure.lower())
        norm_kind = NormKind(norm.lower())
    except ValueError:
        console.print(f"[red]Error:[/red] 不明な測定またはノルム: {measure}, {norm}")
        console.print(f"有効な測定: {', '.join(Measure.list_all())}")
        raise typer.Exit(code=EXIT_CONFIG) from None

    try:
        spec = GridSpec(
            _parse_floats(gains) or GRID_GAINS,
            _parse_floats(saturations) or GRID_SATURATIONS,
            seeds=seeds,
            base_seed=base_seed,
        )
        scheme = None if orthogonal is None else _orthogonal_scheme(orthogonal)
        cfg = _load_config(config).with_overrides(task=task, orthogonal=scheme)
    except GammaRnnError as e:
        _fail(e)
    factory = random_model if scheme is None else partial(random_model, orthogonal=scheme)

    total = len(spec.cells) * spec.seeds
    console.print(
        f"[bold]格子:[/bold] {kind.value}, {len(spec.gains)}×{len(spec.saturations)} "
        f"セル × {spec.seeds} シード"
    )
    with _progress() as progress:
        bar = progress.add_task(f"{kind.value} 測定中...", total=total)

        def done(count: int) -> None:
            progress.update(bar, completed=count)

        try:
            if kind in (Measure.JN, Measure.MLE):
                table = stability_grid(
                    spec,
                    hidden,
                    kind,
                    samples=samples or JN_SAMPLES,
                    norm=norm_kind,
                    model_factory=factory,
                    workers=workers,
                    on_done=done,
                )
            elif kind is Measure.MI:
                resolved = cfg.resolved()
                table = mi_landscape(
                    spec,
                    _mi_source(resolved, horizon),
                    hidden,
                    samples=samples or MI_SAMPLES,
                    k=k,
                    window=window,
                    horizon=horizon,
                    model_factory=factory,
                    workers=workers,
                    on_done=done,
                )
            else:
                table = trainperf_grid(
                    spec, cfg, cells_dir=output_dir / "cells", workers=workers, on_done=done
                )
        except (GammaRnnError, OSError, ValueError) as e:
            _fail(e)

    rows_path, summary_path = write_grid(table, output_dir)
    console.print(f"[green]✓[/green] {rows_path} を生成しました")
    console.print(f"[green]✓[/green] {summary_path} を生成しました")
    if table.failures:
        console.print(f"  [yellow]失敗したセル:[/yellow] {table.failures}")


@app.command()
def transfer(
    checkpoint: Annotated[Path, typer.Argument(help="Heterogeneous 数字タスクのチェックポイント")],
    degrees: Annotated[float, typer.Option(help="回転角（度）")] = TRANSFER_ROTATION_DEG,
    epochs: Annotated[int, typer.Option(help="再学習エポック数")] = 5,
    lr: Annotated[float, typer.Option(help="再学習の学習率")] = LEARNING_RATE_DESK,
    batch_size: Annotated[int, typer.Option(help="バッチサイズ")] = BATCH_SIZE,
    seed: Annotated[int, typer.Option(help="分割・シャッフルのシード")] = 0,
    data_dir: Annotated[str | None, typer.Option(help="IDX データのディレクトリ")] = None,
    min_accuracy: Annotated[
        float | None, typer.Option(help="元の正解率の下限（未満なら拒否）")
    ] = None,
    output_dir: OutputOption = DEFAULT_OUTPUT_DIR / "transfer",
) -> None:
    """重みを凍結し (n_i, s_i) だけを回転画像で再学習する。"""
    try:
        source = load_checkpoint(checkpoint)
    except (GammaRnnError, OSError) as e:
        _fail(e)

    with _progress() as progress:
        bar = progress.add_task("再学習中...", total=epochs + 1)
        try:
            result = run_transfer(
                source,
                degrees=degrees,
                epochs=epochs,
                learning_rate=lr,
                batch_size=batch_size,
                seed=seed,
                data_dir=data_dir,
                min_accuracy=min_accuracy,
                on_epoch=lambda _: progress.advance(bar),
            )
        except (GammaRnnError, OSError) as e:
            _fail(e)

    write_json(output_dir / "transfer.json", result.to_dict())
    write_table(
        output_dir / "transfer_spread.csv",
        ("epoch", "train_loss", "accuracy", "gain_std", "saturation_std"),
        result.spread_table(),
    )
    write_table(
        output_dir / "transfer_shape.csv",
        ("epoch", "neuron", "gain", "saturation"),
        result.trajectory_table(),
    )
    save_checkpoint(
        Checkpoint(
            model=result.model,
            config=source.config,
            epoch=source.epoch,
            metrics={
                "accuracy": result.post_accuracy,
                "retrain_lr": lr,
                "retrain_epochs": epochs,
            },
        ),
        output_dir / CHECKPOINT_FILE,
    )

    table = Table(title=f"転移 ({degrees:g}°)")
    table.add_column("段階", style="cyan")
    table.add_column("accuracy", style="white")
    table.add_row("元の画像", f"{result.original_accuracy:.4f}")
    table.add_row("回転・再学習前", f"{result.pre_accuracy:.4f}")
    table.add_row("回転・再学習後", f"{result.post_accuracy:.4f}")
    console.print(table)
    console.print(f"回復率: {result.recovered:.3f}")

    if result.status != "completed":
        console.print(f"[red]Error:[/red] 再学習を中断しました: {result.failure}")
        raise typer.Exit(code=EXIT_NUMERICAL)
    console.print(f"[green]✓[/green] {output_dir} に保存しました")


@app.command("eval")
def eval_checkpoint(
    checkpoint: Annotated[Path, typer.Argument(help="チェックポイント")],
    config: ConfigOption = None,
    hidden: Annotated[int | None, typer.Option(help="期待する隠れ層サイズ")] = None,
    split: Annotated[
        str, typer.Option(help="評価する分割（digits: test/train, charlm: test/valid）")
    ] = "test",
    data_dir: Annotated[str | None, typer.Option(help="IDX データのディレクトリ")] = None,
    corpus: Annotated[str | None, typer.Option(help="文字 LM のコーパス")] = None,
) -> None:
    """チェックポイントをタスクのデータで評価する。"""
    try:
        source = load_checkpoint(checkpoint)
        base = (
            RunConfig.from_dict(source.config)
            if config is None
            else RunConfig.from_json(config)
        )
        cfg = base.with_overrides(hidden_size=hidden, data_dir=data_dir, corpus=corpus)
        data = prepare_task(cfg)
        check_model(source.model, cfg, data)
        result = evaluate(source.model, data, split)
    except (GammaRnnError, OSError) as e:
        _fail(e)

    table = Table(title=f"評価: {checkpoint}")
    table.add_column("指標", style="cyan")
    table.add_column("値", style="white")
    table.add_row("accuracy", f"{result.accuracy:.6f}")
    table.add_row("bpc", f"{result.bpc:.6f}")
    table.add_row("loss", f"{result.loss:.6f}")
    table.add_row("count", str(result.count))
    console.print(table)


@app.command()
def info(
    checkpoint: Annotated[Path, typer.Argument(help="チェックポイント")],
) -> None:
    """チェックポイントのヘッダ情報を表示する。"""
    try:
        details = get_checkpoint_info(checkpoint)
    except (GammaRnnError, OSError) as e:
        _fail(e)

    table = Table(title=str(checkpoint))
    table.add_column("項目", style="cyan")
    table.add_column("値", style="white")
    for key, value in details.items():
        table.add_row(key, str(value))
    console.print(table)


@app.command("summarize")
def summarize_runs(
    run_dirs: Annotated[list[Path], typer.Argument(help="実行ディレクトリ")],
    bins: Annotated[int, typer.Option(help="最頻値のビン数")] = 20,
) -> None:
    """複数シードの記録を平均 ± 標準偏差で集計する。"""
    try:
        records = [load_record(path) for path in run_dirs]
        summary = summarize(records, bins)
    except (GammaRnnError, OSError, KeyError, ValueError) as e:
        _fail(e)

    table = Table(title="実行一覧")
    table.add_column("run", style="cyan")
    table.add_column("status", style="white")
    table.add_column("accuracy", style="white")
    table.add_column("bpc", style="white")
    table.add_column("epochs to 95%", style="white")
    for path, record in zip(run_dirs, records, strict=True):
        final = record.final
        table.add_row(
            str(path),
            record.status,
            f"{final.accuracy:.4f}",
            f"{final.bpc:.4f}",
            str(epochs_to_target(record)),
        )
    console.print(table)

    console.print()
    console.print("[bold]結果:[/bold]")
    console.print(f"  accuracy: {summary.accuracy_mean:.4f} ± {summary.accuracy_std:.4f}")
    console.print(f"  bpc: {summary.bpc_mean:.4f} ± {summary.bpc_std:.4f}")
    console.print(f"  最頻値: {summary.accuracy_mode:.4f}")
    console.print(f"  完了: {summary.completed}/{summary.runs}")


@app.callback(invoke_without_command=True)
def main(
    ctx: typer.Context,
    version: Annotated[
        bool | None,
        typer.Option(
            "--version",
            "-V",
            help="バージョンを表示",
            is_eager=True,
        ),
    ] = None,
    verbose: Annotated[
        bool,
        typer.Option(
            "--verbose",
            "-v",
            help="詳細ログ出力",
        ),
    ] = False,
) -> None:
    """適応型活性化関数 γ(n, s) を持つ RNN の学習・診断 CLI ツール。"""
    if version:
        console.print(f"gamma-rnn version {__version__}")
        raise typer.Exit()
    if ctx.invoked_subcommand is None:
        typer.echo(ctx.get_help())
        raise typer.Exit()
    setup_logging(verbose)
