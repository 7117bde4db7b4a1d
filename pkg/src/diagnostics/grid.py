"""形状パラメータ (n, s) 格子上の走査。

格子の各セル・各シードは独立したジョブとして扱い、ジョブごとに
RngStream(base_seed, (セル番号, シード番号)) から乱数を得る。
結果はワーカー数や完了順に依らずジョブ順に並べ直す。
"""

import logging
from collections.abc import Callable
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass
from functools import partial

import numpy as np

from src.config.constants import (
    JN_SAMPLES,
    LYAP_BURN_IN,
    LYAP_SEEDS,
    LYAP_STEPS,
    MI_HORIZON,
    MI_NEIGHBORS,
    MI_SAMPLES,
    InitScheme,
    Measure,
    NormKind,
    OrthogonalScheme,
    Scenario,
)
from src.config.errors import NumericalError
from src.config.settings import GridSpec
from src.core.activation import ShapeParams
from src.core.linalg import RngStream
from src.core.rnn import RnnModel, forward, init_model
from src.diagnostics.jacobian import mean_jacobian_norm
from src.diagnostics.lyapunov import mle_snapshot
from src.diagnostics.mutual_info import informative_columns, mi_mixture, mi_window_pairs
from src.tasks.sources import InputSource

logger = logging.getLogger(__name__)

STATUS_OK = "ok"
STATUS_FAILED = "failed"

# (gain, saturation, 乱数ストリーム, シード番号) -> 測定値
CellFn = Callable[[float, float, RngStream, int], float]
# (hidden_size, gain, saturation, gen, input_size=1) -> 未学習モデル
ModelFactory = Callable[..., RnnModel]


@dataclass(frozen=True)
class GridRow:
    """1 セル・1 シードの測定値。"""

    gain: float
    saturation: float
    seed: int
    value: float
    status: str = STATUS_OK


@dataclass(frozen=True)
class GridCell:
    """シード方向に集約した 1 セルの値。"""

    gain: float
    saturation: float
    mean: float
    std: float
    count: int


@dataclass(frozen=True)
class GridTable:
    """格子走査の結果（行は gain 優先・シード最内の順）。"""

    measure: Measure
    rows: tuple[GridRow, ...]

    @property
    def failures(self) -> int:
        return sum(row.status != STATUS_OK for row in self.rows)

    def aggregate(self) -> list[GridCell]:
        """成功したシードの平均と標準偏差をセルごとに求める。

        全シードが失敗したセルは mean・std とも NaN、count は 0。
        """
        cells: dict[tuple[float, float], list[float]] = {}
        for row in self.rows:
            bucket = cells.setdefault((row.gain, row.saturation), [])
            if row.status == STATUS_OK:
                bucket.append(row.value)
        result = []
        for (gain, saturation), values in cells.items():
            if values:
                arr = np.asarray(values)
                result.append(
                    GridCell(gain, saturation, float(arr.mean()), float(arr.std()), len(values))
                )
            else:
                result.append(GridCell(gain, saturation, float("nan"), float("nan"), 0))
        return result

    def value_at(self, gain: float, saturation: float) -> float:
        """セルの平均値。"""
        for cell in self.aggregate():
            if cell.gain == gain and cell.saturation == saturation:
                return cell.mean
        raise KeyError(f"no cell at gain={gain}, saturation={saturation}")


def random_model(
    hidden_size: int,
    gain: float,
    saturation: float,
    gen: np.random.Generator,
    input_size: int = 1,
    orthogonal: OrthogonalScheme = OrthogonalScheme.QR_GAUSSIAN,
) -> RnnModel:
    """直交初期化した未学習の Static モデル。"""
    shape = ShapeParams.create(gain, saturation, Scenario.STATIC, hidden_size)
    return init_model(
        input_size,
        hidden_size,
        1,
        shape,
        gen,
        input_scheme=InitScheme.GLOROT_NORMAL,
        orthogonal_scheme=orthogonal,
    )


def _run_job(
    cell_fn: CellFn, base_seed: int, job: tuple[int, float, float, int]
) -> tuple[float, str]:
    index, gain, saturation, seed = job
    stream = RngStream(base_seed, (index, seed))
    try:
        return float(cell_fn(gain, saturation, stream, seed)), STATUS_OK
    except NumericalError as e:
        logger.warning("cell (n=%s, s=%s, seed=%d) failed: %s", gain, saturation, seed, e)
        return float("nan"), STATUS_FAILED


def scan_grid(
    grid: GridSpec,
    cell_fn: CellFn,
    measure: Measure,
    workers: int = 1,
    on_done: Callable[[int], None] | None = None,
) -> GridTable:
    """格子の全セル・全シードで cell_fn を評価する。

    1 つのセルの数値エラーは他のセルを止めず、そのセルの行を失敗として記録する。

    Args:
        grid: 格子
        cell_fn: セル関数（workers > 1 ではピクル可能であること）
        measure: 記録する測定の種類
        workers: 並列ワーカー数（1 で逐次実行）
        on_done: ジョブ完了ごとに完了数を受け取るコールバック

    Returns:
        ジョブ順に並べた結果
    """
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    jobs = [
        (index, gain, saturation, seed)
        for index, (gain, saturation) in enumerate(grid.cells)
        for seed in range(grid.seeds)
    ]
    run = partial(_run_job, cell_fn, grid.base_seed)
    results: list[tuple[float, str] | None] = [None] * len(jobs)
    if workers == 1:
        for position, job in enumerate(jobs):
            results[position] = run(job)
            if on_done is not None:
                on_done(position + 1)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(run, job): position for position, job in enumerate(jobs)}
            for done, future in enumerate(as_completed(futures), start=1):
                results[futures[future]] = future.result()
                if on_done is not None:
                    on_done(done)

    rows = tuple(
        GridRow(gain, saturation, seed, value, status)
        for (_, gain, saturation, seed), (value, status) in zip(jobs, results, strict=True)
    )
    logger.info(
        "%s grid: %d cells x %d seeds, %d failed",
        measure.value,
        len(grid.cells),
        grid.seeds,
        sum(row.status != STATUS_OK for row in rows),
    )
    return GridTable(measure, rows)


def _jn_cell(
    hidden_size: int,
    samples: int,
    norm: NormKind,
    model_factory: ModelFactory,
    gain: float,
    saturation: float,
    stream: RngStream,
    seed: int,
) -> float:
    gen = stream.generator()
    model = model_factory(hidden_size, gain, saturation, gen)
    return mean_jacobian_norm(model, samples, gen, norm=norm)


def _mle_cell(
    hidden_size: int,
    lyap_seeds: int,
    burn_in: int,
    steps: int,
    model_factory: ModelFactory,
    gain: float,
    saturation: float,
    stream: RngStream,
    seed: int,
) -> float:
    gen = stream.generator()
    model = model_factory(hidden_size, gain, saturation, gen)
    return mle_snapshot(model, gen, seeds=lyap_seeds, burn_in=burn_in, steps=steps)


def stability_grid(
    grid: GridSpec,
    hidden_size: int,
    measure: Measure,
    samples: int = JN_SAMPLES,
    norm: NormKind = NormKind.OPERATOR,
    lyap_seeds: int = LYAP_SEEDS,
    burn_in: int = LYAP_BURN_IN,
    steps: int = LYAP_STEPS,
    model_factory: ModelFactory = random_model,
    workers: int = 1,
    on_done: Callable[[int], None] | None = None,
) -> GridTable:
    """ランダム直交初期化モデルでの JN または MLE の格子。

    Args:
        grid: 格子
        hidden_size: 隠れ層サイズ N
        measure: Measure.JN または Measure.MLE
        samples: JN のサンプル数
        norm: JN のノルムの種類
        lyap_seeds: MLE を平均する初期状態の数
        burn_in: MLE の burn-in
        steps: MLE の平均ステップ数
        model_factory: モデルの生成関数
        workers: 並列ワーカー数
        on_done: 進捗コールバック

    Returns:
        格子走査の結果
    """
    if hidden_size < 1:
        raise ValueError(f"hidden_size must be >= 1, got {hidden_size}")
    if measure is Measure.JN:
        cell_fn = partial(_jn_cell, hidden_size, samples, norm, model_factory)
    elif measure is Measure.MLE:
        cell_fn = partial(_mle_cell, hidden_size, lyap_seeds, burn_in, steps, model_factory)
    else:
        raise ValueError(f"stability grid supports jn and mle, got {measure.value}")
    return scan_grid(grid, cell_fn, measure, workers=workers, on_done=on_done)


def _mi_cell(
    source: InputSource,
    hidden_size: int,
    samples: int,
    k: int,
    window: int,
    horizon: int,
    model_factory: ModelFactory,
    gain: float,
    saturation: float,
    stream: RngStream,
    seed: int,
) -> float:
    gen = stream.generator()
    model = model_factory(hidden_size, gain, saturation, gen, input_size=source.input_size)
    values, inputs = source.draw(gen, samples)
    length = min(source.length, horizon)
    values, inputs = values[:, :length], inputs[:, :length]
    trace = forward(model, inputs)
    times = gen.integers(max(length // 2, window - 1), length, size=samples)
    xs, hs = mi_window_pairs(
        values,
        trace.hidden_states,
        times,
        window=window,
        discrete=source.discrete,
        symbols=source.input_size,
    )
    hs = informative_columns(hs)
    # 定数の入力窓・定数の隠れ状態は情報を運ばない
    if hs.shape[1] == 0 or np.ptp(xs, axis=0).max() == 0:
        return 0.0
    return mi_mixture(xs, hs, k=k).value


def mi_landscape(
    grid: GridSpec,
    source: InputSource,
    hidden_size: int,
    samples: int = MI_SAMPLES,
    k: int = MI_NEIGHBORS,
    window: int = 1,
    horizon: int = MI_HORIZON,
    model_factory: ModelFactory = random_model,
    workers: int = 1,
    on_done: Callable[[int], None] | None = None,
) -> GridTable:
    """未学習モデルをタスク分布の入力で駆動し、I(X; H_t) の格子を求める。

    各サンプルは独立な系列から後半の時刻 t を一様に選び、(入力窓, h_t) の組とする。
    分散ゼロの隠れユニットは推定から除き、残らなければ 0 とする。

    Args:
        grid: 格子
        source: 入力分布
        hidden_size: 隠れ層サイズ
        samples: 推定に使う組の数
        k: 近傍数
        window: 1 で x_t、2 で (x_{t−1}, x_t)
        horizon: 駆動する最大ステップ数
        model_factory: モデルの生成関数
        workers: 並列ワーカー数
        on_done: 進捗コールバック

    Returns:
        格子走査の結果（値は 0 でクランプした nats）
    """
    if samples <= k:
        raise ValueError(f"samples must exceed k={k}, got {samples}")
    if min(source.length, horizon) < window:
        raise ValueError(f"sequences shorter than window {window}")
    cell_fn = partial(
        _mi_cell, source, hidden_size, samples, k, window, horizon, model_factory
    )
    return scan_grid(grid, cell_fn, Measure.MI, workers=workers, on_done=on_done)
