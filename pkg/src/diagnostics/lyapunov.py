"""Lyapunov スペクトルの QR 法による推定。

入力ゼロの自律系 h_{t+1} = γ(W_rec·h_t + b) に沿って正規直交フレームを
ヤコビアンで押し進め、毎ステップ対角非負の QR 分解で直交化し直す。
指数は burn-in 後の窓での ln R_ii の平均（単位: nats/step）。
"""

import logging
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from src.config.constants import LYAP_BURN_IN, LYAP_CONVERGENCE_TOL, LYAP_H0_RANGE, LYAP_STEPS
from src.config.errors import NonFiniteError, SingularMatrixError
from src.core.linalg import RngStream, as_generator, qr_pos
from src.core.rnn import RnnModel, jacobian_at, step

logger = logging.getLogger(__name__)


class StepMap(Protocol):
    """離散力学系 h ↦ F(h) とそのヤコビアン。"""

    size: int

    def step(self, h: np.ndarray) -> np.ndarray: ...

    def jacobian(self, h: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class RnnStepMap:
    """入力ゼロの RNN 状態更新。"""

    model: RnnModel

    @property
    def size(self) -> int:
        return self.model.hidden_size

    def step(self, h: np.ndarray) -> np.ndarray:
        return step(self.model, h)

    def jacobian(self, h: np.ndarray) -> np.ndarray:
        return jacobian_at(self.model, h)


@dataclass(frozen=True)
class LinearStepMap:
    """線形系 h ↦ A·h（γ を恒等写像に置き換えた検証用の系）。"""

    matrix: np.ndarray

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def step(self, h: np.ndarray) -> np.ndarray:
        return self.matrix @ h

    def jacobian(self, h: np.ndarray) -> np.ndarray:
        return self.matrix


@dataclass(frozen=True)
class LyapunovSpectrum:
    """Lyapunov 指数の推定結果。

    Attributes:
        exponents: 降順の指数 λ_1 ≥ … ≥ λ_count
        steps: 平均に使ったステップ数
        burn_in: 捨てたステップ数
        running: (steps, count) 各ステップまでの累積平均
        converged: 後半 1/4 窓の平均と全体平均の差が許容内か
    """

    exponents: np.ndarray
    steps: int
    burn_in: int
    running: np.ndarray
    converged: bool

    @property
    def maximal(self) -> float:
        """最大 Lyapunov 指数（MLE）。"""
        return float(self.exponents[0])


def lyapunov_spectrum(
    system: RnnModel | StepMap,
    h0: np.ndarray,
    burn_in: int = LYAP_BURN_IN,
    steps: int = LYAP_STEPS,
    count: int | None = None,
    frame: np.ndarray | None = None,
    tol: float = LYAP_CONVERGENCE_TOL,
) -> LyapunovSpectrum:
    """QR 法で Lyapunov スペクトルの上位 count 個を推定する。

    Args:
        system: RNN モデル（入力ゼロで反復）または任意の StepMap
        h0: 初期状態
        burn_in: 平均に含めない初期ステップ数
        steps: 平均に使うステップ数（1 以上）
        count: 推定する指数の数（省略時は全次元）
        frame: 初期正規直交フレーム (N, count)。省略時は単位行列の先頭 count 列
        tol: 収束判定の許容差

    Returns:
        推定結果

    Raises:
        ValueError: count が次元を超える、または steps < 1 の場合
        SingularMatrixError: フレームがランク落ちした場合（ステップ番号付き）
        NonFiniteError: 軌道が発散した場合
    """
    step_map = RnnStepMap(system) if isinstance(system, RnnModel) else system
    size = step_map.size
    count = size if count is None else count
    if not 1 <= count <= size:
        raise ValueError(f"count must be between 1 and {size}, got {count}")
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    if burn_in < 0:
        raise ValueError(f"burn_in must be >= 0, got {burn_in}")

    q = np.eye(size)[:, :count] if frame is None else np.asarray(frame, dtype=np.float64)
    h = np.asarray(h0, dtype=np.float64)
    logs = np.empty((steps, count))
    for t in range(burn_in + steps):
        try:
            q, r = qr_pos(step_map.jacobian(h) @ q)
        except SingularMatrixError as e:
            raise SingularMatrixError(e.index, e.value, step=t) from None
        h = step_map.step(h)
        if not np.all(np.isfinite(h)):
            raise NonFiniteError("trajectory", step=t)
        if t >= burn_in:
            logs[t - burn_in] = np.log(np.diag(r))

    running = np.cumsum(logs, axis=0) / np.arange(1, steps + 1)[:, None]
    exponents = running[-1]
    order = np.argsort(-exponents, kind="stable")
    tail = logs[steps - max(1, steps // 4) :].mean(axis=0)
    converged = bool(np.all(np.abs(tail - exponents) < tol))
    if not converged:
        logger.warning("Lyapunov estimate not converged after %d steps", steps)
    return LyapunovSpectrum(
        exponents=exponents[order],
        steps=steps,
        burn_in=burn_in,
        running=running[:, order],
        converged=converged,
    )


def random_initial_state(
    size: int, rng: RngStream | np.random.Generator, spread: float = LYAP_H0_RANGE
) -> np.ndarray:
    """h0 ~ U(−spread, spread)^size。"""
    return as_generator(rng).uniform(-spread, spread, size)


def mle_snapshot(
    model: RnnModel,
    rng: RngStream | np.random.Generator,
    seeds: int = 1,
    burn_in: int = LYAP_BURN_IN,
    steps: int = LYAP_STEPS,
) -> float:
    """ランダムな初期状態 seeds 個で MLE を推定し平均する。"""
    gen = as_generator(rng)
    values = [
        lyapunov_spectrum(
            model,
            random_initial_state(model.hidden_size, gen),
            burn_in=burn_in,
            steps=steps,
            count=1,
        ).maximal
        for _ in range(seeds)
    ]
    return float(np.mean(values))
