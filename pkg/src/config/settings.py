"""実行設定モジュール。

RunConfig（学習・評価の設定）と GridSpec（形状パラメータの走査グリッド）を定義する。
設定ファイルは JSON で、CLI フラグによる上書きが常に優先される。
"""

import json
import os
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any
try:
    from typing import Self
except ImportError:  # Python < 3.11
    from typing_extensions import Self

from src.config.constants import (
    BATCH_SIZE,
    CHARLM_CHUNK,
    COPY_ALPHABET,
    COPY_DELAY_DESK,
    COPY_DELAY_FULL,
    COPY_EVAL_INTERVAL,
    COPY_ITERATIONS_DESK,
    COPY_ITERATIONS_FULL,
    COPY_PAYLOAD,
    DATA_DIR_ENV,
    EPOCHS_DESK,
    EPOCHS_FULL,
    GRID_GAINS,
    GRID_SATURATIONS,
    HIDDEN_DESK,
    HIDDEN_FULL,
    LEARNING_RATE_DESK,
    LEARNING_RATE_FULL,
    OrthogonalScheme,
    Scenario,
    TaskId,
)
from src.config.errors import ConfigError

_ENUM_FIELDS: dict[str, type] = {
    "task": TaskId,
    "scenario": Scenario,
    "orthogonal": OrthogonalScheme,
}


@dataclass(frozen=True)
class RunConfig:
    """1 回の学習・評価の設定。

    None のフィールドは resolved() でタスク既定値（机上規模または本番規模）に置き換わる。
    """

    task: TaskId = TaskId.COPY
    scenario: Scenario = Scenario.STATIC
    gain: float = 1.0
    saturation: float = 0.0
    hidden_size: int | None = None
    learning_rate: float | None = None
    scheduler: bool | None = None
    epochs: int | None = None
    iterations: int | None = None
    eval_interval: int = COPY_EVAL_INTERVAL
    batch_size: int = BATCH_SIZE
    seed: int = 0
    copy_alphabet: int = COPY_ALPHABET
    copy_payload: int = COPY_PAYLOAD
    copy_delay: int | None = None
    eval_size: int = 512
    data_dir: str | None = None
    downscale: int = 1
    permutation_seed: int = 0
    split_seed: int = 0
    corpus: str | None = None
    chunk: int = CHARLM_CHUNK
    clip_norm: float | None = None
    mle_every: int = 0
    orthogonal: OrthogonalScheme = OrthogonalScheme.QR_GAUSSIAN
    output_dir: str = "runs/default"
    full_scale: bool = False

    def resolved(self) -> Self:
        """未指定の値をタスク既定値で埋めた設定を返す。"""
        key = self.task.value
        full = self.full_scale
        hidden = HIDDEN_FULL[key] if full else HIDDEN_DESK[key]
        lr = LEARNING_RATE_FULL if full else LEARNING_RATE_DESK
        epochs = EPOCHS_FULL if full else EPOCHS_DESK
        iterations = COPY_ITERATIONS_FULL if full else COPY_ITERATIONS_DESK
        delay = COPY_DELAY_FULL if full else COPY_DELAY_DESK
        scheduler = full and self.task is TaskId.CHARLM
        data_dir = self.data_dir
        if data_dir is None and self.task is TaskId.DIGITS:
            data_dir = os.environ.get(DATA_DIR_ENV)
        return replace(
            self,
            hidden_size=self.hidden_size if self.hidden_size is not None else hidden,
            learning_rate=(
                self.learning_rate if self.learning_rate is not None else lr
            ),
            scheduler=self.scheduler if self.scheduler is not None else scheduler,
            epochs=self.epochs if self.epochs is not None else epochs,
            iterations=self.iterations if self.iterations is not None else iterations,
            copy_delay=self.copy_delay if self.copy_delay is not None else delay,
            data_dir=data_dir,
        )

    def validate(self) -> Self:
        """不変条件を検証する。

        Returns:
            検証済みの設定（自身）

        Raises:
            ConfigError: 不正な値が含まれる場合
        """
        cfg = self.resolved()
        checks: list[tuple[bool, str]] = [
            (cfg.hidden_size >= 1, f"hidden_size must be >= 1, got {cfg.hidden_size}"),
            (
                cfg.learning_rate > 0,
                f"learning_rate must be positive, got {cfg.learning_rate}",
            ),
            (cfg.gain > 0, f"gain must be positive, got {cfg.gain}"),
            (cfg.epochs >= 0, f"epochs must be >= 0, got {cfg.epochs}"),
            (cfg.iterations >= 0, f"iterations must be >= 0, got {cfg.iterations}"),
            (
                cfg.eval_interval >= 1,
                f"eval_interval must be >= 1, got {cfg.eval_interval}",
            ),
            (cfg.batch_size >= 1, f"batch_size must be >= 1, got {cfg.batch_size}"),
            (
                cfg.copy_alphabet >= 2,
                f"copy_alphabet must be >= 2, got {cfg.copy_alphabet}",
            ),
            (cfg.copy_payload >= 1, f"copy_payload must be >= 1, got {cfg.copy_payload}"),
            (cfg.copy_delay >= 0, f"copy_delay must be >= 0, got {cfg.copy_delay}"),
            (cfg.eval_size >= 1, f"eval_size must be >= 1, got {cfg.eval_size}"),
            (cfg.downscale >= 1, f"downscale must be >= 1, got {cfg.downscale}"),
            (cfg.chunk >= 2, f"chunk must be >= 2, got {cfg.chunk}"),
            (cfg.mle_every >= 0, f"mle_every must be >= 0, got {cfg.mle_every}"),
            (
                cfg.clip_norm is None or cfg.clip_norm > 0,
                f"clip_norm must be positive, got {cfg.clip_norm}",
            ),
            (
                cfg.task is TaskId.CHARLM or not cfg.scheduler,
                "scheduler is only supported for the charlm task",
            ),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)
        if cfg.task is TaskId.CHARLM and cfg.corpus is None:
            raise ConfigError("charlm task requires a corpus path")
        return self

    def with_overrides(self, **overrides: Any) -> Self:
        """CLI フラグで上書きした設定を返す（None は未指定扱い）。"""
        given = {k: v for k, v in overrides.items() if v is not None}
        try:
            return replace(self, **_coerce(given))
        except TypeError as e:
            raise ConfigError(str(e)) from None

    def to_dict(self) -> dict[str, Any]:
        """JSON 化可能な辞書に変換する。"""
        data = asdict(self)
        for key in _ENUM_FIELDS:
            data[key] = data[key].value
        return data

    def to_json(self) -> str:
        """正準形の JSON 文字列を返す（キー順固定）。"""
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Self:
        """辞書から設定を構築する。

        Raises:
            ConfigError: 未知のキーや不正な列挙値を含む場合
        """
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**_coerce(data))

    @classmethod
    def from_json(cls, path: Path | str) -> Self:
        """JSON ファイルから設定を読み込む。"""
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {path}: {e}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"config {path} must be a JSON object")
        return cls.from_dict(data)


def _coerce(data: dict[str, Any]) -> dict[str, Any]:
    """列挙型フィールドを文字列から変換する。"""
    result = dict(data)
    for key, enum_type in _ENUM_FIELDS.items():
        if key in result and not isinstance(result[key], enum_type):
            try:
                result[key] = enum_type(str(result[key]).lower())
            except ValueError:
                raise ConfigError(f"invalid {key}: {result[key]}") from None
    return result


@dataclass(frozen=True)
class GridSpec:
    """形状パラメータ (n, s) の初期化グリッド。"""

    gains: tuple[float, ...] = GRID_GAINS
    saturations: tuple[float, ...] = GRID_SATURATIONS
    seeds: int = 1
    base_seed: int = 0

    def __post_init__(self) -> None:
        if not self.gains or not self.saturations:
            raise ConfigError("grid axes must be non-empty")
        if any(g <= 0 for g in self.gains):
            raise ConfigError(f"grid gains must be positive, got {self.gains}")
        if self.seeds < 1:
            raise ConfigError(f"seeds must be >= 1, got {self.seeds}")

    @property
    def cells(self) -> list[tuple[float, float]]:
        """(gain, saturation) のセル一覧（gain 優先の行順）。"""
        return [(g, s) for g in self.gains for s in self.saturations]

    @classmethod
    def full(cls, seeds: int = 1, base_seed: int = 0) -> Self:
        """17×5 の初期化グリッドを返す。"""
        return cls(GRID_GAINS, GRID_SATURATIONS, seeds=seeds, base_seed=base_seed)
