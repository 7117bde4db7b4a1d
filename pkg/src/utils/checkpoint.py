"""チェックポイント入出力モジュール。

モデルとオプティマイザの状態をバイナリファイルに書き出す。形式:

    magic (8 bytes) | version (u32 LE) | header length (u32 LE) | JSON header | tensors

テンソルはヘッダの順に little-endian float64 で連結する。
Adam の一次・二次モーメントは "adam.m.<名前>" / "adam.v.<名前>" として
モデルのテンソルの後ろに続くため、保存した時点から学習をそのまま再開できる。
"""

import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from src.config.constants import CHECKPOINT_MAGIC, CHECKPOINT_VERSION, Scenario
from src.config.errors import FormatError
from src.core.activation import ShapeParams
from src.core.optim import AdamState, PlateauScheduler
from src.core.rnn import RnnModel

_PREFIX = struct.Struct("<II")
_DTYPE = np.dtype("<f8")
_MOMENT_PREFIX = "adam."


@dataclass(frozen=True)
class Checkpoint:
    """保存されたモデルとその出自。

    Attributes:
        model: RNN モデル
        config: 学習設定（RunConfig.to_dict() の形）
        epoch: 保存時点のエポック
        iteration: 保存時点までの更新回数
        optimizer: Adam の状態（再開しないチェックポイントでは None）
        scheduler: 学習率スケジューラの状態
        metrics: 保存時点の評価指標
    """

    model: RnnModel
    config: dict[str, Any] = field(default_factory=dict)
    epoch: int = 0
    iteration: int = 0
    optimizer: AdamState | None = None
    scheduler: PlateauScheduler | None = None
    metrics: dict[str, float] = field(default_factory=dict)


def _moment_tensors(optimizer: AdamState) -> dict[str, np.ndarray]:
    tensors: dict[str, np.ndarray] = {}
    for name in optimizer.trainable:
        tensors[f"{_MOMENT_PREFIX}m.{name}"] = optimizer.m[name]
        tensors[f"{_MOMENT_PREFIX}v.{name}"] = optimizer.v[name]
    return tensors


def save_checkpoint(checkpoint: Checkpoint, output_path: Path | str) -> Path:
    """チェックポイントを保存する。

    Args:
        checkpoint: 保存するチェックポイント
        output_path: 出力ファイルパス

    Returns:
        保存されたファイルのパス

    Raises:
        OSError: ファイル書き込みに失敗した場合
    """
    output_path = Path(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)

    model = checkpoint.model
    optimizer = checkpoint.optimizer
    scheduler = checkpoint.scheduler
    tensors = dict(model.tensors())
    if optimizer is not None:
        tensors.update(_moment_tensors(optimizer))
    header = {
        "scenario": model.scenario.value,
        "dims": {
            "input": model.input_size,
            "hidden": model.hidden_size,
            "output": model.output_size,
        },
        "tensors": [[name, list(np.shape(value))] for name, value in tensors.items()],
        "config": checkpoint.config,
        "epoch": checkpoint.epoch,
        "iteration": checkpoint.iteration,
        "optimizer": None
        if optimizer is None
        else {
            "lr": optimizer.lr,
            "step": optimizer.step,
            "beta1": optimizer.beta1,
            "beta2": optimizer.beta2,
            "eps": optimizer.eps,
            "trainable": list(optimizer.trainable),
        },
        "scheduler": None if scheduler is None else asdict(scheduler),
        "metrics": checkpoint.metrics,
    }
    encoded = json.dumps(header, sort_keys=True).encode("utf-8")

    with output_path.open("wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(_PREFIX.pack(CHECKPOINT_VERSION, len(encoded)))
        f.write(encoded)
        for value in tensors.values():
            f.write(np.ascontiguousarray(value, dtype=_DTYPE).tobytes())

    return output_path


def _read_header(data: bytes, file_path: Path) -> tuple[dict[str, Any], int]:
    magic_len = len(CHECKPOINT_MAGIC)
    if len(data) < magic_len + _PREFIX.size or data[:magic_len] != CHECKPOINT_MAGIC:
        raise FormatError(f"{file_path} is not a gamma-rnn checkpoint")
    version, length = _PREFIX.unpack_from(data, magic_len)
    if version != CHECKPOINT_VERSION:
        raise FormatError(
            f"unsupported checkpoint version {version}, expected {CHECKPOINT_VERSION}"
        )
    start = magic_len + _PREFIX.size
    try:
        header = json.loads(data[start : start + length].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FormatError(f"corrupt checkpoint header in {file_path}: {e}") from None
    if not isinstance(header, dict):
        raise FormatError(f"checkpoint header in {file_path} must be a JSON object")
    return header, start + length


def _read_tensors(
    data: bytes, offset: int, entries: list[Any], file_path: Path
) -> dict[str, np.ndarray]:
    tensors: dict[str, np.ndarray] = {}
    for name, shape in entries:
        count = int(np.prod(shape, dtype=np.int64))
        end = offset + count * _DTYPE.itemsize
        if end > len(data):
            raise FormatError(f"checkpoint {file_path} is truncated at tensor {name}")
        tensors[name] = (
            np.frombuffer(data, dtype=_DTYPE, count=count, offset=offset)
            .reshape(shape)
            .astype(np.float64)
        )
        offset = end
    if offset != len(data):
        raise FormatError(f"checkpoint {file_path} has {len(data) - offset} trailing bytes")
    return tensors


def _restore_optimizer(
    meta: dict[str, Any] | None, moments: dict[str, np.ndarray]
) -> AdamState | None:
    if meta is None:
        return None
    trainable = tuple(meta["trainable"])
    return AdamState(
        lr=float(meta["lr"]),
        trainable=trainable,
        beta1=float(meta["beta1"]),
        beta2=float(meta["beta2"]),
        eps=float(meta["eps"]),
        step=int(meta["step"]),
        m={name: moments[f"m.{name}"] for name in trainable},
        v={name: moments[f"v.{name}"] for name in trainable},
    )


def _restore_scheduler(meta: dict[str, Any] | None) -> PlateauScheduler | None:
    if meta is None:
        return None
    return PlateauScheduler(**{**meta, "history": tuple(meta["history"])})


def load_checkpoint(file_path: Path | str) -> Checkpoint:
    """チェックポイントを読み込む。

    Raises:
        OSError: ファイル読み込みに失敗した場合
        FormatError: 形式が不正、またはヘッダの項目が欠けている場合
    """
    file_path = Path(file_path)
    data = file_path.read_bytes()
    header, offset = _read_header(data, file_path)

    try:
        tensors = _read_tensors(data, offset, header["tensors"], file_path)
        moments = {
            name.removeprefix(_MOMENT_PREFIX): tensors.pop(name)
            for name in list(tensors)
            if name.startswith(_MOMENT_PREFIX)
        }
        shape = ShapeParams(
            tensors.pop("gain"), tensors.pop("saturation"), Scenario(header["scenario"])
        )
        return Checkpoint(
            model=RnnModel(shape=shape, **tensors),
            config=header.get("config", {}),
            epoch=int(header.get("epoch", 0)),
            iteration=int(header.get("iteration", 0)),
            optimizer=_restore_optimizer(header.get("optimizer"), moments),
            scheduler=_restore_scheduler(header.get("scheduler")),
            metrics=header.get("metrics", {}),
        )
    except FormatError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"checkpoint {file_path} has a missing or invalid field: {e}") from None


def get_checkpoint_info(file_path: Path | str) -> dict[str, Any]:
    """チェックポイントのヘッダ情報を取得する（テンソルは読まない）。

    Returns:
        情報の辞書（version, scenario, input, hidden, output, epoch, task,
        n_params, optimizer_step）

    Raises:
        OSError: ファイル読み込みに失敗した場合
        FormatError: 形式が不正、またはヘッダの項目が欠けている場合
    """
    file_path = Path(file_path)
    data = file_path.read_bytes()
    header, _ = _read_header(data, file_path)
    try:
        dims = header["dims"]
        optimizer = header.get("optimizer")
        return {
            "version": CHECKPOINT_VERSION,
            "scenario": header["scenario"],
            "input": dims["input"],
            "hidden": dims["hidden"],
            "output": dims["output"],
            "epoch": header.get("epoch", 0),
            "task": header.get("config", {}).get("task"),
            "n_params": sum(
                int(np.prod(shape))
                for name, shape in header["tensors"]
                if not name.startswith(_MOMENT_PREFIX)
            ),
            "optimizer_step": None if optimizer is None else optimizer["step"],
        }
    except (KeyError, TypeError, AttributeError) as e:
        raise FormatError(f"checkpoint {file_path} has a missing or invalid field: {e}") from None
