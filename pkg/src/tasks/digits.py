"""系列数字分類タスク（画素置換付き）。

画像を 1 画素ずつ系列として入力し、最終ステップでのみラベルを採点する。
既定では scikit-learn 同梱の 8×8 数字データを使い、IDX 形式の MNIST も読み込める。
"""

import gzip
import logging
import struct
from dataclasses import dataclass, replace
from pathlib import Path
try:
    from typing import Self
except ImportError:  # Python < 3.11
    from typing_extensions import Self

import numpy as np
from scipy import ndimage
from sklearn.datasets import load_digits as _sklearn_digits
from sklearn.model_selection import train_test_split

from src.config.constants import DIGITS_CLASSES, DIGITS_TEST_FRACTION
from src.config.errors import ConfigError, DimensionError, FormatError
from src.core.linalg import RngStream
from src.tasks.batch import TaskBatch

logger = logging.getLogger(__name__)

# IDX の型コード
_IDX_DTYPES: dict[int, str] = {
    0x08: ">u1",
    0x09: ">i1",
    0x0B: ">i2",
    0x0C: ">i4",
    0x0D: ">f4",
    0x0E: ">f8",
}

# MNIST 標準ファイル名
IDX_FILES: dict[str, tuple[str, str]] = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


@dataclass(frozen=True)
class DigitDataset:
    """画素系列化した数字データ。

    Attributes:
        images: (M, H, W) 画素値 [0, 1] の正方画像
        labels: (M,) ラベル
        permutation: (H·W,) 画素の読み出し順（固定置換）
    """

    images: np.ndarray
    labels: np.ndarray
    permutation: np.ndarray

    def __post_init__(self) -> None:
        if len(self.images) != len(self.labels):
            raise FormatError(
                f"image count {len(self.images)} != label count {len(self.labels)}"
            )
        pixels = int(np.prod(self.images.shape[1:]))
        if sorted(self.permutation.tolist()) != list(range(pixels)):
            raise ValueError("permutation must be a bijection over pixel indices")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def length(self) -> int:
        """系列長（画素数）。"""
        return len(self.permutation)

    def sequences(self, indices: np.ndarray | None = None) -> np.ndarray:
        """(M, P, 1) の置換済み画素系列。"""
        images = self.images if indices is None else self.images[indices]
        flat = images.reshape(len(images), -1)
        return flat[:, self.permutation][..., None]

    def batch(self, indices: np.ndarray | None = None) -> TaskBatch:
        """指定した画像のバッチ（最終ステップのみ採点）を作る。"""
        labels = self.labels if indices is None else self.labels[indices]
        inputs = self.sequences(indices)
        count, length = inputs.shape[:2]
        targets = np.zeros((count, length), dtype=np.int64)
        targets[:, -1] = labels
        mask = np.zeros((count, length), dtype=bool)
        mask[:, -1] = True
        return TaskBatch(
            inputs=inputs,
            targets=targets,
            score_mask=mask,
            task="digits",
            vocab_size=DIGITS_CLASSES,
        )

    def subset(self, indices: np.ndarray) -> Self:
        """画像の部分集合（同じ置換）を返す。"""
        return replace(self, images=self.images[indices], labels=self.labels[indices])


def read_idx(path: Path | str) -> np.ndarray:
    """IDX 形式（ビッグエンディアン）のファイルを読み込む。.gz にも対応する。

    Raises:
        FormatError: ヘッダーやデータ長が不正な場合
    """
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as f:
        data = f.read()
    if len(data) < 4 or data[0:2] != b"\x00\x00":
        raise FormatError(f"{path}: bad IDX magic")
    code, ndim = data[2], data[3]
    if code not in _IDX_DTYPES:
        raise FormatError(f"{path}: unknown IDX type code 0x{code:02x}")
    header = 4 + 4 * ndim
    if ndim == 0 or len(data) < header:
        raise FormatError(f"{path}: truncated IDX header")
    dims = struct.unpack(f">{ndim}I", data[4:header])
    dtype = np.dtype(_IDX_DTYPES[code])
    expected = int(np.prod(dims)) * dtype.itemsize
    if len(data) - header != expected:
        raise FormatError(
            f"{path}: expected {expected} data bytes, found {len(data) - header}"
        )
    return np.frombuffer(data, dtype=dtype, offset=header).reshape(dims)


def _downscale(images: np.ndarray, factor: int) -> np.ndarray:
    """factor×factor ブロック平均で縮小する（端数は切り捨て）。"""
    if factor == 1:
        return images
    count, h, w = images.shape
    h2, w2 = h // factor, w // factor
    cropped = images[:, : h2 * factor, : w2 * factor]
    return cropped.reshape(count, h2, factor, w2, factor).mean(axis=(2, 4))


def make_permutation(pixels: int, permutation_seed: int | None) -> np.ndarray:
    """固定画素置換を作る（seed が None なら恒等置換）。"""
    if permutation_seed is None:
        return np.arange(pixels)
    return RngStream(permutation_seed).generator().permutation(pixels)


def load_digits(
    path: Path | str | None = None,
    downscale: int = 1,
    permutation_seed: int | None = 0,
    labels_path: Path | str | None = None,
) -> DigitDataset:
    """数字データを読み込み、画素系列データセットを作る。

    Args:
        path: IDX 画像ファイル。None なら同梱の 8×8 数字データ
        downscale: ブロック平均の縮小率
        permutation_seed: 画素置換のシード（None で恒等置換）
        labels_path: IDX ラベルファイル（省略時は画像ファイル名から推定）

    Returns:
        画素値を [0, 1] に正規化したデータセット

    Raises:
        FormatError: IDX ヘッダー不正、または画像数とラベル数の不一致
        ConfigError: downscale が 1 未満の場合
    """
    if downscale < 1:
        raise ConfigError(f"downscale must be >= 1, got {downscale}")
    if path is None:
        bunch = _sklearn_digits()
        images = bunch.images.astype(np.float64) / 16.0
        labels = bunch.target.astype(np.int64)
    else:
        path = Path(path)
        if labels_path is None:
            labels_path = path.with_name(path.name.replace("images-idx3", "labels-idx1"))
        raw = read_idx(path)
        if raw.ndim != 3:
            raise FormatError(f"{path}: expected 3-D image array, got {raw.ndim}-D")
        images = raw.astype(np.float64) / 255.0
        labels = read_idx(labels_path).astype(np.int64)
        if len(images) != len(labels):
            raise FormatError(
                f"image count {len(images)} != label count {len(labels)}"
            )
    images = _downscale(images, downscale)
    permutation = make_permutation(int(np.prod(images.shape[1:])), permutation_seed)
    logger.debug("loaded %d digit images of shape %s", len(images), images.shape[1:])
    return DigitDataset(images, labels, permutation)


def load_digit_splits(
    data_dir: Path | str | None = None,
    downscale: int = 1,
    permutation_seed: int | None = 0,
    split_seed: int = 0,
) -> tuple[DigitDataset, DigitDataset]:
    """学習用・テスト用のデータセットを返す。

    data_dir が None なら同梱データを層化分割し、そうでなければ
    MNIST 標準ファイル名の IDX を読み込む。
    """
    if data_dir is None:
        full = load_digits(None, downscale, permutation_seed)
        train_idx, test_idx = train_test_split(
            np.arange(len(full)),
            test_size=DIGITS_TEST_FRACTION,
            random_state=split_seed,
            stratify=full.labels,
        )
        return full.subset(np.sort(train_idx)), full.subset(np.sort(test_idx))

    root = Path(data_dir)
    splits = []
    for key in ("train", "test"):
        images_name, labels_name = IDX_FILES[key]
        images_path = _existing(root / images_name)
        labels_path = _existing(root / labels_name)
        splits.append(load_digits(images_path, downscale, permutation_seed, labels_path))
    return splits[0], splits[1]


def _existing(path: Path) -> Path:
    gz = path.with_name(path.name + ".gz")
    return gz if not path.exists() and gz.exists() else path


def rotate_images(images: np.ndarray, degrees: float) -> np.ndarray:
    """画像を中心まわりに反時計回りへ回転する。

    90° 単位は添字の並べ替えで厳密に行い、残りの角度は双線形補間する。
    結果は [0, 1] にクリップする。

    Raises:
        DimensionError: 正方画像でない場合
    """
    if images.ndim != 3 or images.shape[1] != images.shape[2]:
        raise DimensionError(f"rotation requires square images, got {images.shape[1:]}")
    quarter, residual = divmod(float(degrees) % 360.0, 90.0)
    rotated = np.rot90(images, k=int(quarter), axes=(1, 2))
    if residual > 1e-9:
        rotated = ndimage.rotate(
            rotated, residual, axes=(2, 1), reshape=False, order=1, mode="constant"
        )
    return np.clip(rotated, 0.0, 1.0)


def split_balanced(
    labels: np.ndarray, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """各クラスを半分ずつに分け、クラスごとの件数差を ±1 以内に保つ。"""
    gen = RngStream(seed, (1,)).generator()
    first: list[np.ndarray] = []
    second: list[np.ndarray] = []
    for label in np.unique(labels):
        idx = gen.permutation(np.flatnonzero(labels == label))
        half = len(idx) // 2
        first.append(idx[:half])
        second.append(idx[half:])
    return np.sort(np.concatenate(first)), np.sort(np.concatenate(second))


def rotate_digits(
    dataset: DigitDataset, degrees: float, split_seed: int = 0
) -> tuple[DigitDataset, DigitDataset]:
    """回転した画像を元の置換で系列化し、クラス均衡な学習用・テスト用に分ける。

    Returns:
        (学習用, テスト用) のタプル
    """
    rotated = replace(dataset, images=rotate_images(dataset.images, degrees))
    train_idx, test_idx = split_balanced(dataset.labels, split_seed)
    return rotated.subset(train_idx), rotated.subset(test_idx)
