"""相互情報量の推定に使うタスク分布の入力源。

各入力源は (生の入力値, ネットワークに与える符号化済み入力) の組を返す。
生の入力値は離散なら整数 ID、連続なら実数。
"""

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from src.tasks.batch import one_hot
from src.tasks.digits import DigitDataset


class InputSource(Protocol):
    """系列入力の分布。"""

    input_size: int
    length: int
    discrete: bool

    def draw(
        self, gen: np.random.Generator, count: int
    ) -> tuple[np.ndarray, np.ndarray]:
        """count 本の系列を引く。

        Returns:
            (values (count, length), inputs (count, length, input_size))
        """
        ...


@dataclass(frozen=True)
class SymbolSource:
    """独立同分布の記号列（Copy の記号列や文字列）。

    Attributes:
        symbols: 記号数（ID 0..symbols−1 を出力）
        input_size: one-hot 幅（symbols 以上）
        length: 系列長
        probabilities: 記号の出現確率（None で一様）
    """

    symbols: int
    input_size: int
    length: int
    probabilities: tuple[float, ...] | None = None
    discrete: bool = True

    def draw(
        self, gen: np.random.Generator, count: int
    ) -> tuple[np.ndarray, np.ndarray]:
        p = None if self.probabilities is None else np.asarray(self.probabilities)
        ids = gen.choice(self.symbols, size=(count, self.length), p=p)
        return ids, one_hot(ids, self.input_size)


@dataclass(frozen=True)
class ConstantSource:
    """常に同じ記号を出す退化した入力源。"""

    symbol: int
    input_size: int
    length: int
    discrete: bool = True

    def draw(
        self, gen: np.random.Generator, count: int
    ) -> tuple[np.ndarray, np.ndarray]:
        ids = np.full((count, self.length), self.symbol, dtype=np.int64)
        return ids, one_hot(ids, self.input_size)


@dataclass(frozen=True)
class PixelSource:
    """置換済み画素系列（連続値入力）。"""

    dataset: DigitDataset
    input_size: int = 1
    discrete: bool = False

    @property
    def length(self) -> int:
        return self.dataset.length

    def draw(
        self, gen: np.random.Generator, count: int
    ) -> tuple[np.ndarray, np.ndarray]:
        picks = gen.integers(0, len(self.dataset), size=count)
        inputs = self.dataset.sequences(picks)
        return inputs[..., 0], inputs
