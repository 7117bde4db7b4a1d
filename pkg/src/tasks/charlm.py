"""文字レベル言語モデルタスク。

任意の UTF-8 コーパスを文字 ID 列に変換し、状態を引き継ぐ truncated BPTT 用の
チャンクを生成する。
"""

from collections.abc import Iterator
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from src.config.constants import CHARLM_CHUNK, CHARLM_SPLIT
from src.config.errors import ConfigError, FormatError
from src.tasks.batch import TaskBatch, one_hot


@dataclass(frozen=True)
class CorpusSplit:
    """文字語彙と学習・検証・テストの ID 列。

    Attributes:
        vocabulary: ソート・重複除去済みの文字列
        train: 学習用 ID 列
        valid: 検証用 ID 列
        test: テスト用 ID 列
        chunk: truncated BPTT の窓長
    """

    vocabulary: str
    train: np.ndarray
    valid: np.ndarray
    test: np.ndarray
    chunk: int = CHARLM_CHUNK

    @property
    def vocab_size(self) -> int:
        return len(self.vocabulary)

    def encode(self, text: str) -> np.ndarray:
        """文字列を ID 列に変換する（語彙外の文字は KeyError）。"""
        index = {c: i for i, c in enumerate(self.vocabulary)}
        return np.array([index[c] for c in text], dtype=np.int64)

    def decode(self, ids: np.ndarray) -> str:
        return "".join(self.vocabulary[i] for i in ids)


def build_corpus(
    text: str,
    fractions: tuple[float, float, float] = CHARLM_SPLIT,
    chunk: int = CHARLM_CHUNK,
) -> CorpusSplit:
    """テキストを連続区間で学習・検証・テストに分割する。

    Raises:
        ConfigError: テキストが空、または chunk が 2 未満の場合
    """
    if not text:
        raise ConfigError("corpus must not be empty")
    if chunk < 2:
        raise ConfigError(f"chunk must be >= 2, got {chunk}")
    vocabulary = "".join(sorted(set(text)))
    index = {c: i for i, c in enumerate(vocabulary)}
    ids = np.array([index[c] for c in text], dtype=np.int64)
    n_train = int(len(ids) * fractions[0])
    n_valid = int(len(ids) * fractions[1])
    return CorpusSplit(
        vocabulary=vocabulary,
        train=ids[:n_train],
        valid=ids[n_train : n_train + n_valid],
        test=ids[n_train + n_valid :],
        chunk=chunk,
    )


def load_corpus(path: Path | str, chunk: int = CHARLM_CHUNK) -> CorpusSplit:
    """UTF-8 コーパスファイルを読み込む。

    Raises:
        OSError: ファイルを読めない場合
        FormatError: UTF-8 として解釈できない場合
        ConfigError: コーパスが空の場合
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as e:
        raise FormatError(f"corpus {path} is not valid UTF-8: {e}") from None
    if not text:
        raise ConfigError(f"corpus {path} is empty")
    return build_corpus(text, chunk=chunk)


def charlm_batches(
    ids: np.ndarray, vocab_size: int, batch: int, chunk: int
) -> Iterator[TaskBatch]:
    """状態引き継ぎ用の連続チャンクを順に生成する。

    ID 列を batch 本の並列ストリームに分け、各ストリームの次のチャンクを
    同じ行に並べる。したがって前のチャンクの最終隠れ状態をそのまま次の h0 に使える。
    最後のチャンクは chunk より短いことがある。

    Args:
        ids: 文字 ID 列
        vocab_size: 語彙数
        batch: 並列ストリーム数
        chunk: チャンク長（2 以上）

    Yields:
        入力は one-hot、ターゲットは次の文字、マスクは全位置
    """
    ids = np.asarray(ids, dtype=np.int64)
    if len(ids) < 2:
        raise ConfigError("corpus must contain at least two characters")
    if chunk < 2:
        raise ConfigError(f"chunk must be >= 2, got {chunk}")
    if batch < 1:
        raise ConfigError(f"batch must be >= 1, got {batch}")
    per_stream = (len(ids) - 1) // batch
    if per_stream < 1:
        raise ConfigError(f"corpus too short for {batch} parallel streams")
    sources = ids[: per_stream * batch].reshape(batch, per_stream)
    shifted = ids[1 : per_stream * batch + 1].reshape(batch, per_stream)
    for index, start in enumerate(range(0, per_stream, chunk)):
        stop = min(start + chunk, per_stream)
        yield TaskBatch(
            inputs=one_hot(sources[:, start:stop], vocab_size),
            targets=shifted[:, start:stop],
            score_mask=np.ones((batch, stop - start), dtype=bool),
            task="charlm",
            vocab_size=vocab_size,
            metadata={"chunk_index": index},
        )
