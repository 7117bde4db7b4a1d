from src.tasks.batch import TaskBatch, one_hot
from src.tasks.charlm import CorpusSplit, build_corpus, charlm_batches, load_corpus
from src.tasks.copy import CopyConfig, copy_batch
from src.tasks.digits import (
    DigitDataset,
    load_digit_splits,
    load_digits,
    read_idx,
    rotate_digits,
    rotate_images,
    split_balanced,
)
from src.tasks.metrics import Metrics, masked_cross_entropy, merge_metrics, metrics
from src.tasks.sources import ConstantSource, InputSource, PixelSource, SymbolSource

__all__ = [
    "TaskBatch",
    "one_hot",
    "CorpusSplit",
    "build_corpus",
    "charlm_batches",
    "load_corpus",
    "CopyConfig",
    "copy_batch",
    "DigitDataset",
    "load_digit_splits",
    "load_digits",
    "read_idx",
    "rotate_digits",
    "rotate_images",
    "split_balanced",
    "Metrics",
    "masked_cross_entropy",
    "merge_metrics",
    "metrics",
    "ConstantSource",
    "InputSource",
    "PixelSource",
    "SymbolSource",
]
