from src.training.summary import (
    RunSummary,
    epochs_to_reach,
    epochs_to_target,
    modal_value,
    summarize,
)
from src.training.trainer import (
    EpochRow,
    RunRecord,
    TaskData,
    TrainResult,
    check_model,
    evaluate,
    load_record,
    prepare_task,
    resume_run,
    save_run,
    train_run,
    trainperf_grid,
)
from src.training.transfer import TransferEpoch, TransferResult, run_transfer

__all__ = [
    "RunSummary",
    "epochs_to_reach",
    "epochs_to_target",
    "modal_value",
    "summarize",
    "EpochRow",
    "RunRecord",
    "TaskData",
    "TrainResult",
    "check_model",
    "evaluate",
    "load_record",
    "prepare_task",
    "resume_run",
    "save_run",
    "train_run",
    "trainperf_grid",
    "TransferEpoch",
    "TransferResult",
    "run_transfer",
]
