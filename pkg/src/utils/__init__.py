from src.utils.checkpoint import (
    Checkpoint,
    get_checkpoint_info,
    load_checkpoint,
    save_checkpoint,
)
from src.utils.log import setup_logging
from src.utils.tables import read_json, read_table, write_json, write_table

__all__ = [
    "Checkpoint",
    "get_checkpoint_info",
    "load_checkpoint",
    "save_checkpoint",
    "setup_logging",
    "read_json",
    "read_table",
    "write_json",
    "write_table",
]
