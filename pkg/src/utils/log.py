"""ログ設定モジュール。"""

import logging

from rich.console import Console
from rich.logging import RichHandler


def setup_logging(verbose: bool = False, console: Console | None = None) -> None:
    """ルートロガーに RichHandler を 1 つだけ設定する。

    Args:
        verbose: True なら DEBUG、False なら INFO
        console: 出力先のコンソール（省略時は標準エラー）
    """
    level = logging.DEBUG if verbose else logging.INFO
    handler = RichHandler(
        console=console or Console(stderr=True),
        show_path=verbose,
        rich_tracebacks=True,
    )
    logging.basicConfig(
        level=level,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[handler],
        force=True,
    )
