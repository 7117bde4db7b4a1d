"""表形式の結果出力モジュール。

CSV の 1 行目は `# schema_version=N` のコメント行、2 行目がヘッダ。
浮動小数点は repr 形式で書き、同じ値からは常に同じバイト列を得る。
"""

import csv
import json
import math
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Any

from src.config.constants import CSV_SCHEMA_VERSION
from src.config.errors import FormatError

_SCHEMA_PREFIX = "# schema_version="


def format_value(value: Any) -> str:
    """CSV セル用の文字列表現。"""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return repr(value)
    return str(value)


def write_table(
    path: Path | str,
    header: Sequence[str],
    rows: Iterable[Sequence[Any]],
    schema_version: int = CSV_SCHEMA_VERSION,
) -> Path:
    """バージョン付き CSV を書き出す。

    Args:
        path: 出力ファイルパス
        header: 列名
        rows: 行（各行の長さはヘッダと一致すること）
        schema_version: スキーマのバージョン

    Returns:
        保存されたファイルのパス

    Raises:
        ValueError: 行の長さがヘッダと一致しない場合
        OSError: ファイル書き込みに失敗した場合
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as f:
        f.write(f"{_SCHEMA_PREFIX}{schema_version}\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise ValueError(
                    f"row has {len(row)} fields, header has {len(header)}"
                )
            writer.writerow([format_value(v) for v in row])
    return path


def read_table(path: Path | str) -> tuple[int, list[dict[str, str]]]:
    """write_table で書いた CSV を読み込む。

    Returns:
        (スキーマのバージョン, 行の辞書のリスト)

    Raises:
        FormatError: バージョン行が無い場合
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as f:
        first = f.readline().strip()
        if not first.startswith(_SCHEMA_PREFIX):
            raise FormatError(f"{path} has no schema version line")
        version = int(first.removeprefix(_SCHEMA_PREFIX))
        return version, list(csv.DictReader(f))


def write_json(path: Path | str, data: Any) -> Path:
    """キー順固定・インデント 2 の JSON を書き出す。"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps(data, sort_keys=True, indent=2, allow_nan=True) + "\n",
        encoding="utf-8",
    )
    return path


def read_json(path: Path | str) -> Any:
    """JSON ファイルを読み込む。

    Raises:
        FormatError: JSON として解釈できない場合
    """
    path = Path(path)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise FormatError(f"cannot parse {path}: {e}") from None
