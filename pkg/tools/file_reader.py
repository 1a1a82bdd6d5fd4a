"""FileReader Tool - Reads dataset text files"""

import os
from typing import List

from tools.errors import DatasetFormatError, DatasetLoadError
from tools.logger import log_tool_call


def read_file(path: str) -> str:
    """Read contents of a file.

    Args:
        path: Path to the file to read

    Returns:
        The file contents as a string
    """
    log_tool_call("FileReader", "read_file", {"path": path})

    if not os.path.exists(path):
        raise DatasetLoadError(path)

    with open(path, "r", encoding="utf-8") as f:
        content = f.read()

    log_tool_call("FileReader", "read_file_result", {"path": path, "size": len(content)})
    return content


def read_int_rows(path: str) -> List[List[int]]:
    """Read comma separated integer records, one per line.

    Blank lines are skipped and whitespace around values is ignored.

    Args:
        path: Path to the file

    Returns:
        One list of integers per non-blank line
    """
    content = read_file(path)
    rows = []
    for line_number, line in enumerate(content.splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        try:
            rows.append([int(float(value)) for value in line.split(",") if value.strip()])
        except ValueError:
            raise DatasetFormatError(f"{path}, line {line_number}: not an integer record: {line!r}")

    log_tool_call("FileReader", "read_int_rows_result", {"path": path, "rows": len(rows)})
    return rows


def read_int_column(path: str) -> List[int]:
    """Read a file holding exactly one integer per line."""
    rows = read_int_rows(path)
    for i, row in enumerate(rows):
        if len(row) != 1:
            raise DatasetFormatError(f"{path}: record {i + 1} holds {len(row)} values, expected 1")
    return [row[0] for row in rows]


def file_exists(path: str) -> bool:
    """Check if a file exists.

    Args:
        path: Path to check

    Returns:
        True if file exists, False otherwise
    """
    exists = os.path.exists(path)
    log_tool_call("FileReader", "file_exists", {"path": path, "exists": exists})
    return exists
