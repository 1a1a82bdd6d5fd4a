"""FileWriter Tool - Writes reports, Gram matrices and checkpoints to disk"""

import os
from tools.logger import log_tool_call


def _ensure_parent(path: str):
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)


def write_file(path: str, content: str) -> str:
    """Write text content to a file.

    Args:
        path: Path to the file to write
        content: Content to write to the file

    Returns:
        Path written
    """
    log_tool_call("FileWriter", "write_file", {"path": path})

    _ensure_parent(path)

    with open(path, "w", encoding="utf-8") as f:
        f.write(content)

    log_tool_call("FileWriter", "write_file_result", {"path": path, "status": "success"})
    return path


def write_bytes(path: str, payload: bytes) -> str:
    """Write a binary payload to a file.

    Args:
        path: Path to the file to write
        payload: Bytes to write

    Returns:
        Path written
    """
    log_tool_call("FileWriter", "write_bytes", {"path": path, "size": len(payload)})

    _ensure_parent(path)

    with open(path, "wb") as f:
        f.write(payload)

    log_tool_call("FileWriter", "write_bytes_result", {"path": path, "status": "success"})
    return path
