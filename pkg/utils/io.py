"""
File helpers - atomic writes and strict JSON loading.

Artifacts are written to a temp file in the target directory and renamed
on success, so a failed command never leaves half a file behind.
"""

import json
import logging
import os
import tempfile
from contextlib import contextmanager
from typing import Any, Iterator

from utils.errors import ParseError

logger = logging.getLogger(__name__)


@contextmanager
def atomic_write(path: str, mode: str = "w") -> Iterator[Any]:
    """
    Open a temp file next to `path`; replace `path` with it on clean exit.

    Args:
        path: Final destination
        mode: "w" for text (UTF-8, LF newlines) or "wb" for bytes
    """
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        if "b" in mode:
            handle = os.fdopen(fd, mode)
        else:
            handle = os.fdopen(fd, mode, encoding="utf-8", newline="\n")
        with handle:
            yield handle
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise
    logger.debug(f"💾 Wrote {path}")


def write_json(path: str, payload: Any, indent: int = 2) -> None:
    """Write JSON atomically with a stable key order."""
    with atomic_write(path) as f:
        json.dump(payload, f, indent=indent, sort_keys=True)
        f.write("\n")


def read_json(path: str, **kwargs) -> Any:
    """Load a JSON file, turning decode errors into ParseError with the path."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f, **kwargs)
    except json.JSONDecodeError as e:
        raise ParseError(path, f"invalid JSON ({e.msg} at line {e.lineno})") from e
