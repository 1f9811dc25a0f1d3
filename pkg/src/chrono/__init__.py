# SPDX-License-Identifier: GPL-2.0-or-later

import logging
import os
import os.path
import json

from typing import Any, Dict, Optional

HAVE_MATPLOTLIB = False

try:
    import matplotlib
    matplotlib.use("Agg")
    HAVE_MATPLOTLIB = True
except ImportError:
    pass

__VERSION__ = '1-dev'

EX_SUCCESS = 0 # Successful exit status.
EX_FAILURE = 1 # Failing exit status.

logger = logging.getLogger("chrono")


class Error:
    def __init__(self, message: str, kind: str = "failure"):
        self.message = message
        self.kind    = kind

    def __repr__(self) -> str:
        return f"Error({self.kind}: {self.message})"


def report(err: Error) -> int:
    logger.critical("error: %s: %s", err.kind, err.message)
    return EX_FAILURE


def write_json(filename: str, data: Any) -> None:
    dirname = os.path.dirname(filename)
    if dirname:
        os.makedirs(dirname, mode=0o755, exist_ok=True)

    with open(filename, "w", encoding="utf-8") as fd:
        json.dump(data, fd, indent=2, sort_keys=True)
        fd.write("\n")


def read_json(filename: str) -> Dict[str, Any] | Error:
    try:
        with open(filename, "r", encoding="utf-8") as fd:
            data = json.load(fd)
    except FileNotFoundError:
        return Error(f"no such file: {filename}", "missing-file")
    except (OSError, json.JSONDecodeError) as e:
        return Error(f"unable to read {filename}: {e}", "bad-file")

    if not isinstance(data, dict):
        return Error(f"unexpected json document: {filename}", "bad-file")

    return data


def setup_logger(logger: logging.Logger, level: int, fmt: str,
                 stream: Optional[Any] = None) -> logging.Logger:
    formatter = logging.Formatter(fmt=fmt, datefmt="%H:%M:%S")

    handler = logging.StreamHandler(stream)
    handler.setLevel(level)
    handler.setFormatter(formatter)

    for h in list(logger.handlers):
        logger.removeHandler(h)

    logger.setLevel(level)
    logger.addHandler(handler)

    return logger
