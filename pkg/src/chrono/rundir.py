# SPDX-License-Identifier: GPL-2.0-or-later
#
# Every command writes into its own run directory. A lock file keeps two
# concurrent runs out of the same directory and config.snapshot records the
# fully resolved configuration next to the outputs.
#

import argparse
import errno
import os
import os.path

from types import TracebackType
from typing import Optional, Tuple, Type

import chrono
import chrono.config

logger = chrono.logger

LOCKFILE = ".lock"
SNAPSHOT = "config.snapshot"


class RunDir:
    def __init__(self, path: str):
        self.path   = path
        self.locked = False

    @property
    def lockfile(self) -> str:
        return os.path.join(self.path, LOCKFILE)

    def join(self, *names: str) -> str:
        return os.path.join(self.path, *names)

    def lock(self) -> None | chrono.Error:
        try:
            os.makedirs(self.path, mode=0o755, exist_ok=True)
            fd = os.open(self.lockfile, os.O_CREAT | os.O_EXCL | os.O_WRONLY, 0o644)
        except OSError as e:
            if e.errno == errno.EEXIST:
                return chrono.Error(f"run directory is in use: {self.path} "
                                    f"(remove {self.lockfile} if no run is active)", "locked")
            return chrono.Error(f"unable to create run directory {self.path}: {e}", "io")

        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(f"{os.getpid()}\n")

        self.locked = True
        logger.debug("locked %s", self.path)
        return None

    def unlock(self) -> None:
        if not self.locked:
            return
        try:
            os.unlink(self.lockfile)
        except FileNotFoundError:
            pass
        self.locked = False

    def write_snapshot(self, cfg: chrono.config.ExperimentConfig) -> None:
        with open(self.join(SNAPSHOT), "w", encoding="utf-8") as f:
            f.write(chrono.config.snapshot(cfg))

    def __enter__(self) -> "RunDir":
        return self

    def __exit__(self, exc_type: Optional[Type[BaseException]],
                 exc: Optional[BaseException], tb: Optional[TracebackType]) -> None:
        self.unlock()


def open_rundir(cfg: chrono.config.ExperimentConfig, name: str) -> RunDir | chrono.Error:
    rundir = RunDir(os.path.join(cfg.paths.out, name))

    if err := rundir.lock():
        return err

    try:
        rundir.write_snapshot(cfg)
    except OSError as e:
        rundir.unlock()
        return chrono.Error(f"unable to write {rundir.join(SNAPSHOT)}: {e}", "io")

    logger.info("run directory: %s", rundir.path)
    return rundir


def prepare(cmdargs: argparse.Namespace,
            name: str) -> Tuple[chrono.config.ExperimentConfig, RunDir] | chrono.Error:
    cfg = chrono.config.load(cmdargs.config, cmdargs)

    if isinstance(cfg, chrono.Error):
        return cfg

    rundir = open_rundir(cfg, name)

    if isinstance(rundir, chrono.Error):
        return rundir

    return cfg, rundir
