# SPDX-License-Identifier: GPL-2.0-or-later
#
# MDAR array container:
#
#   offset  size    field
#   0       4       magic "MDAR"
#   4       1       version (u8)
#   5       1       ndim (u8)
#   6       4*ndim  dims (u32 little-endian each)
#   ...     4*prod  payload, float32 little-endian, row-major
#

import os
import os.path
import struct

from typing import Sequence

import numpy as np
import numpy.typing as npt

import chrono

logger = chrono.logger

MAGIC   = b"MDAR"
VERSION = 1
MAXDIM  = 255


def encode(array: npt.ArrayLike) -> bytes:
    data = np.asarray(array, dtype="<f4").copy(order="C")

    if data.ndim > MAXDIM:
        raise ValueError(f"too many dimensions: {data.ndim}")

    header = MAGIC + struct.pack("<BB", VERSION, data.ndim)
    header += struct.pack(f"<{data.ndim}I", *data.shape)

    return header + data.tobytes(order="C")


def decode(blob: bytes, name: str = "<bytes>") -> npt.NDArray[np.float32] | chrono.Error:
    if len(blob) < 6 or blob[:4] != MAGIC:
        return chrono.Error(f"{name}: bad magic", "bad-container")

    version, ndim = struct.unpack_from("<BB", blob, 4)

    if version != VERSION:
        return chrono.Error(f"{name}: unsupported version {version}", "bad-container")

    offset = 6 + 4 * ndim

    if len(blob) < offset:
        return chrono.Error(f"{name}: truncated header", "bad-container")

    dims: Sequence[int] = struct.unpack_from(f"<{ndim}I", blob, 6)
    count = int(np.prod(dims, dtype=np.int64)) if ndim else 1

    if len(blob) - offset != 4 * count:
        return chrono.Error(f"{name}: payload is {len(blob) - offset} bytes, expected {4 * count}",
                            "bad-container")

    data = np.frombuffer(blob, dtype="<f4", count=count, offset=offset)

    return data.astype(np.float32).reshape(tuple(dims))


def write(filename: str, array: npt.ArrayLike) -> None:
    dirname = os.path.dirname(filename)
    if dirname:
        os.makedirs(dirname, mode=0o755, exist_ok=True)

    with open(filename, "wb") as fd:
        fd.write(encode(array))


def read(filename: str) -> npt.NDArray[np.float32] | chrono.Error:
    try:
        with open(filename, "rb") as fd:
            blob = fd.read()
    except FileNotFoundError:
        return chrono.Error(f"no such file: {filename}", "missing-file")
    except OSError as e:
        return chrono.Error(f"unable to read {filename}: {e}", "bad-file")

    return decode(blob, filename)
