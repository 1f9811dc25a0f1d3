# SPDX-License-Identifier: GPL-2.0-or-later

import struct

import numpy as np

import chrono
import chrono.mdar


def test_header_layout():
    blob = chrono.mdar.encode(np.zeros((2, 3), dtype=np.float32))

    assert blob[:4] == b"MDAR"
    assert struct.unpack_from("<BB", blob, 4) == (1, 2)
    assert struct.unpack_from("<2I", blob, 6) == (2, 3)
    assert len(blob) == 6 + 8 + 4 * 6


def test_roundtrip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    array = rng.normal(size=(3, 4, 5)).astype(np.float32)
    array[0, 0, 0] = np.float32(1e-45)
    array[0, 0, 1] = -0.0

    fname = str(tmp_path / "a.mdar")
    chrono.mdar.write(fname, array)
    back = chrono.mdar.read(fname)

    assert not isinstance(back, chrono.Error)
    assert back.shape == array.shape
    assert back.tobytes() == array.tobytes()


def test_big_endian_input_is_stored_little_endian():
    values = np.arange(5, dtype=">f4")
    assert chrono.mdar.encode(values) == chrono.mdar.encode(values.astype("<f4"))


def test_scalar_and_empty_arrays():
    scalar = chrono.mdar.decode(chrono.mdar.encode(np.float32(2.5)))
    empty = chrono.mdar.decode(chrono.mdar.encode(np.zeros((0, 2, 4, 4))))

    assert not isinstance(scalar, chrono.Error) and float(scalar) == 2.5
    assert scalar.shape == ()
    assert chrono.mdar.encode(np.float32(2.5))[5] == 0
    assert not isinstance(empty, chrono.Error) and empty.shape == (0, 2, 4, 4)


def test_truncated_payload_is_rejected():
    blob = chrono.mdar.encode(np.ones(4))
    ret = chrono.mdar.decode(blob[:-1], "x.mdar")

    assert isinstance(ret, chrono.Error)
    assert ret.kind == "bad-container"
    assert "x.mdar" in ret.message


def test_bad_magic_and_version():
    blob = bytearray(chrono.mdar.encode(np.ones(1)))

    assert isinstance(chrono.mdar.decode(b"NOPE" + bytes(blob[4:])), chrono.Error)

    blob[4] = 9
    ret = chrono.mdar.decode(bytes(blob))
    assert isinstance(ret, chrono.Error) and "version" in ret.message


def test_missing_file(tmp_path):
    ret = chrono.mdar.read(str(tmp_path / "nope.mdar"))
    assert isinstance(ret, chrono.Error) and ret.kind == "missing-file"
