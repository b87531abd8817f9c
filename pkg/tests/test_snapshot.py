import struct

import numpy as np
import pytest

from pens.snapshot import SCALAR, VECTOR, decode, encode, read_snapshot, write_snapshot
from pens.spectral import Grid


def test_header_layout():
    g = Grid(3, 8, 2.5)
    data = encode(g, np.zeros(g.shape))
    assert data[:4] == b"PENS"
    version, n, N = struct.unpack_from("<III", data, 4)
    (L,) = struct.unpack_from("<d", data, 16)
    (kind,) = struct.unpack_from("<I", data, 24)
    assert (version, n, N, L, kind) == (1, 3, 8, 2.5, SCALAR)
    assert len(data) == 28 + 8 * 8**3


def test_scalar_row_major_order():
    g = Grid(2, 8, 1.0)
    f = np.arange(64, dtype=float).reshape(g.shape)
    data = encode(g, f)
    first = struct.unpack_from("<3d", data, 28)
    assert first == (0.0, 1.0, 2.0)  # last index varies fastest


def test_vector_component_major(tmp_path):
    g = Grid(2, 8, 1.0)
    v = np.random.default_rng(0).standard_normal((2,) + g.shape)
    path = write_snapshot(tmp_path / "v.pens", g, v)
    snap = read_snapshot(path)
    assert snap.kind == VECTOR and snap.grid == g
    assert np.array_equal(snap.samples, v)
    raw = path.read_bytes()
    assert struct.unpack_from("<d", raw, 28 + 8 * 64)[0] == v[1, 0, 0]


@pytest.mark.parametrize("mutate,match", [
    (lambda b: b"XXXX" + b[4:], "magic"),
    (lambda b: b[:4] + struct.pack("<I", 2) + b[8:], "version"),
    (lambda b: b[:24] + struct.pack("<I", 5) + b[28:], "kind"),
    (lambda b: b[:-8], "payload"),
    (lambda b: b[:10], "truncated"),
])
def test_decode_rejects_corruption(mutate, match):
    g = Grid(2, 8, 1.0)
    with pytest.raises(ValueError, match=match):
        decode(mutate(encode(g, np.ones(g.shape))))


def test_encode_rejects_shape():
    with pytest.raises(ValueError):
        encode(Grid(2, 8, 1.0), np.zeros((4, 4)))
