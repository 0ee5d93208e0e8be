import math
import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from veriml import canon


@given(st.floats(allow_nan=False))
def test_f64_round_trip(x):
    assert struct.unpack("<d", canon.f64(x))[0] == x


def test_f64_is_bit_exact_not_value_exact():
    # 0.0 and -0.0 compare equal but serialize differently
    assert canon.f64(0.0) != canon.f64(-0.0)


@given(st.integers(min_value=0, max_value=2 ** 64 - 1))
def test_u64_round_trip(n):
    assert struct.unpack("<Q", canon.u64(n))[0] == n


@pytest.mark.parametrize("fn,width,top", [
    (canon.u64, 8, 2 ** 64 - 1),
    (canon.u32, 4, 2 ** 32 - 1),
    (canon.u16, 2, 2 ** 16 - 1),
    (canon.u8, 1, 2 ** 8 - 1),
])
def test_fixed_widths(fn, width, top):
    assert len(fn(0)) == width
    assert len(fn(top)) == width
    with pytest.raises(Exception):
        fn(top + 1)


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False), max_size=20))
def test_vec_is_contiguous_little_endian(values):
    blob = canon.vec(np.array(values, dtype=np.float64))
    assert len(blob) == 8 * len(values)
    back = np.frombuffer(blob, dtype="<f8")
    assert back.tolist() == values


def test_vec_accepts_lists():
    assert canon.vec([1.0, 2.0]) == canon.vec(np.array([1.0, 2.0]))


@given(st.binary(max_size=100))
def test_lp_bytes_parses_back(b):
    framed = canon.lp_bytes(b)
    n = struct.unpack("<I", framed[:4])[0]
    assert n == len(b)
    assert framed[4:] == b


def test_lp_str_utf8():
    framed = canon.lp_str("héllo")
    assert framed == canon.lp_bytes("héllo".encode("utf-8"))


def test_sha256_known_value():
    assert canon.sha256(b"").hex() == (
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855")


def test_zero32():
    assert canon.ZERO32 == bytes(32)


def test_nan_canonical_bytes_stable():
    # NaN payload bits pass through untouched
    blob = canon.f64(math.nan)
    assert len(blob) == 8
    assert math.isnan(struct.unpack("<d", blob)[0])
