"""Saturating 32-bit fixed-point lane arithmetic.

All PIM datapath lanes are 32-bit two's-complement integers with an implicit
global binary point. Every right shift that discards bits rounds to nearest
even; every result saturates instead of wrapping. The reference optimizer in
:mod:`bgpim.oracle` uses these exact helpers so that simulated memory images
can be compared bit-for-bit.

Vector helpers operate on int64 numpy arrays (wide enough for every
intermediate: |lane| <= 2^31 and |shift| <= 15 keeps products below 2^47).
"""

from __future__ import annotations

import numpy as np

INT32_MIN = -(1 << 31)
INT32_MAX = (1 << 31) - 1

LANES_PER_COLUMN = 16
COLUMN_BYTES = 64


def sat32(x: int) -> int:
    if x > INT32_MAX:
        return INT32_MAX
    if x < INT32_MIN:
        return INT32_MIN
    return x


def rshift_rne(x: int, k: int) -> int:
    """Arithmetic right shift by k >= 0 with round-to-nearest-even."""
    if k <= 0:
        return x << -k
    q, r = divmod(x, 1 << k)
    half = 1 << (k - 1)
    if r > half or (r == half and (q & 1)):
        q += 1
    return q


def sshift(x: int, k: int) -> int:
    """x * 2**k: exact left shift for k >= 0, RNE right shift for k < 0."""
    if k >= 0:
        return x << k
    return rshift_rne(x, -k)


def sat_add32(a: int, b: int) -> int:
    return sat32(a + b)


def sat_sub32(a: int, b: int) -> int:
    return sat32(a - b)


def quantize_lane(x: int, qshift: int, bits: int = 8) -> int:
    """Saturating RNE quantization of one 32-bit lane to `bits` wide."""
    q = rshift_rne(x, qshift)
    lo = -(1 << (bits - 1))
    hi = (1 << (bits - 1)) - 1
    return lo if q < lo else hi if q > hi else q


def dequantize_lane(q: int, qshift: int) -> int:
    """Inverse of :func:`quantize_lane`; exact left shift, saturating."""
    return sat32(q << qshift)


# --- vector forms (int64 in, int64/int32 out) ---

def _sat32_vec(x: np.ndarray) -> np.ndarray:
    return np.clip(x, INT32_MIN, INT32_MAX)


def rshift_rne_vec(x: np.ndarray, k: int) -> np.ndarray:
    """Vector RNE right shift; x must be an int64 array, k >= 0."""
    if k <= 0:
        return x << -k
    q = x >> k
    r = x - (q << k)
    half = np.int64(1) << (k - 1)
    bump = (r > half) | ((r == half) & ((q & 1) == 1))
    return q + bump


def sshift_vec(x: np.ndarray, k: int) -> np.ndarray:
    if k >= 0:
        return x << k
    return rshift_rne_vec(x, -k)


def sat_add32_vec(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return _sat32_vec(a.astype(np.int64) + b.astype(np.int64)).astype(np.int32)


def sat_sub32_vec(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return _sat32_vec(a.astype(np.int64) - b.astype(np.int64)).astype(np.int32)


def quantize_vec(x: np.ndarray, qshift: int, bits: int = 8) -> np.ndarray:
    """Quantize int32 lanes to signed `bits`-wide lanes (as int64 values)."""
    q = rshift_rne_vec(x.astype(np.int64), qshift)
    lo = -(1 << (bits - 1))
    hi = (1 << (bits - 1)) - 1
    return np.clip(q, lo, hi)


def dequantize_vec(q: np.ndarray, qshift: int) -> np.ndarray:
    return _sat32_vec(q.astype(np.int64) << qshift).astype(np.int32)


def zero_column() -> np.ndarray:
    """Defined fill pattern for never-written cells."""
    return np.zeros(LANES_PER_COLUMN, dtype=np.int32)


def column_to_bytes(col: np.ndarray) -> bytes:
    return col.astype("<i4", copy=False).tobytes()


def bytes_to_column(data: bytes) -> np.ndarray:
    return np.frombuffer(data, dtype="<i4").astype(np.int32)
