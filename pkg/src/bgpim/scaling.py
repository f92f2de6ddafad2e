"""Shift-and-add scaler entries of the form +/-(2^n +/- 2^m).

Each per-bank-group scaler table pins four such entries; hyperparameters like
learning rate or momentum are fitted onto the nearest representable value.
A dedicated bypass flag provides the exact identity (scaling by 1.0), which a
two-term sum cannot always express more cheaply.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fixedpoint import INT32_MAX, INT32_MIN, sshift, sshift_vec

EXP_MIN = -15
EXP_MAX = 15
SCALER_TABLE_SIZE = 4


@dataclass(frozen=True)
class ScalerEntry:
    """One programmable scale factor: outer_sign * (2^n inner_op 2^m)."""

    outer_sign: int = 1      # +1 or -1
    n: int = 0
    inner_op: int = 1        # +1 for 2^n + 2^m, -1 for 2^n - 2^m
    m: int = -1
    bypass: bool = False

    def __post_init__(self) -> None:
        if self.bypass:
            return
        if self.outer_sign not in (1, -1) or self.inner_op not in (1, -1):
            raise ValueError("signs must be +1 or -1")
        if not (EXP_MIN <= self.m < self.n <= EXP_MAX):
            raise ValueError(f"require {EXP_MIN} <= m < n <= {EXP_MAX}, got n={self.n} m={self.m}")

    @property
    def value(self) -> float:
        if self.bypass:
            return 1.0
        return self.outer_sign * (2.0 ** self.n + self.inner_op * 2.0 ** self.m)

    def apply(self, lane: int) -> int:
        """Scale one 32-bit lane; RNE on right shifts, saturating result."""
        if self.bypass:
            return lane
        y = sshift(lane, self.n) + self.inner_op * sshift(lane, self.m)
        y *= self.outer_sign
        return INT32_MAX if y > INT32_MAX else INT32_MIN if y < INT32_MIN else y

    def apply_vec(self, lanes: np.ndarray) -> np.ndarray:
        """Vector form over an int array; returns int32 lanes."""
        if self.bypass:
            return lanes.astype(np.int32, copy=True)
        x = lanes.astype(np.int64)
        y = sshift_vec(x, self.n) + self.inner_op * sshift_vec(x, self.m)
        if self.outer_sign < 0:
            y = -y
        return np.clip(y, INT32_MIN, INT32_MAX).astype(np.int32)


BYPASS = ScalerEntry(bypass=True)


def fit_scaler(target: float) -> ScalerEntry:
    """Best entry for `target` by exhaustive search over the exponent range.

    Ties break toward smaller |n| then smaller |m|; an exact 1.0 returns the
    bypass entry. target must be nonzero and finite (the table cannot encode
    a zero factor).
    """
    if not np.isfinite(target) or target == 0.0:
        raise ValueError(f"cannot fit scaler for target {target!r}")
    if target == 1.0:
        return BYPASS
    sign = 1 if target > 0 else -1
    mag = abs(target)
    best: tuple[float, int, int] | None = None
    best_entry: ScalerEntry | None = None
    for n in range(EXP_MIN, EXP_MAX + 1):
        for m in range(EXP_MIN, n):
            for op in (1, -1):
                value = 2.0 ** n + op * 2.0 ** m
                key = (abs(value - mag), abs(n), abs(m))
                if best is None or key < best:
                    best = key
                    best_entry = ScalerEntry(sign, n, op, m)
    assert best_entry is not None
    return best_entry
