"""Per-bank-group PIM unit: registers, scaler table, parallel ALU datapath.

Each unit owns two 64-byte temporary registers (16 lanes of int32), one
64-byte quantize register, and a view of the globally programmed scaler
table. Functional effects are applied at command issue; streams are compiled
in order per bank group, which keeps issue order and dataflow consistent.
"""

from __future__ import annotations

import numpy as np

from . import commands as cmds
from .fixedpoint import (LANES_PER_COLUMN, dequantize_vec, quantize_vec,
                         sat_add32_vec, sat_sub32_vec)
from .scaling import BYPASS, SCALER_TABLE_SIZE, ScalerEntry


class ScalerTable:
    """Four globally programmed scale factors, replaced via MRW."""

    def __init__(self, entries: list[ScalerEntry] | None = None):
        self.entries: list[ScalerEntry] = list(entries or [BYPASS] * SCALER_TABLE_SIZE)
        if len(self.entries) != SCALER_TABLE_SIZE:
            raise ValueError(f"scaler table holds exactly {SCALER_TABLE_SIZE} entries")

    def program(self, scale_id: int, entry: ScalerEntry) -> None:
        if not 0 <= scale_id < SCALER_TABLE_SIZE:
            raise ValueError(f"scale id {scale_id} out of range")
        self.entries[scale_id] = entry


class PimUnitState:
    """Register file of one PIM unit; contents change only via decoded commands."""

    __slots__ = ("t", "qreg", "alu_busy_until")

    def __init__(self) -> None:
        self.t = [np.zeros(LANES_PER_COLUMN, dtype=np.int32),
                  np.zeros(LANES_PER_COLUMN, dtype=np.int32)]
        self.qreg = np.zeros(64, dtype=np.int8)
        self.alu_busy_until = 0

    def qreg_chunk_lanes(self, chunk: int, ratio: int, bits: int) -> np.ndarray:
        """Read chunk `chunk` of the QReg as `64/ratio/…` low-precision lanes."""
        nbytes = 64 // ratio
        raw = self.qreg[chunk * nbytes:(chunk + 1) * nbytes].tobytes()
        dtype = {8: "<i1", 16: "<i2", 32: "<i4"}[bits]
        return np.frombuffer(raw, dtype=dtype).astype(np.int64)

    def qreg_store_chunk(self, chunk: int, ratio: int, bits: int,
                         lanes: np.ndarray) -> None:
        nbytes = 64 // ratio
        dtype = {8: "<i1", 16: "<i2", 32: "<i4"}[bits]
        raw = np.asarray(lanes).astype(dtype).tobytes()
        self.qreg[chunk * nbytes:(chunk + 1) * nbytes] = np.frombuffer(raw, dtype=np.int8)


def execute_pim(cmd: cmds.DramCommand, unit: PimUnitState, device) -> None:
    """Apply the functional effect of a decoded PIM command.

    Timing has already been validated by the device model; bank column access
    goes through ``device.column_io`` so the internal-bandwidth counter and
    closed-row protocol checks stay in one place.
    """
    kind = cmd.kind
    if kind == cmds.SCALED_READ:
        col = device.column_io(cmd, write=False)
        entry = device.scaler_table.entries[cmd.param]
        unit.t[cmd.reg] = entry.apply_vec(col)
    elif kind == cmds.WRITEBACK:
        device.column_io(cmd, write=True, payload=unit.t[cmd.reg])
    elif kind == cmds.PARALLEL_ADD:
        unit.t[cmd.reg] = sat_add32_vec(unit.t[0], unit.t[1])
    elif kind == cmds.PARALLEL_SUB:
        unit.t[cmd.reg] = sat_sub32_vec(unit.t[0], unit.t[1])
    elif kind == cmds.QUANT:
        ratio = device.quant_ratio
        lanes = quantize_vec(unit.t[cmd.reg], device.qshift, bits=32 // ratio)
        unit.qreg_store_chunk(cmd.param, ratio, 32 // ratio, lanes)
    elif kind == cmds.DEQUANT:
        ratio = device.quant_ratio
        lanes = unit.qreg_chunk_lanes(cmd.param, ratio, 32 // ratio)
        unit.t[cmd.reg] = dequantize_vec(lanes, device.qshift)
    elif kind == cmds.QREG_WR:
        col = device.column_io(cmd, write=False)
        unit.qreg = np.frombuffer(col.astype("<i4").tobytes(), dtype=np.int8).copy()
    elif kind == cmds.QREG_RD:
        col = np.frombuffer(unit.qreg.tobytes(), dtype="<i4").astype(np.int32)
        device.column_io(cmd, write=True, payload=col)
    else:
        raise ValueError(f"not a PIM kind: {cmd.name()}")
