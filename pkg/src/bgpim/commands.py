"""Command alphabet and the RFU opcode truth table.

Standard DDR4 commands plus the PIM extensions. PIM opcodes ride on the five
free signals of the reserved command encodings; the logical truth table is
implemented here, the physical pin assignment is a config note only.
"""

from __future__ import annotations

from dataclasses import dataclass

# Command kinds. Integer codes keep the hot path cheap.
ACT = 0
PRE = 1
PREA = 2
RD = 3
WR = 4
MRW = 5
SCALED_READ = 6
PARALLEL_ADD = 7
PARALLEL_SUB = 8
QUANT = 9
DEQUANT = 10
WRITEBACK = 11
QREG_RD = 12   # quantize register -> open column
QREG_WR = 13   # open column -> quantize register
# Buffer-chip column accesses (TensorDimm-style rank-level near-memory
# engine): stay inside the rank, paced at tCCD_S per rank.
BUF_RD = 14
BUF_WR = 15

KIND_NAMES = {
    ACT: "ACT", PRE: "PRE", PREA: "PREA", RD: "RD", WR: "WR", MRW: "MRW",
    SCALED_READ: "ScaledRead", PARALLEL_ADD: "ParallelAdd",
    PARALLEL_SUB: "ParallelSub", QUANT: "Quant", DEQUANT: "Dequant",
    WRITEBACK: "Writeback", QREG_RD: "QRegRd", QREG_WR: "QRegWr",
    BUF_RD: "BufRd", BUF_WR: "BufWr",
}

PIM_KINDS = frozenset({SCALED_READ, PARALLEL_ADD, PARALLEL_SUB, QUANT,
                       DEQUANT, WRITEBACK, QREG_RD, QREG_WR})
# PIM commands that move a column between a bank and the bank-group I/O.
PIM_COLUMN_KINDS = frozenset({SCALED_READ, WRITEBACK, QREG_RD, QREG_WR})
# Register-to-register operations paced only by ALU occupancy.
PIM_ALU_KINDS = frozenset({PARALLEL_ADD, PARALLEL_SUB, QUANT, DEQUANT})
EXTERNAL_COLUMN_KINDS = frozenset({RD, WR})
BUFFER_COLUMN_KINDS = frozenset({BUF_RD, BUF_WR})
COLUMN_KINDS = PIM_COLUMN_KINDS | EXTERNAL_COLUMN_KINDS | BUFFER_COLUMN_KINDS


@dataclass(slots=True)
class DramCommand:
    """One command with its target coordinates and PIM parameters.

    Fields beyond the kind's needs are ignored (e.g. `row` on ALU ops).
    `reg` selects a temporary register (0/1) or QReg direction (0=rd,1=wr);
    `param` carries the scale id or quantize-register chunk index.
    """

    kind: int
    channel: int = 0
    rank: int = 0
    bank_group: int = 0
    bank: int = 0
    row: int = 0
    column: int = 0
    reg: int = 0
    param: int = 0
    payload: object = None   # WR column payload / MRW ScalerEntry

    def name(self) -> str:
        return KIND_NAMES[self.kind]


@dataclass(frozen=True)
class PimOpcode:
    """Decoded RFU signal levels (0=L, 1=H)."""

    op0: int
    op1: int
    param0: int
    param1: int
    src_dst: int

    def __post_init__(self) -> None:
        for name in ("op0", "op1", "param0", "param1", "src_dst"):
            v = getattr(self, name)
            if v not in (0, 1):
                raise ValueError(f"{name} must be a binary level, got {v!r}")


class DecodeError(ValueError):
    """Raised for RFU signal combinations outside the truth table."""


def decode_rfu(signals: PimOpcode) -> tuple[int, int, int]:
    """Map RFU signals to (kind, reg, param).

    Truth table: (L,L)=ScaledRead, (H,L)=Dequant, (H,H)=Quant and the (L,H)
    rows select Writeback / QReg / Add / Sub by the param levels.
    """
    two_bit = (signals.param0 << 1) | signals.param1
    op = (signals.op0, signals.op1)
    if op == (0, 0):
        return SCALED_READ, signals.src_dst, two_bit
    if op == (1, 0):
        return DEQUANT, signals.src_dst, two_bit
    if op == (1, 1):
        return QUANT, signals.src_dst, two_bit
    # op == (0, 1)
    params = (signals.param0, signals.param1)
    if params == (0, 0):
        return WRITEBACK, signals.src_dst, 0
    if params == (1, 0):
        return (QREG_RD if signals.src_dst == 0 else QREG_WR), signals.src_dst, 0
    if params == (1, 1):
        return PARALLEL_ADD, signals.src_dst, 0
    if params == (0, 1):
        return PARALLEL_SUB, signals.src_dst, 0
    raise DecodeError(f"unmapped RFU combination {signals}")


def encode_rfu(kind: int, reg: int = 0, param: int = 0) -> PimOpcode:
    """Inverse of :func:`decode_rfu` for the seven PIM rows."""
    p0, p1 = (param >> 1) & 1, param & 1
    if kind == SCALED_READ:
        return PimOpcode(0, 0, p0, p1, reg)
    if kind == DEQUANT:
        return PimOpcode(1, 0, p0, p1, reg)
    if kind == QUANT:
        return PimOpcode(1, 1, p0, p1, reg)
    if kind == WRITEBACK:
        return PimOpcode(0, 1, 0, 0, reg)
    if kind == QREG_RD:
        return PimOpcode(0, 1, 1, 0, 0)
    if kind == QREG_WR:
        return PimOpcode(0, 1, 1, 0, 1)
    if kind == PARALLEL_ADD:
        return PimOpcode(0, 1, 1, 1, reg)
    if kind == PARALLEL_SUB:
        return PimOpcode(0, 1, 0, 1, reg)
    raise DecodeError(f"kind {KIND_NAMES.get(kind, kind)} is not an RFU command")


def trace_record(cycle: int, cmd: DramCommand) -> str:
    """Fixed-order trace line: cycle ch rank bg bank row col kind pim-params."""
    return (f"{cycle} {cmd.channel} {cmd.rank} {cmd.bank_group} {cmd.bank} "
            f"{cmd.row} {cmd.column} {cmd.name()} {cmd.reg} {cmd.param}")
