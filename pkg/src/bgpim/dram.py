"""Rank-level DDR4 device model with PIM timing extensions.

Tracks per-bank row/timer state, per-bank-group local I/O and ALU occupancy,
per-rank CAS/ACT history, the shared data bus, and command-bus slots, and
enforces the full constraint table. Cell contents are functional: a 64-byte
column is 16 int32 lanes, never-written cells read as zeros.

Issuing a command earlier than ``earliest_issue`` raises
:class:`TimingViolation` carrying the violated parameter name; that error
surface is what the brute-force schedule checker in the test suite compares
against.
"""

from __future__ import annotations

import numpy as np

from . import commands as cmds
from .fixedpoint import LANES_PER_COLUMN
from .params import DeviceTopology, TimingParams
from .pim import PimUnitState, ScalerTable, execute_pim

NEG = -(1 << 40)

_ZERO_COLUMN = np.zeros(LANES_PER_COLUMN, dtype=np.int32)
_ZERO_COLUMN.setflags(write=False)


class TimingViolation(Exception):
    def __init__(self, param: str, cmd: cmds.DramCommand, cycle: int, earliest: int):
        self.param = param
        self.cmd = cmd
        self.cycle = cycle
        self.earliest = earliest
        super().__init__(f"{cmd.name()} at {cycle} violates {param} (earliest legal {earliest})")


class ProtocolError(Exception):
    """Row-state misuse: column op on a closed/mismatched row, ACT on open bank."""


class StructureError(ValueError):
    """Malformed command target for the configured topology."""


class DeviceState:
    """One memory system instance (all channels/ranks) plus its PIM units."""

    def __init__(self, topology: DeviceTopology | None = None,
                 timing: TimingParams | None = None,
                 scaler_table: ScalerTable | None = None,
                 bus_mode: str = "channel",
                 pim_scope: str = "bankgroup",
                 qshift: int = 16,
                 quant_ratio: int = 4,
                 energy=None,
                 trace: bool = False):
        self.topology = topology or DeviceTopology()
        self.timing = timing or TimingParams()
        self.scaler_table = scaler_table or ScalerTable()
        if bus_mode not in ("channel", "rank"):
            raise ValueError("bus_mode must be 'channel' or 'rank'")
        if pim_scope not in ("bankgroup", "bank"):
            raise ValueError("pim_scope must be 'bankgroup' or 'bank'")
        self.bus_mode = bus_mode
        self.pim_scope = pim_scope
        self.qshift = qshift
        self.quant_ratio = quant_ratio
        self.energy = energy
        self.trace: list[tuple[int, cmds.DramCommand]] | None = [] if trace else None

        top = self.topology
        n_banks = top.total_banks
        n_bgs = top.total_bank_groups
        n_ranks = top.total_ranks

        # per bank
        self.bank_open_row = [-1] * n_banks
        self.bank_last_act = [NEG] * n_banks
        self.bank_last_read = [NEG] * n_banks      # RD / ScaledRead / QRegWr
        self.bank_wr_recovery = [NEG] * n_banks    # cycle tWR counts from
        self.bank_last_pre = [NEG] * n_banks
        self.bank_local_io = [NEG] * n_banks       # per-bank PIM pacing (bank scope)
        # per bank group
        self.bg_local_io = [NEG] * n_bgs           # column-op pacing (tCCD_L)
        self.bg_last_act = [NEG] * n_bgs           # tRRD_L
        # per rank
        self.rank_last_ext_cas = [NEG] * n_ranks   # tCCD_S
        self.rank_last_buf_cas = [NEG] * n_ranks   # buffer-chip access pacing
        self.rank_last_act = [NEG] * n_ranks       # tRRD_S
        self.rank_act_window = [[NEG] * 4 for _ in range(n_ranks)]  # tFAW
        self.rank_open_banks = [0] * n_ranks
        # per channel
        self.data_bus_free = [0] * top.channels
        self.data_bus_last_rank = [-1] * top.channels
        # command buses
        self.n_buses = top.channels if bus_mode == "channel" else n_ranks
        self.cmd_bus_last = [-1] * self.n_buses
        self.cmd_bus_issued = [0] * self.n_buses

        n_units = n_bgs if pim_scope == "bankgroup" else n_banks
        self.pim_units = [PimUnitState() for _ in range(n_units)]

        self.cells: dict[tuple[int, int, int], np.ndarray] = {}

        # counters
        self.internal_bytes = 0
        self.external_bytes = 0
        self.data_bus_busy_cycles = 0
        self.cmd_counts = dict.fromkeys(cmds.KIND_NAMES.values(), 0)
        self.last_issue_cycle = 0

    # --- index helpers -------------------------------------------------

    def rank_index(self, cmd: cmds.DramCommand) -> int:
        return cmd.channel * self.topology.ranks_per_channel + cmd.rank

    def bg_index(self, cmd: cmds.DramCommand) -> int:
        return (self.rank_index(cmd) * self.topology.bank_groups_per_rank
                + cmd.bank_group)

    def bank_index(self, cmd: cmds.DramCommand) -> int:
        return self.bg_index(cmd) * self.topology.banks_per_bank_group + cmd.bank

    def bus_index(self, cmd: cmds.DramCommand) -> int:
        return cmd.channel if self.bus_mode == "channel" else self.rank_index(cmd)

    def pim_unit(self, cmd: cmds.DramCommand) -> PimUnitState:
        idx = self.bg_index(cmd) if self.pim_scope == "bankgroup" else self.bank_index(cmd)
        return self.pim_units[idx]

    def validate_target(self, cmd: cmds.DramCommand) -> None:
        top = self.topology
        if not (0 <= cmd.channel < top.channels
                and 0 <= cmd.rank < top.ranks_per_channel
                and 0 <= cmd.bank_group < top.bank_groups_per_rank
                and 0 <= cmd.bank < top.banks_per_bank_group):
            raise StructureError(f"target out of range: {cmd}")
        if cmd.kind in (cmds.ACT, *cmds.COLUMN_KINDS):
            if not (0 <= cmd.row < top.rows_per_bank):
                raise StructureError(f"row out of range: {cmd}")
        if cmd.kind in cmds.COLUMN_KINDS:
            if not (0 <= cmd.column < top.columns_per_row):
                raise StructureError(f"column out of range: {cmd}")
        if cmd.kind in (cmds.QUANT, cmds.DEQUANT) and not 0 <= cmd.param < 4:
            raise StructureError(f"quantize chunk out of range: {cmd}")
        if cmd.kind == cmds.SCALED_READ and not 0 <= cmd.param < 4:
            raise StructureError(f"scale id out of range: {cmd}")

    # --- timing --------------------------------------------------------

    def _refresh_bound(self, cycle: int) -> tuple[int, str]:
        t = self.timing
        if t.tREFI is None or t.tRFC is None:
            return NEG, ""
        pos = cycle % t.tREFI
        if pos < t.tRFC:
            return cycle + (t.tRFC - pos), "tRFC"
        return NEG, ""

    def earliest_issue(self, cmd: cmds.DramCommand, now: int) -> int:
        return self._earliest(cmd, now)[0]

    def earliest_issue_named(self, cmd: cmds.DramCommand, now: int) -> tuple[int, str]:
        return self._earliest(cmd, now)

    def _earliest(self, cmd: cmds.DramCommand, now: int) -> tuple[int, str]:
        """First cycle >= now at which `cmd` violates no constraint."""
        t = self.timing
        kind = cmd.kind
        best, name = now, ""

        bus = self.bus_index(cmd)
        c = self.cmd_bus_last[bus] + 1
        if c > best:
            best, name = c, "cmdBus"

        if kind != cmds.MRW:
            c, n = self._refresh_bound(best)
            if c > best:
                best, name = c, n

        if kind == cmds.MRW:
            return best, name

        rank = self.rank_index(cmd)

        if kind == cmds.ACT:
            bank = self.bank_index(cmd)
            if self.bank_open_row[bank] >= 0:
                raise ProtocolError(f"ACT to bank with open row: {cmd}")
            c = self.bank_last_act[bank] + t.tRC
            if c > best:
                best, name = c, "tRC"
            c = self.bank_last_pre[bank] + t.tRP
            if c > best:
                best, name = c, "tRP"
            c = self.rank_last_act[rank] + t.scaled_tRRD(False)
            if c > best:
                best, name = c, "tRRD_S"
            c = self.bg_last_act[self.bg_index(cmd)] + t.scaled_tRRD(True)
            if c > best:
                best, name = c, "tRRD_L"
            c = self.rank_act_window[rank][0] + t.scaled_tFAW()
            if c > best:
                best, name = c, "tFAW"
            return best, name

        if kind == cmds.PRE:
            bank = self.bank_index(cmd)
            if self.bank_open_row[bank] < 0:
                return best, name   # precharging an idle bank is a legal no-op
            return self._pre_bound(bank, best, name)

        if kind == cmds.PREA:
            base = self.bank_index(cmds.DramCommand(cmds.PRE, cmd.channel, cmd.rank, 0, 0))
            nb = self.topology.banks_per_bank_group * self.topology.bank_groups_per_rank
            for bank in range(base, base + nb):
                if self.bank_open_row[bank] >= 0:
                    best, name = self._pre_bound(bank, best, name)
            return best, name

        if kind in cmds.PIM_ALU_KINDS:
            unit = self.pim_unit(cmd)
            if unit.alu_busy_until > best:
                best, name = unit.alu_busy_until, "tPIM"
            return best, name

        # column commands (external RD/WR, PIM column ops, buffer-chip ops)
        bank = self.bank_index(cmd)
        if self.bank_open_row[bank] != cmd.row:
            raise ProtocolError(f"column op to closed or mismatched row: {cmd} "
                                f"(open {self.bank_open_row[bank]})")
        c = self.bank_last_act[bank] + t.tRCD
        if c > best:
            best, name = c, "tRCD"

        if kind in cmds.BUFFER_COLUMN_KINDS:
            # rank-internal engine: rank-level pacing only, no channel bus
            c = self.rank_last_buf_cas[rank] + t.tCCD_S
            if c > best:
                best, name = c, "tCCD_S"
            return best, name

        if kind in cmds.PIM_COLUMN_KINDS and self.pim_scope == "bank":
            c = self.bank_local_io[bank] + t.tCCD_L
            if c > best:
                best, name = c, "tCCD_L"
            return best, name

        c = self.bg_local_io[self.bg_index(cmd)] + t.tCCD_L
        if c > best:
            best, name = c, "tCCD_L"

        if kind in cmds.EXTERNAL_COLUMN_KINDS:
            c = self.rank_last_ext_cas[rank] + t.tCCD_S
            if c > best:
                best, name = c, "tCCD_S"
            # data-bus occupancy: burst must start at/after the bus frees,
            # plus a rank-switch gap when ownership changes.
            lat = t.tCL if kind == cmds.RD else t.tCWL
            free = self.data_bus_free[cmd.channel]
            switch = (self.data_bus_last_rank[cmd.channel] not in (-1, rank))
            start = free + (t.tRR if switch else 0)
            c = start - lat
            if c > best:
                best, name = c, ("tRR" if switch else "dataBus")
        return best, name

    def _pre_bound(self, bank: int, best: int, name: str) -> tuple[int, str]:
        t = self.timing
        c = self.bank_last_act[bank] + t.tRAS
        if c > best:
            best, name = c, "tRAS"
        c = self.bank_last_read[bank] + t.tRTP
        if c > best:
            best, name = c, "tRTP"
        c = self.bank_wr_recovery[bank] + t.tWR
        if c > best:
            best, name = c, "tWR"
        return best, name

    # --- application ---------------------------------------------------

    def apply_command(self, cmd: cmds.DramCommand, cycle: int):
        """Validate timing and apply `cmd` at `cycle` (the public, checked path)."""
        self.validate_target(cmd)
        earliest, param = self._earliest(cmd, cycle)
        if cycle < earliest:
            raise TimingViolation(param or "cmdBus", cmd, cycle, earliest)
        return self.issue(cmd, cycle)

    def issue(self, cmd: cmds.DramCommand, cycle: int):
        """Apply `cmd` at `cycle`; caller guarantees timing legality."""
        t = self.timing
        kind = cmd.kind
        bus = self.bus_index(cmd)
        self.cmd_bus_last[bus] = cycle
        self.cmd_bus_issued[bus] += 1
        self.cmd_counts[cmds.KIND_NAMES[kind]] += 1
        self.last_issue_cycle = cycle
        if self.trace is not None:
            self.trace.append((cycle, cmd))
        result = None

        if kind == cmds.ACT:
            bank = self.bank_index(cmd)
            rank = self.rank_index(cmd)
            self.bank_open_row[bank] = cmd.row
            self.bank_last_act[bank] = cycle
            self.bg_last_act[self.bg_index(cmd)] = cycle
            self.rank_last_act[rank] = cycle
            w = self.rank_act_window[rank]
            w.pop(0)
            w.append(cycle)
            self.rank_open_banks[rank] += 1
            if self.rank_open_banks[rank] == 1 and self.energy:
                self.energy.rank_state_change(rank, cycle, open_=True)
        elif kind == cmds.PRE:
            self._close_bank(self.bank_index(cmd), self.rank_index(cmd), cycle)
        elif kind == cmds.PREA:
            rank = self.rank_index(cmd)
            base = rank * self.topology.bank_groups_per_rank * self.topology.banks_per_bank_group
            nb = self.topology.bank_groups_per_rank * self.topology.banks_per_bank_group
            for bank in range(base, base + nb):
                if self.bank_open_row[bank] >= 0:
                    self._close_bank(bank, rank, cycle)
        elif kind == cmds.RD or kind == cmds.WR:
            bank = self.bank_index(cmd)
            rank = self.rank_index(cmd)
            ch = cmd.channel
            if kind == cmds.RD:
                result = self.column_io(cmd, write=False)
                self.bank_last_read[bank] = cycle
                lat = t.tCL
            else:
                self.column_io(cmd, write=True, payload=cmd.payload)
                lat = t.tCWL
                self.bank_wr_recovery[bank] = cycle + t.tCWL + t.tBURST
            self.external_bytes += self.topology.column_bytes
            self.bg_local_io[self.bg_index(cmd)] = cycle
            self.rank_last_ext_cas[rank] = cycle
            self.data_bus_free[ch] = cycle + lat + t.tBURST
            self.data_bus_last_rank[ch] = rank
            self.data_bus_busy_cycles += t.tBURST
        elif kind == cmds.BUF_RD or kind == cmds.BUF_WR:
            bank = self.bank_index(cmd)
            rank = self.rank_index(cmd)
            if kind == cmds.BUF_RD:
                result = self.column_io(cmd, write=False)
                self.bank_last_read[bank] = cycle
            else:
                self.column_io(cmd, write=True, payload=cmd.payload)
                self.bank_wr_recovery[bank] = cycle
            self.rank_last_buf_cas[rank] = cycle
        elif kind == cmds.MRW:
            self.scaler_table.program(cmd.param, cmd.payload)
        else:  # PIM kinds
            unit = self.pim_unit(cmd)
            bank = self.bank_index(cmd)
            if kind in cmds.PIM_ALU_KINDS:
                unit.alu_busy_until = cycle + t.tPIM
            else:
                if self.pim_scope == "bank":
                    self.bank_local_io[bank] = cycle
                else:
                    self.bg_local_io[self.bg_index(cmd)] = cycle
                if kind in (cmds.SCALED_READ, cmds.QREG_WR):
                    self.bank_last_read[bank] = cycle
                else:
                    self.bank_wr_recovery[bank] = cycle
            execute_pim(cmd, unit, self)

        if self.energy:
            self.energy.command(cmd, cycle, self)
        return result

    def _close_bank(self, bank: int, rank: int, cycle: int) -> None:
        self.bank_open_row[bank] = -1
        self.bank_last_pre[bank] = cycle
        self.rank_open_banks[rank] -= 1
        if self.rank_open_banks[rank] == 0 and self.energy:
            self.energy.rank_state_change(rank, cycle, open_=False)

    # --- functional storage ---------------------------------------------

    def column_io(self, cmd: cmds.DramCommand, write: bool,
                  payload: np.ndarray | None = None):
        """Read or write one open-row column; counts internal bandwidth.

        Both external RD/WR and PIM column paths land here. A write with no
        payload moves traffic without changing cell contents (used by
        synthetic streams whose data is irrelevant).
        """
        bank = self.bank_index(cmd)
        if self.bank_open_row[bank] != cmd.row:
            raise ProtocolError(f"column access to closed row: {cmd}")
        self.internal_bytes += self.topology.column_bytes
        key = (bank, cmd.row, cmd.column)
        if write:
            if payload is not None:
                self.cells[key] = payload
            return None
        return self.cells.get(key, _ZERO_COLUMN)

    def peek_column(self, channel: int, rank: int, bank_group: int, bank: int,
                    row: int, column: int) -> np.ndarray:
        """Inspect cell contents without simulating traffic (test/report API)."""
        c = cmds.DramCommand(cmds.RD, channel, rank, bank_group, bank, row, column)
        return self.cells.get((self.bank_index(c), row, column), _ZERO_COLUMN)

    def poke_column(self, channel: int, rank: int, bank_group: int, bank: int,
                    row: int, column: int, payload: np.ndarray) -> None:
        """Preload cell contents (initial memory image), no traffic counted."""
        c = cmds.DramCommand(cmds.WR, channel, rank, bank_group, bank, row, column)
        self.cells[(self.bank_index(c), row, column)] = payload.astype(np.int32)

    # --- reporting -------------------------------------------------------

    def counters(self) -> dict:
        return {
            "internal_bytes": self.internal_bytes,
            "external_bytes": self.external_bytes,
            "data_bus_busy_cycles": self.data_bus_busy_cycles,
            "cmd_bus_issued": list(self.cmd_bus_issued),
            "cmd_counts": dict(self.cmd_counts),
        }

    def dump_trace(self, path: str) -> None:
        if self.trace is None:
            raise ValueError("trace collection was not enabled")
        with open(path, "w") as fh:
            for cycle, cmd in self.trace:
                fh.write(cmds.trace_record(cycle, cmd) + "\n")
