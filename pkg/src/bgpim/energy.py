"""IDD-current DRAM energy accounting plus PIM-logic energy.

Charging rules (mA * V * ns = pJ; counters keep joules):

* ACT+PRE pair (charged at ACT):
  VDD * [IDD0*tRC - (IDD3N*tRAS + IDD2N*(tRC - tRAS))] * tCK
* external RD / WR: VDD * (IDD4R|IDD4W - IDD3N) * tBURST * tCK plus the
  off-chip I/O energy (io_pj_per_bit per transferred bit)
* PIM or buffer-chip column access: VDD * (IDDpre - IDD3N) * tBURST * tCK,
  no I/O term
* parallel ops: active submodule power integrated over tPIM; scaled
  reads/writebacks/QReg moves integrate their submodules over tCCD_L
* background: IDD3N while a rank has any open bank, IDD2N otherwise
  (IDD3P/IDD2P instead when the optional power-down policy is on); the PIM
  units' static total rides on background when enabled.

Energy recomputed from a command trace uses the identical accrual order, so
online counters and the replay agree exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import commands as c
from .params import DeviceTopology, EnergyConfig, TimingParams

PJ = 1e-12


@dataclass
class EnergyCounters:
    act_pre: float = 0.0
    external_rd_wr: float = 0.0
    internal_rd_wr: float = 0.0
    pim_logic: float = 0.0
    background: float = 0.0
    io: float = 0.0

    @property
    def total(self) -> float:
        return (self.act_pre + self.external_rd_wr + self.internal_rd_wr
                + self.pim_logic + self.background + self.io)

    def as_dict(self) -> dict[str, float]:
        return {"act_pre": self.act_pre, "external_rd_wr": self.external_rd_wr,
                "internal_rd_wr": self.internal_rd_wr,
                "pim_logic": self.pim_logic, "background": self.background,
                "io": self.io, "total": self.total}


class EnergyMeter:
    """Online per-command and background energy accrual."""

    def __init__(self, timing: TimingParams, topology: DeviceTopology,
                 config: EnergyConfig | None = None,
                 n_pim_units: int | None = None,
                 powerdown: bool = False):
        self.timing = timing
        self.topology = topology
        self.config = config or EnergyConfig()
        self.n_pim_units = (topology.total_bank_groups
                            if n_pim_units is None else n_pim_units)
        self.powerdown = powerdown
        self.counters = EnergyCounters()
        self.act_count = 0
        n_ranks = topology.total_ranks
        self._rank_open = [False] * n_ranks
        self._rank_last = [0] * n_ranks
        self._precompute()

    def _precompute(self) -> None:
        t, cur, pw = self.timing, self.config.currents, self.config.pim_power
        tck = t.tCK
        self._e_act = (cur.VDD * (cur.IDD0 * t.tRC
                                  - (cur.IDD3N * t.tRAS
                                     + cur.IDD2N * (t.tRC - t.tRAS))) * tck * PJ)
        self._e_rd = cur.VDD * (cur.IDD4R - cur.IDD3N) * t.tBURST * tck * PJ
        self._e_wr = cur.VDD * (cur.IDD4W - cur.IDD3N) * t.tBURST * tck * PJ
        self._e_int = cur.VDD * (cur.IDDpre - cur.IDD3N) * t.tBURST * tck * PJ
        self._e_io = (self.config.io_pj_per_bit
                      * self.topology.column_bytes * 8 * PJ)
        alu_ns = t.tPIM * tck
        col_ns = t.tCCD_L * tck
        # active submodules per op (mW * ns = pJ)
        self._e_pim = {
            c.PARALLEL_ADD: (pw.adder + 2 * pw.register) * alu_ns * PJ,
            c.PARALLEL_SUB: (pw.adder + 2 * pw.register) * alu_ns * PJ,
            c.QUANT: (pw.quantize + 2 * pw.register) * alu_ns * PJ,
            c.DEQUANT: (pw.dequantize + 2 * pw.register) * alu_ns * PJ,
            c.SCALED_READ: (pw.scaler + pw.register) * col_ns * PJ,
            c.WRITEBACK: pw.register * col_ns * PJ,
            c.QREG_RD: pw.register * col_ns * PJ,
            c.QREG_WR: pw.register * col_ns * PJ,
        }
        open_ma = cur.IDD3P if self.powerdown else cur.IDD3N
        idle_ma = cur.IDD2P if self.powerdown else cur.IDD2N
        self._bg_open = cur.VDD * open_ma * tck * PJ     # per rank per cycle
        self._bg_idle = cur.VDD * idle_ma * tck * PJ
        self._pim_static = (pw.unit_total * 1e-3 * self.n_pim_units * tck * 1e-9
                            if self.config.pim_static_power else 0.0)

    # -- hooks called by the device --------------------------------------

    def command(self, cmd: c.DramCommand, cycle: int, device=None) -> None:
        ctr = self.counters
        kind = cmd.kind
        if kind == c.ACT:
            ctr.act_pre += self._e_act
            self.act_count += 1
        elif kind == c.RD:
            ctr.external_rd_wr += self._e_rd
            ctr.io += self._e_io
        elif kind == c.WR:
            ctr.external_rd_wr += self._e_wr
            ctr.io += self._e_io
        elif kind in c.PIM_COLUMN_KINDS:
            ctr.internal_rd_wr += self._e_int
            ctr.pim_logic += self._e_pim[kind]
        elif kind in c.PIM_ALU_KINDS:
            ctr.pim_logic += self._e_pim[kind]
        elif kind in c.BUFFER_COLUMN_KINDS:
            ctr.internal_rd_wr += self._e_int

    def rank_state_change(self, rank: int, cycle: int, open_: bool) -> None:
        span = cycle - self._rank_last[rank]
        rate = self._bg_open if self._rank_open[rank] else self._bg_idle
        self.counters.background += span * rate
        self._rank_open[rank] = open_
        self._rank_last[rank] = cycle

    def finalize(self, end_cycle: int) -> None:
        for rank in range(len(self._rank_open)):
            self.rank_state_change(rank, end_cycle, self._rank_open[rank])
        self.counters.background += self._pim_static * end_cycle


def recompute_from_trace(trace, timing: TimingParams, topology: DeviceTopology,
                         config: EnergyConfig, end_cycle: int,
                         n_pim_units: int | None = None,
                         powerdown: bool = False) -> EnergyCounters:
    """Replay a command trace through a fresh meter (the offline check)."""
    meter = EnergyMeter(timing, topology, config, n_pim_units, powerdown)
    open_rows: dict[int, set[int]] = {}
    for cycle, cmd in trace:
        rank = cmd.channel * topology.ranks_per_channel + cmd.rank
        if cmd.kind == c.ACT:
            bank = (rank * topology.bank_groups_per_rank + cmd.bank_group) \
                * topology.banks_per_bank_group + cmd.bank
            opened = open_rows.setdefault(rank, set())
            if not opened:
                meter.rank_state_change(rank, cycle, open_=True)
            opened.add(bank)
        elif cmd.kind == c.PRE:
            bank = (rank * topology.bank_groups_per_rank + cmd.bank_group) \
                * topology.banks_per_bank_group + cmd.bank
            opened = open_rows.get(rank)
            if opened and bank in opened:
                opened.discard(bank)
                if not opened:
                    meter.rank_state_change(rank, cycle, open_=False)
        elif cmd.kind == c.PREA:
            opened = open_rows.get(rank)
            if opened:
                opened.clear()
                meter.rank_state_change(rank, cycle, open_=False)
        meter.command(cmd, cycle)
    meter.finalize(end_cycle)
    return meter.counters


def report_breakdown(counters: EnergyCounters,
                     baseline: EnergyCounters | None = None) -> list[dict]:
    """Component rows with ratios against a named baseline run (if given)."""
    rows = []
    base = baseline.as_dict() if baseline else None
    for name, joules in counters.as_dict().items():
        row = {"component": name, "joules": joules}
        if base is not None:
            row["normalized"] = joules / base[name] if base[name] else float("inf")
        rows.append(row)
    return rows
