"""Compiles parameter-update jobs into per-bank-group PIM command streams.

A momentum+decay update of one column is exactly nine commands:

    SR(g,-eta->T0); SR(v,alpha->T1); Add(T1); SR(theta,-eta*beta->T0);
    Add(T0); WB(T0->v); SR(theta,bypass->T1); Add(T1); WB(T1->theta)

Mixed precision wraps each row range with a dequantization prologue (load a
quantized-gradient column into the QReg, then ratio x (Dequant, Writeback))
and a symmetric quantization epilogue with a QReg flush every `ratio`
columns. Rows are opened once per range and shared across the three
sub-passes, so activation counts match a non-PIM read-modify-write over the
same arrays.

Streams for different bank groups are fully independent; in per-bank PIM
scope (the per-bank unit variant) streams are split per bank instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import commands as c
from .oracle import MOMENTUM, MOMENTUM_DECAY, SGD, OptimizerSpec
from .params import DeviceTopology
from .placement import ArrayPlacement, ArraySpec, PlacementError, allocate_arrays
from .scaling import BYPASS

# scaler table slots
SCALE_NEG_ETA = 0
SCALE_ALPHA = 1
SCALE_NEG_ETA_BETA = 2
SCALE_BYPASS = 3

# standard bank assignment: theta/v/g pairwise distinct; the quantized
# arrays ride along in banks their sub-pass does not conflict with.
BANK_THETA, BANK_V, BANK_G, BANK_QG = 0, 1, 2, 3
BANK_QTHETA = 2   # shares g's bank; g is precharged before the quant pass


@dataclass
class UpdateJob:
    optimizer: OptimizerSpec
    params: int
    precision_low: int = 1
    precision_high: int = 4
    aos: bool = False

    def __post_init__(self) -> None:
        if self.precision_low > self.precision_high:
            raise ValueError("precision_low must be <= precision_high")
        if self.precision_high % self.precision_low:
            raise ValueError("precision ratio must be integral")

    @property
    def ratio(self) -> int:
        return self.precision_high // self.precision_low

    @property
    def mixed(self) -> bool:
        return self.ratio > 1

    def array_names(self) -> list[str]:
        names = ["theta"]
        if self.optimizer.kind in (MOMENTUM, MOMENTUM_DECAY):
            names.append("v")
        names.append("g")
        return names


@dataclass
class JobStream:
    """One in-order command stream (per bank group, or per bank in AoS-PB)."""

    channel: int
    rank: int
    bank_group: int
    commands: list[c.DramCommand] = field(default_factory=list)


def plan_update_arrays(job: UpdateJob, topology: DeviceTopology
                       ) -> ArrayPlacement:
    """Allocate the arrays one update job touches."""
    needed = len(job.array_names())
    if needed > topology.banks_per_bank_group:
        raise PlacementError("optimizer needs more distinct banks than available")
    if job.aos:
        fields = len(job.array_names()) + (2 if job.mixed else 0)
        specs = [ArraySpec("aos", job.params, 4, bank=0, layout="struct",
                           fields=fields, field=0, ratio=job.ratio)]
        return allocate_arrays(specs, topology)
    specs = [ArraySpec("theta", job.params, 4, bank=BANK_THETA)]
    if "v" in job.array_names():
        specs.append(ArraySpec("v", job.params, 4, bank=BANK_V))
    specs.append(ArraySpec("g", job.params, 4, bank=BANK_G))
    if job.mixed:
        specs.append(ArraySpec("q_g", job.params, job.precision_low,
                               bank=BANK_QG, layout="packed", ratio=job.ratio))
        specs.append(ArraySpec("q_theta", job.params, job.precision_low,
                               bank=BANK_QTHETA, layout="packed", ratio=job.ratio))
    return allocate_arrays(specs, topology)


def scaler_program_commands(spec: OptimizerSpec) -> list[c.DramCommand]:
    """MRW sequence installing the job's scale factors."""
    table = [(SCALE_NEG_ETA, spec.neg_eta), (SCALE_ALPHA, spec.alpha),
             (SCALE_NEG_ETA_BETA, spec.neg_eta_beta), (SCALE_BYPASS, BYPASS)]
    return [c.DramCommand(c.MRW, param=sid, payload=entry) for sid, entry in table]


def _update_template(kind: str) -> list[tuple]:
    """Per-column command skeleton: (kind, array, scale/param, reg)."""
    if kind == MOMENTUM_DECAY:
        return [
            (c.SCALED_READ, "g", SCALE_NEG_ETA, 0),
            (c.SCALED_READ, "v", SCALE_ALPHA, 1),
            (c.PARALLEL_ADD, None, 0, 1),
            (c.SCALED_READ, "theta", SCALE_NEG_ETA_BETA, 0),
            (c.PARALLEL_ADD, None, 0, 0),
            (c.WRITEBACK, "v", 0, 0),
            (c.SCALED_READ, "theta", SCALE_BYPASS, 1),
            (c.PARALLEL_ADD, None, 0, 1),
            (c.WRITEBACK, "theta", 0, 1),
        ]
    if kind == MOMENTUM:
        return [
            (c.SCALED_READ, "g", SCALE_NEG_ETA, 0),
            (c.SCALED_READ, "v", SCALE_ALPHA, 1),
            (c.PARALLEL_ADD, None, 0, 1),
            (c.WRITEBACK, "v", 0, 1),
            (c.SCALED_READ, "theta", SCALE_BYPASS, 0),
            (c.PARALLEL_ADD, None, 0, 0),
            (c.WRITEBACK, "theta", 0, 0),
        ]
    if kind == SGD:
        return [
            (c.SCALED_READ, "g", SCALE_NEG_ETA, 0),
            (c.SCALED_READ, "theta", SCALE_BYPASS, 1),
            (c.PARALLEL_ADD, None, 0, 1),
            (c.WRITEBACK, "theta", 0, 1),
        ]
    raise ValueError(kind)


def update_commands_per_column(job: UpdateJob) -> float:
    """Average compiled commands per high-precision column (model figure)."""
    n = len(_update_template(job.optimizer.kind))
    if job.mixed:
        r = job.ratio
        n += (1 + 2 * r) / r          # QRegWr + ratio x (Dequant, WB)
        n += (1 + 2 * r) / r          # ratio x (SR, Quant) + QRegRd
    return n


def compile_update_job(job: UpdateJob, placement: ArrayPlacement,
                       topology: DeviceTopology,
                       per_bank_streams: bool = False) -> list[JobStream]:
    """Build the ordered command streams realizing `job` on `placement`."""
    streams: list[JobStream] = []
    for ch in range(topology.channels):
        for rank in range(topology.ranks_per_channel):
            for bg in range(topology.bank_groups_per_rank):
                if job.aos:
                    streams.extend(_compile_aos(job, placement, topology,
                                                ch, rank, bg, per_bank_streams))
                else:
                    s = _compile_soa(job, placement, topology, ch, rank, bg)
                    if s.commands:
                        streams.append(s)
    for mrw in reversed(scaler_program_commands(job.optimizer)):
        if streams:
            streams[0].commands.insert(0, mrw)
    return streams


def _compile_soa(job: UpdateJob, pl: ArrayPlacement, top: DeviceTopology,
                 ch: int, rank: int, bg: int) -> JobStream:
    stream = JobStream(ch, rank, bg)
    out = stream.commands
    names = job.array_names()
    cols = {n: pl.bg_columns(n, ch, rank, bg) for n in names}
    n_cols = len(cols["theta"])
    if n_cols == 0:
        return stream
    if job.mixed:
        cols["q_g"] = pl.bg_columns("q_g", ch, rank, bg)
        cols["q_theta"] = pl.bg_columns("q_theta", ch, rank, bg)
    ratio = job.ratio
    template = _update_template(job.optimizer.kind)
    cpr = top.columns_per_row

    def cmd(kind, target=None, reg=0, param=0):
        bank, row, col = target if target else (0, 0, 0)
        out.append(c.DramCommand(kind, ch, rank, bg, bank, row, col, reg, param))

    start = 0
    while start < n_cols:
        end = min(start + cpr, n_cols)
        if job.mixed:
            # dequantize the gradient columns of this row range
            cmd(c.ACT, _row_of(cols["q_g"], start // ratio))
            cmd(c.ACT, _row_of(cols["g"], start))
            for k0 in range(start, end, ratio):
                cmd(c.QREG_WR, cols["q_g"][k0 // ratio])
                for j in range(min(ratio, end - k0)):
                    cmd(c.DEQUANT, cols["g"][k0 + j], reg=0, param=j)
                    cmd(c.WRITEBACK, cols["g"][k0 + j], reg=0)
        else:
            cmd(c.ACT, _row_of(cols["g"], start))
        cmd(c.ACT, _row_of(cols["theta"], start))
        if "v" in names:
            cmd(c.ACT, _row_of(cols["v"], start))
        for k in range(start, end):
            for kind, arr, param, reg in template:
                cmd(kind, cols[arr][k] if arr else None, reg=reg, param=param)
        if job.mixed:
            # quantize the updated weights; q_theta reuses g's bank
            cmd(c.PRE, _row_of(cols["g"], start))
            cmd(c.ACT, _row_of(cols["q_theta"], start // ratio))
            for k0 in range(start, end, ratio):
                for j in range(min(ratio, end - k0)):
                    cmd(c.SCALED_READ, cols["theta"][k0 + j], reg=0,
                        param=SCALE_BYPASS)
                    cmd(c.QUANT, cols["theta"][k0 + j], reg=0, param=j)
                cmd(c.QREG_RD, cols["q_theta"][k0 // ratio])
            cmd(c.PRE, _row_of(cols["q_g"], start // ratio))
            cmd(c.PRE, _row_of(cols["q_theta"], start // ratio))
        else:
            cmd(c.PRE, _row_of(cols["g"], start))
        cmd(c.PRE, _row_of(cols["theta"], start))
        if "v" in names:
            cmd(c.PRE, _row_of(cols["v"], start))
        start = end
    return stream


def _row_of(col_list: list[tuple[int, int, int]], k: int) -> tuple[int, int, int]:
    return col_list[min(k, len(col_list) - 1)]


def _compile_aos(job: UpdateJob, pl: ArrayPlacement, top: DeviceTopology,
                 ch: int, rank: int, bg: int, per_bank: bool) -> list[JobStream]:
    """AoS layout: every field of a struct group shares one row of one bank."""
    arr = pl.arrays["aos"]
    fields = arr.spec.fields
    ratio = job.ratio if job.mixed else 1
    spr = top.columns_per_row // fields
    if ratio > 1:
        spr -= spr % ratio
    total = pl._bg_u_count(pl._chunks(arr.spec), bg)
    names = job.array_names()
    f_idx = {n: i for i, n in enumerate(names)}
    qt_f, qg_f = len(names), len(names) + 1
    template = _update_template(job.optimizer.kind)

    streams: list[JobStream] = []
    n_banks = top.banks_per_bank_group
    for bank in range(n_banks):
        cnt = pl._slice_count(total, spr,
                              bank + n_banks * (rank + top.ranks_per_channel * ch),
                              n_banks * top.ranks_per_channel * top.channels)
        if cnt == 0:
            continue
        stream = JobStream(ch, rank, bg)
        out = stream.commands

        def cmd(kind, row, col, reg=0, param=0):
            out.append(c.DramCommand(kind, ch, rank, bg, bank, row, col, reg, param))

        for g0 in range(0, cnt, spr):
            g_end = min(g0 + spr, cnt)
            row = arr.base_row + g0 // spr
            cmd(c.ACT, row, 0)
            if job.mixed:
                for s0 in range(g0, g_end, ratio):
                    i0 = s0 % spr
                    cmd(c.QREG_WR, row, i0 * fields + qg_f)
                    for j in range(min(ratio, g_end - s0)):
                        col = (i0 + j) * fields + f_idx["g"]
                        cmd(c.DEQUANT, row, col, reg=0, param=j)
                        cmd(c.WRITEBACK, row, col, reg=0)
            for s in range(g0, g_end):
                i = s % spr
                for kind, a, param, reg in template:
                    col = (i * fields + f_idx[a]) if a else 0
                    cmd(kind, row, col, reg=reg, param=param)
            if job.mixed:
                for s0 in range(g0, g_end, ratio):
                    i0 = s0 % spr
                    for j in range(min(ratio, g_end - s0)):
                        col = (i0 + j) * fields + f_idx["theta"]
                        cmd(c.SCALED_READ, row, col, reg=0, param=SCALE_BYPASS)
                        cmd(c.QUANT, row, col, reg=0, param=j)
                    cmd(c.QREG_RD, row, i0 * fields + qt_f)
            cmd(c.PRE, row, 0)
        if per_bank:
            streams.append(stream)
        elif streams:
            streams[0].commands.extend(out)
        else:
            streams.append(stream)
    return streams


def compile_accumulate(params: int, placement: ArrayPlacement,
                       top: DeviceTopology, dst: str = "g", src: str = "recv"
                       ) -> list[JobStream]:
    """Gradient-accumulation streams: bypass-scaled read + add + writeback."""
    streams = []
    for ch in range(top.channels):
        for rank in range(top.ranks_per_channel):
            for bg in range(top.bank_groups_per_rank):
                d = placement.bg_columns(dst, ch, rank, bg)
                s = placement.bg_columns(src, ch, rank, bg)
                if not d:
                    continue
                stream = JobStream(ch, rank, bg)
                out = stream.commands
                cpr = top.columns_per_row
                for start in range(0, len(d), cpr):
                    end = min(start + cpr, len(d))
                    for tgt, lst in ((d, d), (s, s)):
                        bank, row, _ = lst[start]
                        out.append(c.DramCommand(c.ACT, ch, rank, bg, bank, row))
                    for k in range(start, end):
                        for kind, (bank, row, col), reg in (
                                (c.SCALED_READ, d[k], 0),
                                (c.SCALED_READ, s[k], 1)):
                            out.append(c.DramCommand(kind, ch, rank, bg, bank,
                                                     row, col, reg, SCALE_BYPASS))
                        out.append(c.DramCommand(c.PARALLEL_ADD, ch, rank, bg,
                                                 reg=1))
                        bank, row, col = d[k]
                        out.append(c.DramCommand(c.WRITEBACK, ch, rank, bg,
                                                 bank, row, col, 1))
                    for lst in (d, s):
                        bank, row, _ = lst[start]
                        out.append(c.DramCommand(c.PRE, ch, rank, bg, bank, row))
                streams.append(stream)
    return streams
