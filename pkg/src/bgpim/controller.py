"""Memory-controller model: request streams, scheduling, and the cycle engine.

Scheduling is first-ready FCFS with open-row-hit preference inside a request
stream, an age cap bounding starvation, and writeback-priority across the
streams sharing a command bus. Each command bus issues at most one command
per cycle; buffered interfacing modes give every rank its own bus, with a
host serial link carrying 32-byte job descriptors (the link's payload
bandwidth equals the DDR channel, so bulk external transfers are paced by
the shared channel data bus either way).

Everything is deterministic: stream scan order rotates round-robin and all
tie-breaks are fixed.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

from . import commands as c
from .dram import DeviceState

INF = float("inf")

DESCRIPTOR_BYTES = 32


def make_request(device: DeviceState, kind: int, ch: int, rank: int, bg: int,
                 bank: int, row: int, col: int, payload=None) -> tuple:
    probe = c.DramCommand(kind, ch, rank, bg, bank, row, col)
    return (kind, ch, rank, bg, bank, row, col, payload,
            device.bank_index(probe))


class CommandListStream:
    """Precompiled in-order command stream (PIM jobs, raw tests)."""

    __slots__ = ("cmds", "pos", "channel", "rank", "descriptor_ranges")

    def __init__(self, cmds_list, channel=0, rank=0):
        self.cmds = cmds_list
        self.pos = 0
        self.channel = channel
        self.rank = rank
        self.descriptor_ranges = sum(1 for x in cmds_list if x.kind == c.ACT)

    def done(self) -> bool:
        return self.pos >= len(self.cmds)

    def peek(self, device, now):
        return self.cmds[self.pos], 0

    def advance(self, cycle) -> None:
        self.pos += 1


class ColumnRequestStream:
    """External column requests with automatic row management.

    plain mode: all requests are schedulable; a window of `window` entries is
    scanned for open-row hits first, but a head older than `age_cap` cycles
    always wins (bounded starvation).

    rmw mode: strictly ordered groups of reads then writes, modelling a
    single-buffered update engine: a group's writes become issuable once its
    last read burst has returned and the engine latency elapsed (minus the
    write latency the controller hides), and the next group's reads wait for
    the current group's writes to issue.
    """

    def __init__(self, requests, channel=0, rank=0, mode="plain",
                 groups=None, latency=8, read_pipe=6, window=16, age_cap=64):
        self.reqs = requests                 # tuples from make_request
        self.channel = channel
        self.rank = rank
        self.mode = mode
        self.groups = groups or []
        self.latency = latency
        self.read_pipe = read_pipe           # tCL + tBURST - tCWL
        self.window = window
        self.age_cap = age_cap
        self.head = 0
        self.done_flags = bytearray(len(requests))
        self.chain: list = []
        self.chain_req = -1
        self.cas_ready = 0
        self.head_seen: int | None = None
        self.touched: dict[tuple, int] = {}  # (ch,rank,bg,bank) -> open row
        self.final_pres: list | None = None
        self.group_write_ready: dict[int, int] = {}

    def done(self) -> bool:
        return (self.head >= len(self.reqs) and not self.chain
                and not self.final_pres)

    def _skip_done(self) -> None:
        n = len(self.reqs)
        while self.head < n and self.done_flags[self.head]:
            self.head += 1

    def _select(self, device, now) -> int:
        self._skip_done()
        if self.head >= len(self.reqs):
            return -1
        if self.mode == "rmw":
            return self.head
        if self.head_seen is None:
            self.head_seen = now
        if now - self.head_seen <= self.age_cap:
            limit = min(self.head + self.window, len(self.reqs))
            open_row = device.bank_open_row
            for i in range(self.head, limit):
                if not self.done_flags[i]:
                    r = self.reqs[i]
                    if open_row[r[8]] == r[5]:
                        return i
        return self.head

    def peek(self, device, now):
        if self.final_pres:
            return self.final_pres[0], 0
        if not self.chain:
            idx = self._select(device, now)
            if idx < 0:
                self._build_final_pres()
                return (self.final_pres[0], 0) if self.final_pres else (None, 0)
            self._build_chain(device, idx, now)
        # stream readiness gates only the CAS itself; row wrappers may go early
        ready = self.cas_ready if len(self.chain) == 1 else 0
        return self.chain[0], ready

    def _build_chain(self, device, idx, now) -> None:
        kind, ch, rank, bg, bank, row, col, payload, bidx = self.reqs[idx]
        cas = c.DramCommand(kind, ch, rank, bg, bank, row, col, payload=payload)
        open_row = device.bank_open_row[bidx]
        chain = []
        if open_row != row:
            if open_row >= 0:
                chain.append(c.DramCommand(c.PRE, ch, rank, bg, bank, open_row))
            chain.append(c.DramCommand(c.ACT, ch, rank, bg, bank, row))
        chain.append(cas)
        self.chain = chain
        self.chain_req = idx
        self.cas_ready = 0
        if self.mode == "rmw" and kind in (c.WR, c.BUF_WR):
            self.cas_ready = self.group_write_ready.get(self.groups[idx], 0)

    def _build_final_pres(self) -> None:
        if self.final_pres is None:
            self.final_pres = [c.DramCommand(c.PRE, ch, rank, bg, bank, row)
                               for (ch, rank, bg, bank), row in self.touched.items()]

    def advance(self, cycle) -> None:
        if self.final_pres:
            self.final_pres.pop(0)
            return
        cmd = self.chain.pop(0)
        key = (cmd.channel, cmd.rank, cmd.bank_group, cmd.bank)
        if cmd.kind == c.ACT:
            self.touched[key] = cmd.row
        elif cmd.kind == c.PRE:
            self.touched.pop(key, None)
        if not self.chain:
            idx = self.chain_req
            self.done_flags[idx] = 1
            if idx == self.head:
                self.head_seen = None
            if self.mode == "rmw":
                self._rmw_bookkeeping(idx, cycle, cmd)
            self.chain_req = -1
            self.cas_ready = 0

    def _rmw_bookkeeping(self, idx, cycle, cmd) -> None:
        group = self.groups[idx]
        if cmd.kind not in (c.RD, c.BUF_RD):
            return
        nxt = idx + 1
        last_read = (nxt >= len(self.reqs) or self.groups[nxt] != group
                     or self.reqs[nxt][0] in (c.WR, c.BUF_WR))
        if last_read:
            self.group_write_ready[group] = cycle + self.read_pipe + self.latency


@dataclass
class PhaseResult:
    label: str
    start: int
    end: int
    issued: list[int]
    busy: list[int]
    external_bytes: int = 0
    internal_bytes: int = 0
    data_bus_busy: int = 0
    link_bytes: int = 0
    cmd_counts: dict = field(default_factory=dict)

    @property
    def cycles(self) -> int:
        return max(self.end - self.start, 0)

    def bus_utilization(self, bus: int | None = None) -> float:
        if self.cycles == 0:
            return 0.0
        if bus is None:
            active = [b for b in self.busy if b]
            return max(b / self.cycles for b in active) if active else 0.0
        return self.busy[bus] / self.cycles

    def bandwidth_gbps(self, tck_ns: float, internal: bool = True) -> float:
        if self.cycles == 0:
            return 0.0
        nbytes = self.internal_bytes if internal else self.external_bytes
        return nbytes / (self.cycles * tck_ns)


def run_phase(device: DeviceState, streams, start_cycle: int = 0,
              label: str = "phase") -> PhaseResult:
    """Drive `streams` to completion over the device's command buses."""
    bus_streams: dict[int, list] = {}
    for st in streams:
        probe = c.DramCommand(c.ACT, st.channel, st.rank, 0, 0)
        bus_streams.setdefault(device.bus_index(probe), []).append(st)

    before = device.counters()
    busy = [0] * device.n_buses
    issued = [0] * device.n_buses
    link_bytes = sum(DESCRIPTOR_BYTES * getattr(st, "descriptor_ranges", 0)
                     for st in streams)

    heap = [(start_cycle, bus) for bus in sorted(bus_streams)]
    heapq.heapify(heap)
    cached: dict[int, int] = {}    # id(stream) -> earliest lower bound
    cached_cmd: dict[int, object] = {}
    rr: dict[int, int] = {b: 0 for b in bus_streams}
    end = start_cycle

    while heap:
        now, bus = heapq.heappop(heap)
        lst = bus_streams[bus]
        best = best_cmd = None
        best_key = (2, 0)
        min_future = INF
        alive = False
        n = len(lst)
        offset = rr[bus]
        for i in range(n):
            st = lst[(i + offset) % n]
            if st.done():
                continue
            sid = id(st)
            bound = cached.get(sid, 0)
            if bound > now:
                alive = True
                if bound < min_future:
                    min_future = bound
                continue
            cmd, ready = st.peek(device, now)
            if cmd is None:
                continue
            alive = True
            e = device.earliest_issue(cmd, now)
            if ready > e:
                e = ready
            cached[sid] = e
            cached_cmd[sid] = cmd
            if e <= now:
                key = (0 if cmd.kind == c.WRITEBACK else 1, i)
                if key < best_key:
                    best, best_key, best_cmd = st, key, cmd
            elif e < min_future:
                min_future = e
        if best is not None:
            device.issue(best_cmd, now)
            best.advance(now)
            cached.pop(id(best), None)
            busy[bus] += 1
            issued[bus] += 1
            rr[bus] = (offset + 1) % n
            if now + 1 > end:
                end = now + 1
            heapq.heappush(heap, (now + 1, bus))
        elif alive:
            if min_future is INF:
                raise RuntimeError(f"stalled streams on bus {bus} at cycle {now}")
            heapq.heappush(heap, (int(min_future), bus))

    after = device.counters()
    return PhaseResult(
        label=label, start=start_cycle, end=end, issued=issued, busy=busy,
        external_bytes=after["external_bytes"] - before["external_bytes"],
        internal_bytes=after["internal_bytes"] - before["internal_bytes"],
        data_bus_busy=(after["data_bus_busy_cycles"]
                       - before["data_bus_busy_cycles"]),
        link_bytes=link_bytes,
        cmd_counts={k: after["cmd_counts"][k] - before["cmd_counts"][k]
                    for k in after["cmd_counts"]
                    if after["cmd_counts"][k] != before["cmd_counts"][k]},
    )
