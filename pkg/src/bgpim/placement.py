"""Bank-aligned array placement.

Every array starts at a bank boundary, so matching element indices of
separately placed arrays always share a bank group (and rank/row phase)
while occupying distinct banks. Three layouts:

* ``linear``   - plain arrays; consecutive 64B chunks interleave bank groups.
* ``packed``   - low-precision shadow of a 4-byte parent array; occupies only
                 the first 1/ratio of each row so matching elements stay in
                 the parent's bank group (capacity is wasted, bandwidth not).
* ``struct``   - array-of-structures: the fields of one element group share a
                 row of a single bank, one column per field, groups spread
                 over banks then ranks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .params import DeviceTopology


class PlacementError(Exception):
    pass


@dataclass
class ArraySpec:
    name: str
    elems: int
    elem_bytes: int = 4
    bank: int | None = None
    layout: str = "linear"
    ratio: int = 1            # packed: high/low precision ratio
    fields: int = 1           # struct: interleaved field count
    field: int = 0            # struct: which member this array is
    share_rows_with: str | None = None   # struct members share one footprint


@dataclass
class PlacedArray:
    spec: ArraySpec
    bank: int
    base_row: int
    rows: int

    @property
    def name(self) -> str:
        return self.spec.name


class ArrayPlacement:
    def __init__(self, topology: DeviceTopology):
        self.topology = topology
        self.arrays: dict[str, PlacedArray] = {}
        self._next_row = [0] * topology.banks_per_bank_group
        self._auto_bank = 0

    # --- shared index arithmetic ----------------------------------------

    def _chunks(self, spec: ArraySpec) -> int:
        if spec.layout == "packed":
            # indexed by parent (4-byte) chunks
            return -(-spec.elems // self.topology.lanes_per_column)
        lanes = self.topology.column_bytes // spec.elem_bytes
        if spec.layout == "struct":
            lanes = self.topology.lanes_per_column
        return -(-spec.elems // lanes)

    def _bg_u_count(self, n_chunks: int, bg: int) -> int:
        g = self.topology.bank_groups_per_rank
        if n_chunks <= bg:
            return 0
        return (n_chunks - bg + g - 1) // g

    @staticmethod
    def _slice_count(total: int, inner: int, slice_idx: int, n_slices: int) -> int:
        """Of `total` items laid out in repeating blocks of `inner * n_slices`,
        how many fall in slice `slice_idx` (each slice `inner` wide)."""
        block = inner * n_slices
        full, rem = divmod(total, block)
        extra = min(max(rem - inner * slice_idx, 0), inner)
        return full * inner + extra

    def bg_column_count(self, name: str, channel: int, rank: int, bg: int) -> int:
        """Columns of `name` living in (channel, rank, bg) for the owning bank."""
        arr = self.arrays[name]
        spec = arr.spec
        t = self.topology
        u = self._bg_u_count(self._chunks(spec), bg)
        per_rank = self._slice_count(u, t.columns_per_row,
                                     rank + t.ranks_per_channel * channel,
                                     t.ranks_per_channel * t.channels)
        if spec.layout == "packed":
            return -(-per_rank // spec.ratio)
        return per_rank

    def bg_columns(self, name: str, channel: int, rank: int, bg: int
                   ) -> list[tuple[int, int, int]]:
        """Ordered (bank, row, column) list for a per-bank-group job stream."""
        arr = self.arrays[name]
        spec = arr.spec
        t = self.topology
        c = t.columns_per_row
        if spec.layout == "linear":
            n = self.bg_column_count(name, channel, rank, bg)
            return [(arr.bank, arr.base_row + k // c, k % c) for k in range(n)]
        if spec.layout == "packed":
            usable = c // spec.ratio
            n = self.bg_column_count(name, channel, rank, bg)
            return [(arr.bank, arr.base_row + k // usable, k % usable)
                    for k in range(n)]
        # struct: groups cycle banks then ranks; one group per row
        return self._struct_columns(arr, channel, rank, bg)

    def _struct_columns(self, arr: PlacedArray, channel: int, rank: int, bg: int
                        ) -> list[tuple[int, int, int]]:
        spec = arr.spec
        t = self.topology
        spr = t.columns_per_row // spec.fields   # structs per row
        total = self._bg_u_count(self._chunks(spec), bg)
        out = []
        for bank in range(t.banks_per_bank_group):
            cnt = self._slice_count(total, spr,
                                    bank + t.banks_per_bank_group
                                    * (rank + t.ranks_per_channel * channel),
                                    t.banks_per_bank_group * t.ranks_per_channel
                                    * t.channels)
            for k in range(cnt):
                row = arr.base_row + k // spr
                col = (k % spr) * spec.fields + spec.field
                out.append((bank, row, col))
        return out

    def element_coords(self, name: str, j: int
                       ) -> tuple[int, int, int, int, int, int, int]:
        """(channel, rank, bg, bank, row, column, lane) of element `j`."""
        arr = self.arrays[name]
        spec = arr.spec
        t = self.topology
        g, c = t.bank_groups_per_rank, t.columns_per_row
        r, ch_n = t.ranks_per_channel, t.channels
        lanes16 = t.lanes_per_column

        cp = j // lanes16
        lane16 = j % lanes16
        bg = cp % g
        s = cp // g
        col = s % c
        rest = s // c
        rank = rest % r
        rest //= r
        ch = rest % ch_n
        row_local = rest // ch_n

        if spec.layout == "linear" and spec.elem_bytes == 4:
            return ch, rank, bg, arr.bank, arr.base_row + row_local, col, lane16
        if spec.layout == "packed":
            usable = c // spec.ratio
            p_local = col + c * row_local
            k = p_local // spec.ratio
            lane = (p_local % spec.ratio) * lanes16 + lane16
            return (ch, rank, bg, arr.bank,
                    arr.base_row + k // usable, k % usable, lane)
        if spec.layout == "struct":
            spr = c // spec.fields
            group = s // spr
            idx = s % spr
            bank = group % t.banks_per_bank_group
            rest2 = group // t.banks_per_bank_group
            rank2 = rest2 % r
            rest2 //= r
            ch2 = rest2 % ch_n
            return (ch2, rank2, bg, bank, arr.base_row + rest2 // ch_n,
                    idx * spec.fields + spec.field, lane16)
        # generic linear with non-4-byte elements (plain low-precision stream)
        lanes = t.column_bytes // spec.elem_bytes
        cp = j // lanes
        bg = cp % g
        s = cp // g
        return (0, (s // c) % r, bg, arr.bank,
                arr.base_row + s // (c * r * ch_n), s % c, j % lanes)

    def total_columns(self, name: str) -> int:
        t = self.topology
        total = 0
        for ch in range(t.channels):
            for rank in range(t.ranks_per_channel):
                for bg in range(t.bank_groups_per_rank):
                    total += self.bg_column_count(name, ch, rank, bg)
        return total

    def waste_bytes(self) -> int:
        """Capacity lost to packed-array row padding."""
        t = self.topology
        waste = 0
        for arr in self.arrays.values():
            if arr.spec.layout == "packed":
                unused_cols = t.columns_per_row - t.columns_per_row // arr.spec.ratio
                waste += (arr.rows * unused_cols * t.column_bytes
                          * t.total_bank_groups)
        return waste


def allocate_arrays(specs: list[ArraySpec], topology: DeviceTopology
                    ) -> ArrayPlacement:
    """Place arrays on bank boundaries with stacked row ranges.

    Arrays without an explicit bank get the next unused bank; running out of
    distinct banks is a placement error (multi-pass optimizers that would
    need more per-element values than banks are out of scope).
    """
    pl = ArrayPlacement(topology)
    auto_used: set[int] = set()
    for spec in specs:
        if spec.layout == "struct" and spec.fields > topology.columns_per_row:
            raise PlacementError("struct wider than a row")
        if spec.bank is not None:
            bank = spec.bank
        else:
            bank = next((b for b in range(topology.banks_per_bank_group)
                         if b not in auto_used), None)
            if bank is None:
                raise PlacementError(
                    f"not enough distinct banks for array {spec.name!r} "
                    f"({topology.banks_per_bank_group} per bank group)")
        if bank >= topology.banks_per_bank_group:
            raise PlacementError(f"bank {bank} out of range for {spec.name!r}")
        auto_used.add(bank)
        rows = _rows_needed(pl, spec)
        if spec.share_rows_with:
            peer = pl.arrays[spec.share_rows_with]
            placed = PlacedArray(spec, peer.bank, peer.base_row, peer.rows)
        else:
            base = pl._next_row[bank] if spec.layout != "struct" else max(pl._next_row)
            if spec.layout == "struct":
                for b in range(topology.banks_per_bank_group):
                    pl._next_row[b] = base + rows
            else:
                pl._next_row[bank] = base + rows
            if base + rows > topology.rows_per_bank:
                raise PlacementError(f"array {spec.name!r} exceeds bank rows")
            placed = PlacedArray(spec, bank, base, rows)
        pl.arrays[spec.name] = placed
    return pl


def _rows_needed(pl: ArrayPlacement, spec: ArraySpec) -> int:
    t = pl.topology
    chunks = pl._chunks(spec)
    worst_u = pl._bg_u_count(chunks, 0)
    if spec.layout == "linear":
        per_rank = -(-worst_u // (t.ranks_per_channel * t.channels))
        return max(1, -(-per_rank // t.columns_per_row))
    if spec.layout == "packed":
        per_rank = -(-worst_u // (t.ranks_per_channel * t.channels))
        packed = -(-per_rank // spec.ratio)
        return max(1, -(-packed // (t.columns_per_row // spec.ratio)))
    spr = t.columns_per_row // spec.fields
    groups = -(-worst_u // spr)
    per_bank = -(-groups // (t.banks_per_bank_group * t.ranks_per_channel
                             * t.channels))
    return max(1, per_bank)
