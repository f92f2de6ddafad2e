"""Bijective byte-address mapping with bank-group interleaving.

Bit layout from the LSB: column offset (64B), bank group, column, rank,
channel, row, and bank in the most significant bits. Putting bank ids at the
MSB means separately allocated arrays always land in distinct banks, while
the bank-group bits directly above the column offset spread consecutive
64-byte chunks across bank groups for maximum bank-group parallelism.
Channel bits sit between rank and row and are configurable in principle;
the default topology has a single channel.
"""

from __future__ import annotations

from dataclasses import dataclass

from .params import DeviceTopology


def _log2(v: int) -> int:
    return v.bit_length() - 1


@dataclass(frozen=True)
class Address:
    channel: int
    rank: int
    bank_group: int
    bank: int
    row: int
    column: int
    offset: int


class AddressMapping:
    """Derives field widths from a topology; bijective over the full space."""

    def __init__(self, topology: DeviceTopology):
        self.topology = topology
        self.offset_bits = _log2(topology.column_bytes)
        self.bg_bits = _log2(topology.bank_groups_per_rank)
        self.col_bits = _log2(topology.columns_per_row)
        self.rank_bits = _log2(topology.ranks_per_channel)
        self.chan_bits = _log2(topology.channels)
        self.row_bits = _log2(topology.rows_per_bank)
        self.bank_bits = _log2(topology.banks_per_bank_group)
        self.total_bits = (self.offset_bits + self.bg_bits + self.col_bits
                           + self.rank_bits + self.chan_bits + self.row_bits
                           + self.bank_bits)

    @property
    def capacity(self) -> int:
        return 1 << self.total_bits

    def map_address(self, byte_addr: int) -> Address:
        if not 0 <= byte_addr < self.capacity:
            raise ValueError(f"address {byte_addr:#x} outside {self.capacity:#x}-byte space")
        a = byte_addr
        offset = a & ((1 << self.offset_bits) - 1)
        a >>= self.offset_bits
        bg = a & ((1 << self.bg_bits) - 1)
        a >>= self.bg_bits
        col = a & ((1 << self.col_bits) - 1)
        a >>= self.col_bits
        rank = a & ((1 << self.rank_bits) - 1)
        a >>= self.rank_bits
        chan = a & ((1 << self.chan_bits) - 1)
        a >>= self.chan_bits
        row = a & ((1 << self.row_bits) - 1)
        a >>= self.row_bits
        bank = a
        return Address(chan, rank, bg, bank, row, col, offset)

    def compose(self, addr: Address) -> int:
        a = addr.bank
        a = (a << self.row_bits) | addr.row
        a = (a << self.chan_bits) | addr.channel
        a = (a << self.rank_bits) | addr.rank
        a = (a << self.col_bits) | addr.column
        a = (a << self.bg_bits) | addr.bank_group
        a = (a << self.offset_bits) | addr.offset
        return a

    def chunk_coords(self, chunk: int) -> tuple[int, int, int, int, int]:
        """(channel, rank, bank_group, row, column) of 64B chunk index `chunk`
        within one bank's contiguous region (bank bits excluded)."""
        t = self.topology
        bg = chunk % t.bank_groups_per_rank
        rest = chunk // t.bank_groups_per_rank
        col = rest % t.columns_per_row
        rest //= t.columns_per_row
        rank = rest % t.ranks_per_channel
        rest //= t.ranks_per_channel
        chan = rest % t.channels
        row = rest // t.channels
        return chan, rank, bg, row, col
