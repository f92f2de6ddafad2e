"""Device parameter tables: timing, geometry, currents, PIM unit power.

Timing and current defaults correspond to a DDR4-2133 part; the handful of
protocol parameters the headline table omits (tCWL, tRTP, tWR, tBURST, tFAW,
tRRD_*) use typical DDR4-2133 values and are overridable in every config.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields


@dataclass
class TimingParams:
    tCK: float = 0.94          # ns per cycle
    tCL: int = 16
    tRCD: int = 16
    tRP: int = 16
    tRAS: int = 36
    tCCD_L: int = 6
    tCCD_S: int = 4
    tRR: int = 1               # rank-to-rank data-bus switch spacing
    tPIM: int = 5              # worst-case per-bank-group ALU occupancy
    tCWL: int = 14
    tBURST: int = 4
    tRTP: int = 8
    tWR: int = 16
    tFAW: int = 24
    tRRD_S: int = 4
    tRRD_L: int = 6
    # Optional refresh toggle; disabled (None) in headline experiments.
    tREFI: int | None = None   # 7.8 us ~= 8298 cycles when enabled
    tRFC: int | None = None    # 350 ns ~= 373 cycles when enabled
    # Power-budget scaling hook for tFAW/tRRD under dense PIM activity.
    faw_rrd_scale: float = 1.0

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        for f in fields(self):
            if f.name in ("tREFI", "tRFC"):
                v = getattr(self, f.name)
                if v is not None and v <= 0:
                    raise ValueError(f"{f.name} must be positive when set")
                continue
            if f.name == "faw_rrd_scale":
                if self.faw_rrd_scale <= 0:
                    raise ValueError("faw_rrd_scale must be positive")
                continue
            if getattr(self, f.name) <= 0:
                raise ValueError(f"{f.name} must be positive")
        if self.tCCD_L < self.tCCD_S:
            raise ValueError("tCCD_L must be >= tCCD_S")
        if self.tRRD_L < self.tRRD_S:
            raise ValueError("tRRD_L must be >= tRRD_S")

    @property
    def tRC(self) -> int:
        return self.tRAS + self.tRP

    def scaled_tFAW(self) -> int:
        return max(1, round(self.tFAW * self.faw_rrd_scale))

    def scaled_tRRD(self, same_bank_group: bool) -> int:
        base = self.tRRD_L if same_bank_group else self.tRRD_S
        return max(1, round(base * self.faw_rrd_scale))

    def refresh_enabled(self) -> bool:
        return self.tREFI is not None and self.tRFC is not None


@dataclass
class DeviceTopology:
    channels: int = 1
    ranks_per_channel: int = 4
    bank_groups_per_rank: int = 4
    banks_per_bank_group: int = 4
    rows_per_bank: int = 65536
    columns_per_row: int = 128
    column_bytes: int = 64     # rank-level burst payload
    lane_width_bits: int = 32

    def __post_init__(self) -> None:
        for name in ("channels", "ranks_per_channel", "bank_groups_per_rank",
                     "banks_per_bank_group", "rows_per_bank", "columns_per_row",
                     "column_bytes", "lane_width_bits"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.column_bytes % (self.lane_width_bits // 8):
            raise ValueError("column_bytes must be a multiple of the lane width")
        for name in ("ranks_per_channel", "bank_groups_per_rank",
                     "banks_per_bank_group", "rows_per_bank", "columns_per_row",
                     "channels"):
            v = getattr(self, name)
            if v & (v - 1):
                raise ValueError(f"{name} must be a power of two (got {v})")

    @property
    def total_ranks(self) -> int:
        return self.channels * self.ranks_per_channel

    @property
    def total_bank_groups(self) -> int:
        return self.total_ranks * self.bank_groups_per_rank

    @property
    def total_banks(self) -> int:
        return self.total_bank_groups * self.banks_per_bank_group

    @property
    def row_bytes(self) -> int:
        return self.columns_per_row * self.column_bytes

    @property
    def capacity_bytes(self) -> int:
        return self.total_banks * self.rows_per_bank * self.row_bytes

    @property
    def lanes_per_column(self) -> int:
        return self.column_bytes // (self.lane_width_bits // 8)


@dataclass
class CurrentParams:
    """IDD currents (mA) and supply voltage for the energy model."""

    VDD: float = 1.2
    IDD0: float = 75.0
    IDD2P: float = 25.0
    IDD2N: float = 33.0
    IDD3P: float = 39.0
    IDD3N: float = 44.0
    IDD4W: float = 225.0
    IDD4R: float = 225.0
    IDDpre: float = 98.0       # partial read/write within the bank group

    def __post_init__(self) -> None:
        if not (self.IDD4R > self.IDD3N > self.IDD2N > 0):
            raise ValueError("require IDD4R > IDD3N > IDD2N > 0")
        if not (self.IDD4W > self.IDD3N):
            raise ValueError("require IDD4W > IDD3N")
        if not (self.IDD3N <= self.IDDpre <= self.IDD4R):
            raise ValueError("IDDpre must lie between IDD3N and IDD4R")


@dataclass
class PimPowerParams:
    """Per-submodule PIM unit power (mW) from the layout table."""

    adder: float = 0.058
    quantize: float = 0.056
    dequantize: float = 0.041
    scaler: float = 0.159
    register: float = 0.04     # each of the three registers
    unit_total: float = 1.74   # authoritative static total per unit

    def __post_init__(self) -> None:
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"{f.name} must be non-negative")


@dataclass
class EnergyConfig:
    io_pj_per_bit: float = 6.0
    pim_static_power: bool = True

    currents: CurrentParams = field(default_factory=CurrentParams)
    pim_power: PimPowerParams = field(default_factory=PimPowerParams)
