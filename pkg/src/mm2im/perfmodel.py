"""Analytical latency model mirroring the simulator's unit-cost accounting.

Latency is split into on-array time and transfer time:

    t_pm    = t_cu_compute + t_cu_load + t_cu_store + t_au
    t_data  = (w_size + i_size + o_size + omap_size) * bw
    t_total = t_pm + t_data

Each t_* term uses the same unit costs as the simulator (CU folds UF lanes
per cycle, one cycle per accumulate, one cycle per streamed word), but the
model deliberately ignores the pipeline overlap and stall structure the
simulator exhibits, so agreement between the two is a consistency check
rather than a tautology.

Two variants differ only in omap_size: `host_omap` streams every surviving
map entry from the host (two words each), `on_chip_mapper` generates maps on
the device and moves zero map bytes.
"""

from __future__ import annotations

from dataclasses import dataclass

from .mapping import compute_metrics, kept_tap_counts
from .shapes import TConvShape
from .sim import SimConfig, _OMAP_ENTRY_BYTES

VARIANTS = ("on_chip_mapper", "host_omap")

DEFAULT_FREQ = 200e6                    # cycles per second
DEFAULT_BW = 1.0 / (4.0 * DEFAULT_FREQ)  # seconds per byte: one word per cycle


@dataclass(frozen=True)
class PlatformParams:
    freq: float = DEFAULT_FREQ          # array clock, Hz
    bw: float = DEFAULT_BW              # host link cost, seconds per byte


@dataclass(frozen=True)
class PerfEstimate:
    """Latency breakdown in seconds plus the byte sizes behind t_data."""

    variant: str
    freq: float
    t_cu_compute: float
    t_cu_load: float
    t_cu_store: float
    t_au: float
    t_pm: float
    t_data: float
    t_total: float
    w_size: int
    i_size: int
    o_size: int
    omap_size: int

    @property
    def total_cycles(self) -> float:
        return self.t_total * self.freq

    @property
    def omap_share(self) -> float:
        """Fraction of t_total spent moving map entries."""
        if self.t_total == 0.0:
            return 0.0
        return (self.omap_size * self.t_data / max(self.w_size + self.i_size +
                                                   self.o_size + self.omap_size, 1)
                ) / self.t_total


def estimate(shape: TConvShape, sim_config: SimConfig | None = None,
             platform: PlatformParams | None = None,
             variant: str = "on_chip_mapper") -> PerfEstimate:
    """Closed-form latency estimate for one layer on one array geometry."""
    if variant not in VARIANTS:
        raise ValueError(f"variant {variant!r} not one of {VARIANTS}")
    cfg = sim_config or SimConfig()
    plat = platform or PlatformParams()
    sh = shape

    passes = -(-sh.o_c // cfg.x)
    kept_h, kept_w = kept_tap_counts(sh)
    kept_taps = int(kept_h.sum()) * int(kept_w.sum())   # per output channel
    cpd = -(-sh.i_c // cfg.uf)
    fwords = (sh.ks * sh.ks * sh.i_c + 3) // 4
    store_words = (sh.o_w + 3) // 4

    cyc_compute = passes * kept_taps * cpd
    cyc_load = passes * cfg.x * (1 + fwords)
    cyc_store = cfg.xbar_cost * sh.o_h * store_words * sh.o_c
    cyc_au = cfg.au_cost * passes * kept_taps

    w_size = passes * cfg.x * (sh.ks * sh.ks * sh.i_c + 4)
    i_size = passes * sh.i_h * sh.i_w * sh.i_c
    o_size = sh.o_h * sh.o_w * sh.o_c
    omap_size = passes * kept_taps * _OMAP_ENTRY_BYTES if variant == "host_omap" else 0

    t_cu_compute = cyc_compute / plat.freq
    t_cu_load = cyc_load / plat.freq
    t_cu_store = cyc_store / plat.freq
    t_au = cyc_au / plat.freq
    t_pm = t_cu_compute + t_cu_load + t_cu_store + t_au
    t_data = (w_size + i_size + o_size + omap_size) * plat.bw
    return PerfEstimate(variant=variant, freq=plat.freq,
                        t_cu_compute=t_cu_compute, t_cu_load=t_cu_load,
                        t_cu_store=t_cu_store, t_au=t_au, t_pm=t_pm,
                        t_data=t_data, t_total=t_pm + t_data,
                        w_size=w_size, i_size=i_size, o_size=o_size,
                        omap_size=omap_size)
