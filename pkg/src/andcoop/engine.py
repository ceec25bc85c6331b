"""Monte Carlo replication driver.

Cycles are grouped into fixed-size chunks. Chunk ``i`` draws all of its
randomness from ``SeedSequence(master_seed, spawn_key=(1, i))`` through a
Philox generator, so a run depends only on its :class:`RunSpec`, never on
how chunks are spread over worker processes. Chunk results are reduced
in chunk order.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .channel import (ChannelBatch, LinkStatics, NetworkConfig, Placement, iid_statics, make_rng,
                      sample_cycles, sample_placement, statics_from_positions)
from .protocol import ProtocolParams, data_time, run_batch

log = logging.getLogger(__name__)

PLACEMENT_MODES = ("fixed", "per_cycle", "per_block")
_CHUNK_BUDGET = 2_000_000  # float64 link entries per chunk


@dataclass(frozen=True)
class RunSpec:
    cfg: NetworkConfig
    params: ProtocolParams
    n_cycles: int
    master_seed: int = 0
    placement_mode: str = "per_block"
    block_size: int = 100
    placement: Placement | None = None
    iid_snr: float | None = None
    chunk_size: int | None = None

    def __post_init__(self):
        if self.n_cycles < 1:
            raise ValueError("n_cycles must be >= 1")
        if self.placement_mode not in PLACEMENT_MODES:
            raise ValueError(f"unknown placement mode {self.placement_mode!r}")
        if self.block_size < 1:
            raise ValueError("block_size must be >= 1")
        if self.iid_snr is not None and self.iid_snr <= 0:
            raise ValueError("iid_snr must be positive")

    @property
    def effective_chunk(self) -> int:
        """Cycles per chunk; part of the reproducibility contract."""
        if self.iid_snr is None and self.placement_mode == "per_block":
            return self.block_size
        if self.chunk_size is not None:
            return self.chunk_size
        n, m = self.cfg.n_devices, self.cfg.n_aps
        return int(max(1, min(20_000, _CHUNK_BUDGET // (n * n + 2 * m * n))))


@dataclass(frozen=True)
class EstimateWithCI:
    estimate: float
    std_error: float
    n_cycles: int
    n_events: int

    @classmethod
    def from_counts(cls, events: int, cycles: int) -> "EstimateWithCI":
        if cycles < 1:
            raise ValueError("need at least one cycle")
        p = events / cycles
        return cls(p, math.sqrt(p * (1.0 - p) / cycles), cycles, events)


def combined_se(*estimates: EstimateWithCI) -> float:
    return math.sqrt(sum(e.std_error ** 2 for e in estimates))


@dataclass
class RunStats:
    outage: EstimateWithCI
    k_weak_histogram: np.ndarray
    relay_energy_samples: np.ndarray = field(repr=False)
    overflow_rate: float

    @property
    def mean_relay_energy(self) -> float:
        return float(self.relay_energy_samples.mean())

    @property
    def k_weak_mean(self) -> float:
        h = self.k_weak_histogram
        return float(np.dot(np.arange(h.size), h) / h.sum())


@dataclass
class _ChunkResult:
    outage: int
    overflow: int
    k_hist: np.ndarray
    energy: np.ndarray


def _seed(master: int, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(master, spawn_key=key)


def fixed_placement_statics(spec: RunSpec) -> LinkStatics:
    placement = spec.placement
    if placement is None:
        placement = sample_placement(spec.cfg, _seed(spec.master_seed, 0, 0))
    return statics_from_positions(spec.cfg, placement.ap_positions, placement.dev_positions,
                                  _seed(spec.master_seed, 0, 1))


def chunk_channels(spec: RunSpec, index: int, n_cycles: int, pilots: int, mode: str,
                   fixed: LinkStatics | None = None) -> ChannelBatch:
    """Channel realizations of chunk ``index``; identical for any protocol
    parameters sharing ``(pilots, mode)``."""
    geom_ss, fade_ss = _seed(spec.master_seed, 1, index).spawn(2)
    cfg = spec.cfg
    if spec.iid_snr is not None:
        statics = iid_statics(cfg.n_aps, cfg.n_devices, spec.iid_snr)
    elif spec.placement_mode == "fixed":
        statics = fixed if fixed is not None else fixed_placement_statics(spec)
    elif spec.placement_mode == "per_block":
        geom = make_rng(geom_ss)
        pl = sample_placement(cfg, geom)
        statics = statics_from_positions(cfg, pl.ap_positions, pl.dev_positions, geom)
    else:
        geom = make_rng(geom_ss)
        side = cfg.floor_side_m
        ap = geom.uniform(0.0, side, size=(n_cycles, cfg.n_aps, 2))
        dev = geom.uniform(0.0, side, size=(n_cycles, cfg.n_devices, 2))
        statics = statics_from_positions(cfg, ap, dev, geom)
    return sample_cycles(statics, n_cycles, pilots, mode, make_rng(fade_ss))


def _chunk_bounds(spec: RunSpec):
    size = spec.effective_chunk
    n_chunks = -(-spec.n_cycles // size)
    for i in range(n_chunks):
        yield i, min(size, spec.n_cycles - i * size)


def _run_chunk(args) -> list[_ChunkResult]:
    spec, params_list, index, n_cycles, fixed = args
    n = spec.cfg.n_devices
    cache = {}
    results = []
    for params in params_list:
        key = (params.csi_mode, params.pilots)
        if key not in cache:
            cache[key] = chunk_channels(spec, index, n_cycles, params.pilots, params.csi_mode, fixed)
        out = run_batch(cache[key], params, spec.cfg)
        results.append(_ChunkResult(
            outage=int(out.outage.sum()),
            overflow=int(out.overflow.sum()),
            k_hist=np.bincount(out.k_weak, minlength=n + 1),
            energy=out.mean_relay_energy,
        ))
    return results


def run_many(spec: RunSpec, params_list, workers: int = 1) -> list[RunStats]:
    """Evaluate several protocol settings on common random numbers.

    Every entry of ``params_list`` sees exactly the channel realizations
    that ``run(replace(spec, params=p))`` would see.
    """
    params_list = list(params_list)
    if not params_list:
        raise ValueError("params_list is empty")
    for p in params_list:
        data_time(p, spec.cfg)  # surface pilot-overhead errors before any work
    fixed = None
    if spec.iid_snr is None and spec.placement_mode == "fixed":
        fixed = fixed_placement_statics(spec)
    jobs = [(spec, params_list, i, c, fixed) for i, c in _chunk_bounds(spec)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_run_chunk, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        chunks = [_run_chunk(job) for job in jobs]

    stats = []
    for j in range(len(params_list)):
        parts = [c[j] for c in chunks]
        outage = sum(p.outage for p in parts)
        overflow = sum(p.overflow for p in parts)
        stats.append(RunStats(
            outage=EstimateWithCI.from_counts(outage, spec.n_cycles),
            k_weak_histogram=np.sum([p.k_hist for p in parts], axis=0),
            relay_energy_samples=np.concatenate([p.energy for p in parts]),
            overflow_rate=overflow / spec.n_cycles,
        ))
    return stats


def run(spec: RunSpec, workers: int = 1) -> RunStats:
    return run_many(spec, [spec.params], workers=workers)[0]


@dataclass
class SweepRow:
    axis: dict
    spec: RunSpec
    stats: RunStats | None
    error: str | None = None


def sweep(specs, axis_values=None, workers: int = 1) -> list[SweepRow]:
    """Run each spec in order; a failing spec yields a row carrying the
    error instead of aborting the sweep."""
    specs = list(specs)
    if not specs:
        raise ValueError("nothing to sweep")
    axis_values = list(axis_values) if axis_values is not None else [{} for _ in specs]
    if len(axis_values) != len(specs):
        raise ValueError("one axis value per spec required")
    rows = []
    for spec, axis in zip(specs, axis_values):
        try:
            rows.append(SweepRow(dict(axis), spec, run(spec, workers=workers)))
        except ValueError as exc:
            log.warning("sweep point %s failed: %s", axis, exc)
            rows.append(SweepRow(dict(axis), spec, None, str(exc)))
    return rows
