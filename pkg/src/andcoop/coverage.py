"""Coverage maps of a target outage level with a blocking wall.

Phases compared at equal total airtime:

* ``single``: the multi-antenna AP transmits over the full cycle at
  ``rate_bpcu``;
* ``broadcast``: the AP over the first half-cycle at twice the rate;
* ``relay``: the relay devices (assumed to hold the message) over the
  second half-cycle at twice the rate.

A point is covered in a phase when its Rayleigh failure probability is at
most ``target_outage``; the two-hop variant covers the union of the
broadcast and relay phases.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .channel import NetworkConfig, path_loss_db
from .linkmath import fail_prob_snr, fail_prob_sum_many

PHASES = ("single", "broadcast", "relay")


@dataclass(frozen=True)
class MapSpec:
    grid_resolution: int = 100
    floor_side_m: float = 100.0
    ap_position: tuple = (50.0, 50.0)
    ap_antennas: int = 4
    relay_positions: tuple = ((82.0, 30.0), (88.0, 50.0), (82.0, 70.0))
    wall: tuple = ((75.0, 25.0), (75.0, 75.0))
    penetration_loss_db: float = 20.0
    target_outage: float = 1e-9
    rate_bpcu: float = 1.0
    network: NetworkConfig = field(default_factory=NetworkConfig)

    def __post_init__(self):
        if self.grid_resolution < 2:
            raise ValueError("grid_resolution must be >= 2")
        if self.penetration_loss_db < 0:
            raise ValueError("penetration loss must be nonnegative")
        if self.ap_antennas < 1:
            raise ValueError("need at least one AP antenna")
        if not 0.0 < self.target_outage <= 1.0:
            raise ValueError("target_outage must lie in (0, 1]")

    def grid(self):
        """Cell-center coordinates ``(X, Y)`` of shape ``(res, res)``."""
        step = self.floor_side_m / self.grid_resolution
        axis = (np.arange(self.grid_resolution) + 0.5) * step
        return np.meshgrid(axis, axis)


@dataclass
class CoverageResult:
    x: np.ndarray
    y: np.ndarray
    snr_db: dict  # phase -> (res, res)
    fail_prob: dict
    covered: dict  # phases plus "combined"
    shadow: np.ndarray  # points whose AP link crosses the wall

    @property
    def coverage_fraction(self) -> dict:
        return {k: float(v.mean()) for k, v in self.covered.items()}

    def shadow_fraction(self) -> dict:
        if not self.shadow.any():
            return {k: float("nan") for k in self.covered}
        return {k: float(v[self.shadow].mean()) for k, v in self.covered.items()}


def crosses_segment(p, q, a, b):
    """Whether segments ``p->q`` and ``a->b`` properly intersect.

    ``p`` and ``q`` broadcast as ``(..., 2)`` arrays; ``a``/``b`` are points.
    """
    p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)

    def orient(u, v, w):
        return np.sign((v[..., 0] - u[..., 0]) * (w[..., 1] - u[..., 1])
                       - (v[..., 1] - u[..., 1]) * (w[..., 0] - u[..., 0]))

    o1, o2 = orient(p, q, a), orient(p, q, b)
    o3, o4 = orient(a, b, p), orient(a, b, q)
    return (o1 * o2 < 0) & (o3 * o4 < 0)


def link_snr_db(spec: MapSpec, tx, tx_dbm: float, pts) -> np.ndarray:
    """Deterministic average SNR from ``tx`` to every point in ``pts``."""
    cfg = spec.network
    tx = np.asarray(tx, dtype=float)
    d = np.linalg.norm(pts - tx, axis=-1)
    blocked = crosses_segment(tx, pts, *spec.wall)
    pl = path_loss_db(d, ~blocked, cfg) + np.where(blocked, spec.penetration_loss_db, 0.0)
    return tx_dbm - pl - cfg.noise_power_dbm


def compute_coverage(spec: MapSpec) -> CoverageResult:
    cfg = spec.network
    w = cfg.bandwidth_hz
    x, y = spec.grid()
    pts = np.stack([x, y], axis=-1)
    shape = x.shape

    ap_snr_db = link_snr_db(spec, spec.ap_position, cfg.p_ap_dbm, pts)
    ap_snr = 10.0 ** (ap_snr_db / 10.0)
    r_single = spec.rate_bpcu * w
    r_half = 2.0 * spec.rate_bpcu * w

    fail = {
        "single": np.asarray(fail_prob_snr(spec.ap_antennas, ap_snr, r_single, w)),
        "broadcast": np.asarray(fail_prob_snr(spec.ap_antennas, ap_snr, r_half, w)),
    }
    snr_db = {"single": ap_snr_db, "broadcast": ap_snr_db}

    if spec.relay_positions:
        relay_db = np.stack([link_snr_db(spec, r, cfg.p_dev_dbm, pts)
                             for r in spec.relay_positions], axis=-1)
        relay_lin = 10.0 ** (relay_db / 10.0)
        fail["relay"] = fail_prob_sum_many(relay_lin.reshape(-1, relay_lin.shape[-1]),
                                           r_half, w).reshape(shape)
        snr_db["relay"] = 10.0 * np.log10(relay_lin.sum(axis=-1))
    else:
        fail["relay"] = np.ones(shape)
        snr_db["relay"] = np.full(shape, -np.inf)

    covered = {k: v <= spec.target_outage for k, v in fail.items()}
    covered["combined"] = covered["broadcast"] | covered["relay"]
    shadow = crosses_segment(np.asarray(spec.ap_position, dtype=float), pts, *spec.wall)
    return CoverageResult(x, y, snr_db, fail, covered, shadow)


def write_coverage(result: CoverageResult, out_dir) -> list[Path]:
    """Write per-phase SNR and coverage matrices plus a summary CSV."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for phase in PHASES:
        p = out / f"coverage_snr_db_{phase}.csv"
        np.savetxt(p, result.snr_db[phase], delimiter=",", fmt="%.6f")
        written.append(p)
    for phase in PHASES + ("combined",):
        p = out / f"coverage_covered_{phase}.csv"
        np.savetxt(p, result.covered[phase].astype(int), delimiter=",", fmt="%d")
        written.append(p)
    summary = out / "coverage_summary.csv"
    frac, shadow = result.coverage_fraction, result.shadow_fraction()
    with open(summary, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["phase", "coverage_fraction", "shadow_coverage_fraction"])
        for phase in PHASES + ("combined",):
            wr.writerow([phase, repr(frac[phase]), repr(shadow[phase])])
    written.append(summary)
    return written
