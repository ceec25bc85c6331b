"""Offline grid search over the time split beta and the rate back-off theta."""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from .engine import EstimateWithCI, RunSpec, run_many
from .protocol import ConfigurationError, ProtocolParams


def default_grid(step: float = 0.05, include_zero: bool = True) -> list[float]:
    n = int(round(1.0 / step))
    grid = [round(i * step, 10) for i in range(n + 1)]
    return grid if include_zero else grid[1:]


@dataclass(frozen=True)
class OptSpec:
    base: RunSpec
    beta_grid: tuple = tuple(default_grid())
    theta_grid: tuple = (1.0,)
    fixed_L: int = 0
    cycles_per_point: int | None = None

    def __post_init__(self):
        if not self.beta_grid or not self.theta_grid:
            raise ValueError("grids must be nonempty")
        if any(not 0.0 <= b <= 1.0 for b in self.beta_grid):
            raise ValueError("beta grid must lie in [0, 1]")
        if any(not 0.0 < t <= 1.0 for t in self.theta_grid):
            raise ValueError("theta grid must lie in (0, 1]")
        if self.base.params.csi_mode == "perfect":
            if tuple(self.theta_grid) != (1.0,) or self.fixed_L != 0:
                raise ValueError("perfect CSI optimizes beta only (theta = 1, L = 0)")


@dataclass
class OptResult:
    beta_hat: float
    theta_hat: float
    outage_at_opt: EstimateWithCI
    full_surface: list  # (beta, theta, EstimateWithCI)

    def outage_at(self, beta: float, theta: float | None = None) -> EstimateWithCI:
        for b, t, est in self.full_surface:
            if b == beta and (theta is None or t == theta):
                return est
        raise KeyError((beta, theta))

    def best_for_beta(self, beta: float) -> EstimateWithCI:
        """Lowest outage over theta at a fixed beta."""
        cands = [e for b, _, e in self.full_surface if b == beta]
        if not cands:
            raise KeyError(beta)
        return min(cands, key=lambda e: e.estimate)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["beta", "theta", "outage", "se", "n_cycles"])
            for b, t, e in self.full_surface:
                w.writerow([repr(b), repr(t), repr(e.estimate), repr(e.std_error), e.n_cycles])


def optimize(spec: OptSpec, workers: int = 1) -> OptResult:
    """Evaluate every (beta, theta) pair on shared channel draws and pick
    the minimum-outage point, breaking ties toward larger beta, then
    larger theta."""
    base = spec.base
    if spec.cycles_per_point is not None:
        base = replace(base, n_cycles=spec.cycles_per_point)
    points = [(float(b), float(t)) for b in spec.beta_grid for t in spec.theta_grid]
    params = [replace(base.params, scheme="andcoop", beta=b, theta=t, pilots=spec.fixed_L)
              for b, t in points]
    try:
        stats = run_many(base, params, workers=workers)
    except ConfigurationError as exc:
        raise ConfigurationError(f"no grid point can be simulated: {exc}") from exc

    surface = [(b, t, s.outage) for (b, t), s in zip(points, stats)]
    best = min(surface, key=lambda row: (row[2].estimate, -row[0], -row[1]))
    return OptResult(beta_hat=best[0], theta_hat=best[1], outage_at_opt=best[2],
                     full_surface=surface)


def surface_array(result: OptResult) -> np.ndarray:
    """Surface as rows of ``(beta, theta, outage, se)``."""
    return np.array([(b, t, e.estimate, e.std_error) for b, t, e in result.full_surface])
