"""Command-line front end.

``andcoop run SCENARIO --out DIR`` executes the experiment named in the
file; ``andcoop <kind> SCENARIO`` forces a kind. ``--seed``, ``--cycles``
and ``--workers`` override the ``[run]`` section. Exit status: 0 on
success, 1 on configuration errors, 2 on runtime errors.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import subprocess
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .analytic import IidScenario, dmt_single_hop, dmt_two_hop, p2h_closed_form, single_hop_bounds_snr
from .config import KINDS, Scenario, ScenarioError, emit, parse_scenario, with_overrides
from .coverage import MapSpec, compute_coverage, write_coverage
from .engine import RunSpec, RunStats, run, sweep
from .optimizer import OptSpec, default_grid, optimize
from .protocol import ConfigurationError, data_time

log = logging.getLogger("andcoop")

SCHEMA = "andcoop-results v1"
COLUMNS = ("kind", "axis", "axis_value", "scheme", "csi_mode", "n_devices", "n_aps",
           "payload_bytes", "eta_bpcu", "power_dbm", "snr_db", "beta", "theta", "pilots",
           "metric", "value", "se", "n_cycles", "n_events", "k_weak_mean", "overflow_rate",
           "mean_relay_energy_j", "source", "error")
ENERGY_QUANTILES = np.linspace(0.0, 1.0, 101)


def run_spec(scn: Scenario, cfg=None, params=None) -> RunSpec:
    r = scn.run
    iid = None if r.iid_snr_db is None else 10.0 ** (r.iid_snr_db / 10.0)
    return RunSpec(cfg or scn.network, params or scn.protocol, r.cycles, r.seed, r.placement,
                   r.block_size, None, iid, r.chunk_size)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


class _Results:
    """Collects rows plus the per-row extras written alongside them."""

    def __init__(self, scn: Scenario):
        self.scn = scn
        self.rows = []
        self.k_hist = []
        self.energy = []

    def base(self, spec: RunSpec, axis=None, axis_value=None) -> dict:
        cfg, p = spec.cfg, spec.params
        return {
            "kind": self.scn.experiment.kind, "axis": axis, "axis_value": axis_value,
            "scheme": p.scheme, "csi_mode": p.csi_mode, "n_devices": cfg.n_devices,
            "n_aps": cfg.n_aps, "payload_bytes": cfg.payload_bytes,
            "eta_bpcu": cfg.spectral_efficiency,
            "power_dbm": None if spec.iid_snr is not None else cfg.p_ap_dbm,
            "snr_db": None if spec.iid_snr is None else 10.0 * math.log10(spec.iid_snr),
            "beta": p.effective_beta, "theta": p.theta, "pilots": p.pilots,
        }

    def add_mc(self, spec, stats: RunStats | None, axis=None, axis_value=None,
               metric="system_outage", error=None):
        row = self.base(spec, axis, axis_value)
        row.update(metric=metric, source="montecarlo", error=error)
        if stats is not None:
            o = stats.outage
            row.update(value=o.estimate, se=o.std_error, n_cycles=o.n_cycles, n_events=o.n_events,
                       k_weak_mean=stats.k_weak_mean, overflow_rate=stats.overflow_rate,
                       mean_relay_energy_j=stats.mean_relay_energy)
            idx = len(self.rows)
            self.k_hist.append((idx, stats.k_weak_histogram))
            self.energy.append((idx, np.quantile(stats.relay_energy_samples, ENERGY_QUANTILES)))
        self.rows.append(row)

    def add_analytic(self, spec, metric, value, axis=None, axis_value=None):
        row = self.base(spec, axis, axis_value) if spec is not None else {
            "kind": self.scn.experiment.kind, "axis": axis, "axis_value": axis_value}
        row.update(metric=metric, value=value, source="analytic")
        self.rows.append(row)

    def write(self, out: Path) -> None:
        with open(out / "results.csv", "w", newline="") as fh:
            fh.write(f"# {SCHEMA}\n")
            w = csv.writer(fh)
            w.writerow(COLUMNS)
            for row in self.rows:
                w.writerow([_fmt(row.get(c)) for c in COLUMNS])
        if self.k_hist:
            n_max = max(h.size for _, h in self.k_hist)
            with open(out / "k_weak_hist.csv", "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["row"] + [f"k{k}" for k in range(n_max)])
                for idx, h in self.k_hist:
                    w.writerow([idx] + list(h) + [""] * (n_max - h.size))
            with open(out / "relay_energy_cdf.csv", "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["row"] + [f"q{q:.2f}" for q in ENERGY_QUANTILES])
                for idx, q in self.energy:
                    w.writerow([idx] + [repr(float(v)) for v in q])


def _iid_analytic(res: _Results, spec: RunSpec, axis, value):
    cfg, p = spec.cfg, spec.params
    t_d = data_time(p, cfg)
    n, b = cfg.n_devices, cfg.payload_bits
    w = cfg.bandwidth_hz
    if p.scheme == "two_hop":
        scn = IidScenario(n, cfg.n_aps, spec.iid_snr, n * b / (p.alpha * t_d),
                          n * b / ((1 - p.alpha) * t_d), w)
        res.add_analytic(spec, "system_outage", p2h_closed_form(scn), axis, value)
    elif p.scheme == "single_hop":
        lo, hi = single_hop_bounds_snr(n, cfg.n_aps, b, t_d, spec.iid_snr, w)
        res.add_analytic(spec, "single_hop_lower_bound", lo, axis, value)
        res.add_analytic(spec, "single_hop_upper_bound", hi, axis, value)


def _sweep(res: _Results, scn: Scenario, axis: str, specs, values, workers):
    for row in sweep(specs, [{axis: v} for v in values], workers=workers):
        res.add_mc(row.spec, row.stats, axis, row.axis[axis], error=row.error)
        if scn.experiment.analytic and row.spec.iid_snr is not None:
            _iid_analytic(res, row.spec, axis, row.axis[axis])


def _opt_grids(scn: Scenario):
    exp = scn.experiment
    beta = exp.beta_grid or tuple(default_grid())
    if scn.protocol.csi_mode == "perfect":
        theta = exp.theta_grid or (1.0,)
    else:
        theta = exp.theta_grid or tuple(default_grid(include_zero=False))
    return beta, theta


def _write_surface(path: Path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["pilots", "beta", "theta", "outage", "se", "n_cycles"])
        for pilots, result in rows:
            for b, t, e in result.full_surface:
                w.writerow([pilots, repr(b), repr(t), repr(e.estimate), repr(e.std_error),
                            e.n_cycles])


def execute(scn: Scenario, out_dir, command: str = "") -> int:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    exp = scn.experiment
    workers = scn.run.workers
    res = _Results(scn)
    spec = run_spec(scn)

    if exp.kind == "single":
        res.add_mc(spec, run(spec, workers=workers))
        if exp.analytic and spec.iid_snr is not None:
            _iid_analytic(res, spec, None, None)
    elif exp.kind == "power_sweep":
        if exp.snr_db is not None:
            vals = exp.snr_db
            specs = [replace(spec, iid_snr=10.0 ** (v / 10.0)) for v in vals]
            _sweep(res, scn, "snr_db", specs, vals, workers)
        else:
            vals = exp.power_dbm or (scn.network.p_ap_dbm,)
            specs = [replace(spec, cfg=scn.network.with_power(v)) for v in vals]
            _sweep(res, scn, "power_dbm", specs, vals, workers)
    elif exp.kind == "rate_sweep":
        vals = exp.payload_bytes or (scn.network.payload_bytes,)
        specs = [replace(spec, cfg=replace(scn.network, payload_bytes=v)) for v in vals]
        _sweep(res, scn, "payload_bytes", specs, vals, workers)
    elif exp.kind == "population_sweep":
        vals = exp.n_devices or (scn.network.n_devices,)
        specs = [replace(spec, cfg=replace(scn.network, n_devices=v)) for v in vals]
        _sweep(res, scn, "n_devices", specs, vals, workers)
    elif exp.kind in ("optimize", "pilot_tradeoff"):
        beta, theta = _opt_grids(scn)
        if exp.kind == "optimize":
            pilot_list = (scn.protocol.pilots,)
        else:
            if scn.protocol.csi_mode != "imperfect":
                raise ConfigurationError("pilot_tradeoff needs csi_mode = imperfect")
            pilot_list = exp.pilots or (scn.protocol.pilots,)
        surfaces = []
        for pilots in pilot_list:
            base = replace(spec, params=replace(spec.params, pilots=pilots))
            result = optimize(OptSpec(base, tuple(beta), tuple(theta), pilots), workers=workers)
            surfaces.append((pilots, result))
            for b, t, e in result.full_surface:
                p = replace(base.params, scheme="andcoop", beta=b, theta=t)
                row = res.base(replace(base, params=p), "pilots", pilots)
                row.update(metric="system_outage", value=e.estimate, se=e.std_error,
                           n_cycles=e.n_cycles, n_events=e.n_events, source="montecarlo")
                res.rows.append(row)
            p = replace(base.params, scheme="andcoop", beta=result.beta_hat, theta=result.theta_hat)
            row = res.base(replace(base, params=p), "pilots", pilots)
            o = result.outage_at_opt
            row.update(metric="system_outage_at_opt", value=o.estimate, se=o.std_error,
                       n_cycles=o.n_cycles, n_events=o.n_events, source="montecarlo")
            res.rows.append(row)
        _write_surface(out / "surface.csv", surfaces)
    elif exp.kind == "dmt":
        r = np.asarray(exp.r_grid if exp.r_grid else np.round(np.linspace(0, 1, 21), 10))
        m, n, a = scn.network.n_aps, scn.network.n_devices, scn.protocol.alpha
        lo, hi = dmt_single_hop(m, n, r)
        two = dmt_two_hop(m, n, a, r)
        with open(out / "dmt.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "single_hop_lower", "single_hop_upper", "two_hop"])
            for i, rv in enumerate(r):
                w.writerow([repr(float(rv)), repr(float(lo.d[i])), repr(float(hi.d[i])),
                            repr(float(two.d[i]))])
        for curve, metric in ((lo, "diversity_single_hop_lower"),
                              (hi, "diversity_single_hop_upper"), (two, "diversity_two_hop")):
            for rv, dv in zip(curve.r, curve.d):
                res.add_analytic(spec, metric, float(dv), "r", float(rv))
    elif exp.kind == "coverage":
        mspec = MapSpec(grid_resolution=exp.grid_resolution,
                        floor_side_m=scn.network.floor_side_m, ap_position=exp.ap_position,
                        ap_antennas=exp.ap_antennas, relay_positions=exp.relays, wall=exp.wall,
                        penetration_loss_db=exp.penetration_loss_db,
                        target_outage=exp.target_outage, rate_bpcu=exp.rate_bpcu,
                        network=scn.network)
        cov = compute_coverage(mspec)
        write_coverage(cov, out)
        shadow = cov.shadow_fraction()
        for phase, frac in cov.coverage_fraction.items():
            res.add_analytic(None, f"coverage_{phase}", frac, "phase", phase)
            res.add_analytic(None, f"shadow_coverage_{phase}", shadow[phase], "phase", phase)
    else:  # pragma: no cover - guarded by ExperimentSection
        raise ScenarioError(f"unknown kind {exp.kind}")

    res.write(out)
    _write_manifest(out / "manifest.txt", scn, spec, command)
    return 0


def _describe() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"],
                             cwd=Path(__file__).parent, capture_output=True, text=True, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def _write_manifest(path: Path, scn: Scenario, spec: RunSpec, command: str):
    head = [
        "# andcoop run manifest; this file is itself a runnable scenario",
        f"# version: {_describe()}",
        f"# results schema: {SCHEMA}",
        f"# cycles per chunk: {spec.effective_chunk}",
        f"# command: {command}",
        "",
    ]
    path.write_text("\n".join(head) + emit(scn))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="andcoop", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("run",) + KINDS:
        p = sub.add_parser(name, help="experiment from file" if name == "run" else f"{name} experiment")
        p.add_argument("scenario", help="scenario file (see README for the format)")
        p.add_argument("--out", default="results", help="output directory")
        p.add_argument("--seed", type=int)
        p.add_argument("--cycles", type=int)
        p.add_argument("--workers", type=int)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        scn = parse_scenario(args.scenario)
        kind = None if args.command == "run" else args.command
        scn = with_overrides(scn, kind=kind, seed=args.seed, cycles=args.cycles,
                             workers=args.workers)
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    command = " ".join(["andcoop"] + list(argv if argv is not None else sys.argv[1:]))
    try:
        return execute(scn, args.out, command)
    except (ConfigurationError, ScenarioError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - exit code contract
        log.debug("runtime failure", exc_info=True)
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
