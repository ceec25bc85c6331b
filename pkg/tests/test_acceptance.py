"""Acceptance suite: one test per criterion, each printed as a PASS/FAIL
line in the terminal summary (see conftest.py)."""

import math
import time
from dataclasses import replace

import numpy as np
import pytest
from scipy import special

from andcoop.analytic import (IidScenario, dmt_single_hop, dmt_two_hop, empirical_outage_exponent,
                              p2h_closed_form, single_hop_bounds_snr)
from andcoop.channel import NetworkConfig
from andcoop.cli import main
from andcoop.coverage import MapSpec, compute_coverage
from andcoop.engine import RunSpec, combined_se, run, run_many
from andcoop.linkmath import FailProbParams, fail_prob_m
from andcoop.optimizer import OptSpec, default_grid, optimize
from andcoop.protocol import ProtocolParams

W = 20e6
T = 1e-3


def _snr_for_outage(scn_of, target):
    # bisection in log SNR on a decreasing outage curve
    lo, hi = -30.0, 60.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if p2h_closed_form(scn_of(10 ** (mid / 10))) > target:
            lo = mid
        else:
            hi = mid
    return 10 ** (hi / 10)


@pytest.mark.criterion(1, "two-hop Monte Carlo agrees with the closed form")
def test_ac1_oracle_equivalence(detail):
    start = time.perf_counter()
    worst = 0.0
    failures = []
    for n in range(1, 6):
        for m in range(1, 4):
            # R_b = R_r = W, so every device needs 1 bpcu in each hop
            cfg = NetworkConfig(n_devices=n, n_aps=m, payload_bytes=W * 0.5 * T / (8 * n))
            snr = _snr_for_outage(lambda s: IidScenario(n, m, s, W, W, W), 1e-2)
            exact = p2h_closed_form(IidScenario(n, m, snr, W, W, W))
            assert 1e-3 <= exact <= 1e-1
            spec = RunSpec(cfg, ProtocolParams(scheme="two_hop"), 1_000_000,
                           master_seed=100 + 10 * n + m, iid_snr=snr)
            est = run(spec).outage
            z = abs(est.estimate - exact) / est.std_error
            worst = max(worst, z)
            if z > 3:
                failures.append((n, m, est.estimate, exact, z))
    elapsed = time.perf_counter() - start
    detail(f"15 cases, max |z| = {worst:.2f}, {elapsed:.0f} s")
    assert not failures, failures
    assert elapsed < 300


@pytest.mark.criterion(2, "Erlang failure probability matches brute-force sums")
def test_ac2_erlang_identity(detail):
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    n = 10_000_000
    worst = 0.0
    for m in (1, 2, 4, 8):
        # thresholds picked from the exact quantiles at three depths
        xs = [float(special.gammaincinv(m, q)) for q in (0.5, 1e-2, 1e-4)]
        hits = np.zeros(3, dtype=np.int64)
        for _ in range(10):
            s = rng.standard_exponential((n // 10, m)).sum(axis=1)
            hits += [np.count_nonzero(s < x) for x in xs]
        for x, h in zip(xs, hits):
            p_hat = h / n
            se = math.sqrt(p_hat * (1 - p_hat) / n)
            # omega / P_t = x with R = W and noise density 1 W/Hz
            val = fail_prob_m(FailProbParams(m=m, rate=W, bandwidth=W, p_t=W / x, noise_psd=1.0))
            z = abs(val - p_hat) / se
            worst = max(worst, z)
            assert z <= 3, (m, x, val, p_hat)
    elapsed = time.perf_counter() - start
    detail(f"12 cases, max |z| = {worst:.2f}, {elapsed:.0f} s")
    assert elapsed < 120


def _weighted_slope(snr_db, outage, events):
    x = np.asarray(snr_db) / 10.0 * math.log(10)
    y = np.log(outage)
    w = np.asarray(events, dtype=float)
    xm = np.average(x, weights=w)
    ym = np.average(y, weights=w)
    return -float(np.sum(w * (x - xm) * (y - ym)) / np.sum(w * (x - xm) ** 2))


@pytest.mark.criterion(3, "diversity slopes of analytic curves and k-best simulation")
def test_ac3_diversity_slopes(detail):
    notes = []
    # analytic two-hop curve: slope read where outage is below 1e-8
    for m, n in ((2, 3), (3, 4)):
        snr = np.logspace(2, 12, 41)
        out = [p2h_closed_form(IidScenario(n, m, s, W, W, W)) for s in snr]
        slopes = [s for o, s in empirical_outage_exponent(list(zip(snr, out))) if o < 1e-8]
        terminal = slopes[-1]
        notes.append(f"p2h(M={m},N={n}) {terminal:.3f}")
        assert terminal == pytest.approx(m + n - 1, rel=0.02)

    # single-hop bounds: slope M
    for m in (1, 2, 3):
        snr = np.logspace(2, 10, 33)
        for which in (0, 1):
            out = [single_hop_bounds_snr(5, m, 400.0, T, s, W)[which] for s in snr]
            terminal = empirical_outage_exponent(list(zip(snr, out)))[-1][1]
            assert terminal == pytest.approx(m, rel=0.02)
        notes.append(f"bounds(M={m}) {terminal:.3f}")

    # k-best Monte Carlo, N = 3, M = 1, 30 dB window 10-40 dB; fit over the
    # points that the run resolves (outage >= 1e-4) inside the high-SNR
    # regime (outage <= 1e-2)
    cfg = NetworkConfig(n_devices=3, n_aps=1, payload_bytes=W * T / 3 / 8)
    grid = np.arange(10.0, 40.0 + 1e-9, 1.25)
    params = [ProtocolParams(scheme="k_best", k=k) for k in (1, 2, 3)]
    table = []
    for i, s in enumerate(grid):
        spec = RunSpec(cfg, params[0], 2_000_000, master_seed=300 + i, iid_snr=10 ** (s / 10))
        table.append([st.outage for st in run_many(spec, params)])
    for j, k in enumerate((1, 2, 3)):
        pts = [(s, row[j]) for s, row in zip(grid, table) if 1e-4 <= row[j].estimate <= 1e-2]
        assert len(pts) >= 2
        slope = _weighted_slope([s for s, _ in pts], [e.estimate for _, e in pts],
                                [e.n_events for _, e in pts])
        d = 1 * (3 - k + 1)
        notes.append(f"k_best(K={k}) {slope:.2f} vs {d} over {len(pts)} pts")
        assert slope == pytest.approx(d, rel=0.15)
    detail(", ".join(notes))


@pytest.mark.criterion(4, "equal-split single-hop outage lies between its bounds")
def test_ac4_bound_sandwich(detail):
    n, m = 5, 2
    cfg = NetworkConfig(n_devices=n, n_aps=m, payload_bytes=W * T / n / 8)
    worst = -math.inf
    for i, snr_db in enumerate(np.arange(0.0, 20.0 + 1e-9, 2.5)):
        snr = 10 ** (snr_db / 10)
        spec = RunSpec(cfg, ProtocolParams(scheme="single_hop"), 200_000, master_seed=400 + i,
                       iid_snr=snr)
        est = run(spec).outage
        lo, hi = single_hop_bounds_snr(n, m, cfg.payload_bits, T, snr, W)
        assert lo - 3 * est.std_error <= est.estimate <= hi + 3 * est.std_error, (snr_db, lo, est, hi)
        worst = max(worst, (lo - est.estimate) / max(est.std_error, 1e-300),
                    (est.estimate - hi) / max(est.std_error, 1e-300))
    detail(f"9 powers over 20 dB, worst excursion {worst:.1f} SE")


@pytest.mark.criterion(5, "optimized beta dominates both endpoints")
def test_ac5_endpoint_domination(detail):
    notes = []
    for m, power in ((1, 13.0), (2, 5.0)):
        cfg = NetworkConfig(n_devices=10, n_aps=m).with_power(power)
        spec = RunSpec(cfg, ProtocolParams(), 100_000, master_seed=500 + m)
        res = optimize(OptSpec(spec, beta_grid=tuple(default_grid())))
        opt = res.outage_at_opt
        # endpoints from independent draws
        ends = [run(replace(spec, params=ProtocolParams(scheme=s), master_seed=600 + m)).outage
                for s in ("two_hop", "single_hop")]
        for e in ends:
            assert opt.estimate <= e.estimate + 3 * combined_se(opt, e)
        notes.append(f"M={m}: beta_hat {res.beta_hat:.2f} {opt.estimate:.1e} vs "
                     f"{ends[0].estimate:.1e}/{ends[1].estimate:.1e}")
    detail("; ".join(notes))


@pytest.mark.criterion(6, "ANDCoop spends no more relay energy than all-two-hop")
def test_ac6_energy_direction(detail):
    cfg = NetworkConfig(n_devices=10, n_aps=1).with_power(16.0)
    spec = RunSpec(cfg, ProtocolParams(), 100_000, master_seed=61)
    res = optimize(OptSpec(spec, beta_grid=tuple(default_grid())))
    ours, base = run_many(replace(spec, master_seed=62),
                          [ProtocolParams(beta=res.beta_hat), ProtocolParams(scheme="two_hop")])
    assert ours.outage.estimate <= 1e-3 and base.outage.estimate <= 1e-3
    assert ours.mean_relay_energy <= base.mean_relay_energy
    detail(f"beta_hat {res.beta_hat:.2f}: {ours.mean_relay_energy:.2e} J vs "
           f"{base.mean_relay_energy:.2e} J at outage {ours.outage.estimate:.1e}/"
           f"{base.outage.estimate:.1e}")


@pytest.mark.criterion(7, "population scaling shape of the two endpoints")
def test_ac7_scalability_shape(detail):
    ns = (2, 5, 10, 20)
    single, two = [], []
    for n in ns:
        cfg = NetworkConfig(n_devices=n).with_power(10.0)
        spec = RunSpec(cfg, ProtocolParams(), 100_000, master_seed=700 + n)
        a, b = run_many(spec, [ProtocolParams(scheme="single_hop"), ProtocolParams(scheme="two_hop")])
        single.append(a.outage)
        two.append(b.outage)
    for x, y in zip(single, single[1:]):
        assert y.estimate >= x.estimate - 3 * combined_se(x, y)
    turns = [y.estimate < x.estimate - 3 * combined_se(x, y) for x, y in zip(two, two[1:])]
    assert any(turns)
    detail("beta=1 " + "/".join(f"{e.estimate:.1e}" for e in single)
           + ", beta=0 " + "/".join(f"{e.estimate:.1e}" for e in two))


@pytest.mark.criterion(8, "results regenerate bit-identically from the manifest")
def test_ac8_determinism(tmp_path, detail):
    scn = tmp_path / "s.cfg"
    scn.write_text("[network]\nn_devices = 10\nn_aps = 2\n[protocol]\ncsi_mode = imperfect\n"
                   "pilots = 10\ntheta = 0.9\n[run]\ncycles = 20000\nseed = 88\n"
                   "placement = per_cycle\nchunk_size = 3000\n[experiment]\nkind = power_sweep\n"
                   "power_dbm = 0, 5, 10\n")
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", str(scn), "--out", str(a), "--workers", "1"]) == 0
    assert main(["run", str(a / "manifest.txt"), "--out", str(b), "--workers", "3"]) == 0
    rows_a = (a / "results.csv").read_text().splitlines()
    rows_b = (b / "results.csv").read_text().splitlines()
    assert rows_a == rows_b
    for name in ("k_weak_hist.csv", "relay_energy_cdf.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    detail(f"{len(rows_a) - 2} rows identical at 1 and 3 workers")


@pytest.mark.criterion(9, "tradeoff curve identities hold exactly")
def test_ac9_dmt_identities(detail):
    count = 0
    for m in range(1, 6):
        for n in (1, 2, 5, 10, 50):
            lo, hi = dmt_single_hop(m, n, [0.0])
            assert lo.d[0] == m and hi.d[0] == m
            for alpha in (0.1, 0.25, 0.5, 0.7, 0.9):
                two = dmt_two_hop(m, n, alpha, [0.0, 1.0 - alpha])
                assert two.d[0] == m + n - 1
                assert two.d[1] == 0.0
                count += 1
    detail(f"{count} (M, N, alpha) combinations")


@pytest.mark.criterion(10, "combined two-phase coverage beats single-hop coverage")
def test_ac10_coverage_ordering(detail):
    res = compute_coverage(MapSpec())
    frac = res.coverage_fraction
    shadow = res.shadow_fraction()
    assert frac["combined"] >= frac["single"]
    assert shadow["combined"] > shadow["single"]
    detail(f"overall {frac['combined']:.3f} vs {frac['single']:.3f}, "
           f"shadow {shadow['combined']:.3f} vs {shadow['single']:.3f}")
