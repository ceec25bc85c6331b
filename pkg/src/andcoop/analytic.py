"""Closed-form and asymptotic outage evaluators for the i.i.d. scenario.

Every link carries the same nominal SNR with independent Rayleigh fading.
Tail probabilities are accumulated in log space so curves can be pushed
well below what Monte Carlo can certify.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from .linkmath import log_gamma_p, log_gamma_q, omega, snr_threshold


@dataclass(frozen=True)
class IidScenario:
    n_devices: int
    n_aps: int
    nominal_snr: float
    rate_b: float
    rate_r: float
    bandwidth: float

    def __post_init__(self):
        if self.n_devices < 1 or self.n_aps < 1:
            raise ValueError("need at least one device and one AP")
        if self.nominal_snr <= 0 or self.bandwidth <= 0:
            raise ValueError("SNR and bandwidth must be positive")
        if self.rate_b < 0 or self.rate_r < 0:
            raise ValueError("rates must be nonnegative")


@dataclass(frozen=True)
class DmtCurve:
    r: np.ndarray
    d: np.ndarray


def _log1mexp(x: float) -> float:
    """log(1 - exp(x)) for x <= 0."""
    if x == 0.0:
        return -math.inf
    if x > -0.6931471805599453:
        return math.log(-math.expm1(x))
    return math.log1p(-math.exp(x))


def _log_fail(m: int, rate: float, scn: IidScenario) -> float:
    x = float(snr_threshold(rate, scn.bandwidth)) / scn.nominal_snr
    return log_gamma_p(m, x) if x > 0 else -math.inf


def log_p2h_closed_form(scn: IidScenario) -> float:
    """Natural log of the all-devices-two-hop system outage."""
    n_dev, m = scn.n_devices, scn.n_aps
    log_qb = _log_fail(m, scn.rate_b, scn)
    if log_qb == -math.inf:
        return -math.inf
    log_1m_qb = log_gamma_q(m, float(snr_threshold(scn.rate_b, scn.bandwidth)) / scn.nominal_snr)
    terms = []
    for n in range(n_dev):
        k = n_dev - n  # devices that missed the broadcast
        log_qr = min(0.0, _log_fail(m + n, scn.rate_r, scn) - log_qb)
        if log_qr == 0.0:
            log_relay_fail = 0.0
        elif log_qr == -math.inf:
            continue
        else:
            # log(1 - (1 - q_r)^k)
            log_relay_fail = _log1mexp(k * math.log1p(-math.exp(log_qr)))
        log_binom = gammaln(n_dev + 1) - gammaln(n + 1) - gammaln(k + 1)
        n_log_succ = n * log_1m_qb if n else 0.0
        terms.append(k * log_qb + n_log_succ + log_binom + log_relay_fail)
    if not terms:
        return -math.inf
    return min(0.0, float(logsumexp(terms)))


def p2h_closed_form(scn: IidScenario) -> float:
    """System outage when every device is served over the two-hop phase.

    Sums over the number ``n`` of devices that decode the broadcast; a
    device that missed it fails the relay hop with
    ``min(1, p(M+n, R_r) / p(M, R_b))``.
    """
    return math.exp(log_p2h_closed_form(scn))


def p2h_high_snr_approx(scn: IidScenario) -> float:
    """High-SNR form of :func:`p2h_closed_form`: ``(1 - q_b)^n -> 1`` and
    ``1 - (1 - q_r)^k -> k q_r`` except for the ``n = 0`` term, which is
    one when ``R_r <= R_b``."""
    n_dev, m = scn.n_devices, scn.n_aps
    log_qb = _log_fail(m, scn.rate_b, scn)
    if log_qb == -math.inf:
        return 0.0
    terms = []
    for n in range(n_dev):
        k = n_dev - n
        log_binom = gammaln(n_dev + 1) - gammaln(n + 1) - gammaln(k + 1)
        if n == 0 and scn.rate_r <= scn.rate_b:
            log_relay_fail = 0.0
        else:
            log_qr = min(0.0, _log_fail(m + n, scn.rate_r, scn) - log_qb)
            log_relay_fail = math.log(k) + log_qr
        terms.append(k * log_qb + log_binom + log_relay_fail)
    return float(math.exp(logsumexp(terms)))


def single_hop_bounds(n_devices: int, n_aps: int, payload_bits: float, t_1h: float,
                      p_t: float, bandwidth: float, noise_psd: float) -> tuple[float, float]:
    """Lower/upper bounds on the all-single-hop outage.

    Lower: each device may use the whole ``t_1h``; upper: ``t_1h`` split
    equally, i.e. rate ``N B / t_1h`` per device.
    """
    if t_1h <= 0:
        raise ValueError("t_1h must be positive")
    snr = p_t / (bandwidth * noise_psd)
    return single_hop_bounds_snr(n_devices, n_aps, payload_bits, t_1h, snr, bandwidth)


def single_hop_bounds_snr(n_devices, n_aps, payload_bits, t_1h, snr, bandwidth):
    def system_fail(rate):
        x = float(snr_threshold(rate, bandwidth)) / snr
        if x == 0:
            return 0.0
        return -math.expm1(n_devices * log_gamma_q(n_aps, x))

    lower = system_fail(payload_bits / t_1h)
    upper = system_fail(n_devices * payload_bits / t_1h)
    return lower, upper


def _grid(r):
    return np.linspace(0.0, 1.0, 101) if r is None else np.asarray(r, dtype=float)


def dmt_single_hop(n_aps: int, n_devices: int, r=None) -> tuple[DmtCurve, DmtCurve]:
    """Lower ``M (1 - r)`` and upper ``M (1 - r / N)`` single-hop tradeoff."""
    if n_aps < 1 or n_devices < 1:
        raise ValueError("M and N must be >= 1")
    r = _grid(r)
    lower = np.maximum(n_aps * (1.0 - r), 0.0)
    upper = np.maximum(n_aps * (1.0 - r / n_devices), 0.0)
    return DmtCurve(r, lower), DmtCurve(r, upper)


def dmt_two_hop(n_aps: int, n_devices: int, alpha: float, r=None) -> DmtCurve:
    """Two-hop tradeoff ``(M + N - 1)(1 - r / (1 - alpha))``, clipped at 0.

    At ``alpha = 1/2`` this is ``(M + N - 1)(1 - 2 r)`` with its root at
    ``r = 0.5``. The form ``1 - 0.5 r`` sometimes quoted for this case
    does not vanish at ``r = 1 - alpha`` and is not used.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    r = _grid(r)
    d = (n_aps + n_devices - 1) * (1.0 - r / (1.0 - alpha))
    return DmtCurve(r, np.maximum(d, 0.0))


def diversity_k_best(n_aps: int, n_devices: int, k: int) -> int:
    if not 1 <= k <= n_devices:
        raise ValueError("k must lie in [1, N]")
    return n_aps * (n_devices - k + 1)


def empirical_outage_exponent(curve) -> list[tuple[float, float]]:
    """Centered slope of ``-log(outage)`` against ``log(power)``.

    ``curve`` is a sequence of ``(power, outage)`` pairs with strictly
    increasing power; one ``(outage, slope)`` pair is returned per
    interior point.
    """
    pts = np.asarray(curve, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 3:
        raise ValueError("need at least three (power, outage) points")
    p, out = pts[:, 0], pts[:, 1]
    if np.any(out <= 0):
        raise ValueError("outage values must be positive")
    if np.any(np.diff(p) <= 0) or np.any(p <= 0):
        raise ValueError("power must be positive and strictly increasing")
    lp, lo = np.log(p), np.log(out)
    slope = -(lo[2:] - lo[:-2]) / (lp[2:] - lp[:-2])
    return [(float(o), float(s)) for o, s in zip(out[1:-1], slope)]


def erlang_threshold(rate: float, bandwidth: float, noise_psd: float, p_t: float) -> float:
    """``omega / P_t``; exposed for sweeps expressed in transmit power."""
    return float(omega(rate, bandwidth, noise_psd)) / p_t
