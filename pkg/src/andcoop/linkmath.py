"""Link-level mathematics: capacity outage, achievable rate and the
m-transmitter failure probability of i.i.d. Rayleigh branches.

All rates are in bits/second, bandwidths in Hz, powers in W and noise
densities in W/Hz. SNRs are linear.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_TOL = 1e-14
_MAX_ITER = 10_000
_TINY = 1e-300


def decode_succeeds(snr_sum, rate, bandwidth):
    """Return True when ``bandwidth * log2(1 + snr_sum) >= rate``.

    Equality counts as success. Works elementwise on arrays.
    """
    return bandwidth * np.log2(1.0 + np.asarray(snr_sum, dtype=float)) >= rate


def achievable_rate(snr_sum, bandwidth):
    """Shannon rate ``W log2(1 + snr)`` in bits/second."""
    return bandwidth * np.log2(1.0 + np.asarray(snr_sum, dtype=float))


def snr_threshold(rate, bandwidth):
    """Smallest SNR that supports ``rate``: ``2**(R/W) - 1``."""
    return np.expm1(np.asarray(rate, dtype=float) / bandwidth * math.log(2.0))


def omega(rate, bandwidth, noise_psd):
    """Received-power threshold ``W * sigma0 * (2**(R/W) - 1)`` in W."""
    return bandwidth * noise_psd * snr_threshold(rate, bandwidth)


def sigma_e(pilots, snr):
    """MMSE channel-estimation error variance ``1 / (1 + L * rho)``."""
    return 1.0 / (1.0 + np.asarray(pilots, dtype=float) * np.asarray(snr, dtype=float))


# -- regularized incomplete gamma ------------------------------------------


def _log_p_series(a: float, x: float) -> float:
    # log P(a, x) via sum_n x^n / (a (a+1) ... (a+n)); good for x < a + 1
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _TOL:
            break
    return a * math.log(x) - x - math.lgamma(a) + math.log(total)


def _log_q_contfrac(a: float, x: float) -> float:
    # log Q(a, x) via the Legendre continued fraction (modified Lentz); x >= a + 1
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _TOL:
            break
    return a * math.log(x) - x - math.lgamma(a) + math.log(h)


def log_gamma_p(a: float, x: float) -> float:
    """Natural log of the regularized lower incomplete gamma ``P(a, x)``.

    Stays accurate in the deep lower tail where ``P`` underflows.
    """
    if a <= 0:
        raise ValueError("shape must be positive")
    if x < 0:
        raise ValueError("argument must be nonnegative")
    if x == 0:
        return -math.inf
    if math.isinf(x):
        return 0.0
    if x < a + 1.0:
        return _log_p_series(a, x)
    return math.log1p(-math.exp(_log_q_contfrac(a, x)))


def log_gamma_q(a: float, x: float) -> float:
    """Natural log of the regularized upper incomplete gamma ``Q(a, x)``."""
    if a <= 0:
        raise ValueError("shape must be positive")
    if x < 0:
        raise ValueError("argument must be nonnegative")
    if x == 0:
        return 0.0
    if math.isinf(x):
        return -math.inf
    if x < a + 1.0:
        return math.log1p(-math.exp(_log_p_series(a, x)))
    return _log_q_contfrac(a, x)


def gamma_p(a: float, x: float) -> float:
    """Regularized lower incomplete gamma ``gamma(a, x) / Gamma(a)``."""
    return math.exp(log_gamma_p(a, x))


def gamma_q(a: float, x: float) -> float:
    """Regularized upper incomplete gamma ``1 - P(a, x)``."""
    return math.exp(log_gamma_q(a, x))


# -- m-transmitter failure probability --------------------------------------


@dataclass(frozen=True)
class FailProbParams:
    m: int
    rate: float
    bandwidth: float
    p_t: float
    noise_psd: float

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.bandwidth <= 0 or self.p_t <= 0:
            raise ValueError("bandwidth and transmit power must be positive")
        if self.rate < 0:
            raise ValueError("rate must be nonnegative")

    @property
    def normalized_threshold(self) -> float:
        """``omega / P_t``, the Erlang CDF argument."""
        return float(omega(self.rate, self.bandwidth, self.noise_psd)) / self.p_t


def fail_prob_m(params: FailProbParams) -> float:
    """Probability that ``m`` cooperating unit-mean Rayleigh branches at
    common transmit power ``P_t`` cannot carry ``rate``.

    Equals the Erlang-m CDF ``P(m, omega / P_t)``.
    """
    return gamma_p(params.m, params.normalized_threshold)


def log_fail_prob_m(params: FailProbParams) -> float:
    return log_gamma_p(params.m, params.normalized_threshold)


def fail_prob_snr(m: int, snr, rate, bandwidth):
    """Failure probability of ``m`` i.i.d. branches each of mean SNR ``snr``.

    Convenience form used with a nominal link SNR rather than a power;
    broadcasts over array ``snr``.
    """
    thr = snr_threshold(rate, bandwidth)
    x = np.divide(thr, snr, out=np.full(np.shape(snr), np.inf), where=np.asarray(snr) > 0)
    out = np.vectorize(lambda v: gamma_p(m, float(v)), otypes=[float])(x)
    return out if np.ndim(out) else float(out)


def fail_prob_sum(snrs, rate, bandwidth) -> float:
    """Failure probability of independent Rayleigh branches with distinct
    mean SNRs, ``Pr[sum_k rho_k |h_k|^2 < 2**(R/W) - 1]``.

    See :func:`fail_prob_sum_many`.
    """
    return float(fail_prob_sum_many(np.asarray(snrs, dtype=float).reshape(1, -1), rate, bandwidth)[0])


def fail_prob_sum_many(snrs, rate, bandwidth, prune: float = 700.0) -> np.ndarray:
    """Row-wise :func:`fail_prob_sum` for an ``(P, m)`` array of branch SNRs.

    The hypoexponential CDF is the absorption probability of a chain of
    exponential phases with rates ``1/rho_k``; uniformization turns it
    into a Poisson mixture of nonnegative terms, so relative accuracy
    holds in the far lower tail. Branches with threshold/SNR above
    ``prune`` are treated as contributing nothing, which can only
    overstate the failure probability (by at most ~exp(-prune)).
    """
    snrs = np.atleast_2d(np.asarray(snrs, dtype=float))
    thr = float(snr_threshold(rate, bandwidth))
    n_pts, m = snrs.shape
    if thr <= 0:
        return np.zeros(n_pts)
    with np.errstate(divide="ignore"):
        lam = np.where(snrs > 0, 1.0 / snrs, np.inf)
    active = lam * thr <= prune
    lam = np.where(active, lam, 0.0)
    lam_max = lam.max(axis=1)
    result = np.ones(n_pts)
    live = lam_max > 0
    if not np.any(live):
        return result
    lam, active, lam_max = lam[live], active[live], lam_max[live]
    # inactive phases first (already passed), active ones after
    order = np.argsort(active, axis=1, kind="stable")
    adv = np.take_along_axis(lam, order, axis=1) / lam_max[:, None]
    start = m - active.sum(axis=1)
    mu = lam_max * thr
    n_max = int(np.max(mu + 12.0 * np.sqrt(mu) + 40.0))
    state = np.zeros((lam.shape[0], m + 1))
    state[np.arange(lam.shape[0]), start] = 1.0
    log_mu = np.log(mu)
    log_w = -mu
    total = np.zeros(lam.shape[0])
    with np.errstate(divide="ignore"):
        for n in range(n_max + 1):
            if n > 0:
                moved = state[:, :m] * adv
                state[:, :m] -= moved
                state[:, 1:] += moved
                log_w = log_w + log_mu - math.log(n)
            total += np.exp(log_w + np.log(state[:, m]))
    result[live] = np.minimum(total, 1.0)
    return result
