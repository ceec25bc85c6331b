"""One downlink cycle of the cooperative schemes.

``andcoop`` serves the devices with the best estimated AP channels by
rate-adaptive TDMA during ``beta * T_D`` and aggregates the remaining
messages into a two-hop phase: a joint AP broadcast over ``alpha`` of the
remaining time, then a relay hop where the APs and every device that
decoded the broadcast retransmit together. ``single_hop`` and ``two_hop``
are the ``beta = 1`` and ``beta = 0`` endpoints; ``k_best`` serves only
the K strongest devices with enlarged payloads.

:func:`build_schedule` / :func:`run_cycle` handle a single realization
and are the readable reference; :func:`run_batch` evaluates a stacked
:class:`~andcoop.channel.ChannelBatch` with numpy and must agree with the
reference cycle for cycle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelBatch, ChannelRealization, NetworkConfig, dbm_to_watt
from .linkmath import achievable_rate, decode_succeeds

SCHEMES = ("andcoop", "single_hop", "two_hop", "k_best")
CSI_MODES = ("perfect", "imperfect")
# airtime sums are compared with a relative slack so that budgets met
# exactly in real arithmetic (0.1 + 0.2 <= 0.3) are not lost to rounding
_BUDGET_SLACK = 1.0 + 1e-12


class ConfigurationError(ValueError):
    """Scenario/protocol combination that cannot be simulated."""


@dataclass(frozen=True)
class ProtocolParams:
    beta: float = 0.5
    alpha: float = 0.5
    theta: float = 1.0
    pilots: int = 0
    scheme: str = "andcoop"
    csi_mode: str = "perfect"
    k: int = 1

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.csi_mode not in CSI_MODES:
            raise ValueError(f"unknown CSI mode {self.csi_mode!r}")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta={self.beta} outside [0, 1]")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha={self.alpha} outside (0, 1)")
        if not 0.0 < self.theta <= 1.0:
            raise ValueError(f"theta={self.theta} outside (0, 1]")
        if self.pilots < 0:
            raise ValueError("pilots must be nonnegative")
        if self.csi_mode == "perfect" and (self.theta != 1.0 or self.pilots != 0):
            raise ValueError("perfect CSI requires theta = 1 and pilots = 0")
        if self.csi_mode == "imperfect" and self.pilots < 1:
            raise ValueError("imperfect CSI requires at least one pilot")
        if self.k < 1:
            raise ValueError("k must be >= 1")

    @property
    def effective_beta(self) -> float:
        if self.scheme == "single_hop":
            return 1.0
        if self.scheme == "two_hop":
            return 0.0
        return self.beta


def data_time(params: ProtocolParams, cfg: NetworkConfig) -> float:
    """Downlink data time ``T_D`` left after uplink pilots."""
    if params.csi_mode == "perfect":
        return cfg.cycle_s
    t_d = cfg.cycle_s - cfg.n_devices * params.pilots / cfg.bandwidth_hz
    if t_d <= 0:
        raise ConfigurationError(
            f"pilot overhead {cfg.n_devices}x{params.pilots} symbols exceeds the cycle")
    return t_d


@dataclass(frozen=True)
class Schedule:
    strong_set: tuple  # transmission order
    weak_set: tuple
    per_strong_rate: np.ndarray
    broadcast_rate: float
    relay_rate: float
    t_data: float
    t_1h: float
    t_2h: float

    @property
    def k_weak(self) -> int:
        return len(self.weak_set)

    def single_hop_airtime(self, payload_bits: float) -> float:
        if not self.strong_set:
            return 0.0
        return float(np.sum(payload_bits / self.per_strong_rate))


@dataclass(frozen=True)
class CycleOutcome:
    system_outage: bool
    overflow: bool
    k_weak: int
    relay_set: frozenset
    per_device_relay_energy: np.ndarray
    failed_devices: frozenset


def select_strong_set(est_rates, tau: float, theta: float, payload_bits: float) -> list:
    """Largest set of top-rated devices whose backed-off airtimes fit in ``tau``.

    Devices are ranked by estimated rate (stable in device index on
    ties) and the longest feasible prefix is returned in that order.
    Zero-rate devices are never selected.
    """
    rates = np.asarray(est_rates, dtype=float)
    if tau <= 0 or rates.size == 0:
        return []
    order = np.argsort(-rates, kind="stable")
    r = rates[order]
    with np.errstate(divide="ignore", over="ignore"):
        airtime = np.where(r > 0, payload_bits / (theta * r), np.inf)
    used = np.cumsum(airtime)
    k = int(np.count_nonzero(used <= tau * _BUDGET_SLACK))
    return [int(j) for j in order[:k]]


def _two_hop_rates(payload_bits, k_weak, alpha, t_2h):
    if k_weak == 0:
        return 0.0, 0.0
    if t_2h <= 0:
        return np.inf, np.inf
    load = payload_bits * k_weak
    return load / (alpha * t_2h), load / ((1.0 - alpha) * t_2h)


def build_schedule(realization: ChannelRealization, params: ProtocolParams,
                   cfg: NetworkConfig) -> Schedule:
    if params.scheme == "k_best":
        raise ValueError("k_best has no two-phase schedule; use run_cycle_k_best")
    n = realization.g_ap_dev.shape[1]
    t_d = data_time(params, cfg)
    beta = params.effective_beta
    t_1h = beta * t_d
    t_2h = (1.0 - beta) * t_d
    est_rate = achievable_rate(realization.g_hat_ap_dev.sum(axis=0), cfg.bandwidth_hz)
    strong = select_strong_set(est_rate, t_1h, params.theta, cfg.payload_bits)
    in_strong = set(strong)
    weak = tuple(j for j in range(n) if j not in in_strong)
    r_b, r_r = _two_hop_rates(cfg.payload_bits, len(weak), params.alpha, t_2h)
    return Schedule(
        strong_set=tuple(strong),
        weak_set=weak,
        per_strong_rate=params.theta * est_rate[strong],
        broadcast_rate=r_b,
        relay_rate=r_r,
        t_data=t_d,
        t_1h=t_1h,
        t_2h=t_2h,
    )


def run_cycle(realization: ChannelRealization, schedule: Schedule, params: ProtocolParams,
              cfg: NetworkConfig) -> CycleOutcome:
    w = cfg.bandwidth_hz
    n = realization.g_ap_dev.shape[1]
    ap_snr = realization.g_ap_dev.sum(axis=0)
    failed = set()

    for j, rate in zip(schedule.strong_set, schedule.per_strong_rate):
        if not decode_succeeds(ap_snr[j], rate, w):
            failed.add(j)

    energy = np.zeros(n)
    relays = frozenset()
    overflow = False
    weak = schedule.weak_set
    if weak and schedule.t_2h <= 0:
        # no two-hop time left for the unscheduled suffix
        overflow = True
        failed.update(weak)
    elif weak:
        decoded = decode_succeeds(ap_snr, schedule.broadcast_rate, w)
        relays = frozenset(int(k) for k in np.flatnonzero(decoded))
        relay_mask = decoded.astype(float)
        relay_snr = relay_mask @ realization.g_dev_dev
        for j in weak:
            if j in relays:
                continue
            if not decode_succeeds(ap_snr[j] + relay_snr[j], schedule.relay_rate, w):
                failed.add(j)
        energy[decoded] = dbm_to_watt(cfg.p_dev_dbm) * (1.0 - params.alpha) * schedule.t_2h

    return CycleOutcome(
        system_outage=bool(failed),
        overflow=overflow,
        k_weak=len(weak),
        relay_set=relays,
        per_device_relay_energy=energy,
        failed_devices=frozenset(failed),
    )


def run_cycle_k_best(realization: ChannelRealization, k: int, cfg: NetworkConfig) -> CycleOutcome:
    """Serve only the ``k`` devices with the largest true rates, each with
    payload ``N B / k``; outage when their airtimes overrun ``T``."""
    n = realization.g_ap_dev.shape[1]
    if not 1 <= k <= n:
        raise ValueError("k must lie in [1, N]")
    rates = achievable_rate(realization.g_ap_dev.sum(axis=0), cfg.bandwidth_hz)
    best = np.sort(rates)[::-1][:k]
    payload = n * cfg.payload_bits / k
    with np.errstate(divide="ignore"):
        airtime = float(np.sum(payload / best))
    outage = airtime > cfg.cycle_s
    return CycleOutcome(
        system_outage=outage,
        overflow=outage,
        k_weak=0,
        relay_set=frozenset(),
        per_device_relay_energy=np.zeros(n),
        failed_devices=frozenset(),
    )


# -- vectorized batch ----------------------------------------------------------


@dataclass(frozen=True)
class BatchOutcome:
    outage: np.ndarray  # bool (C,)
    overflow: np.ndarray  # bool (C,)
    k_weak: np.ndarray  # int (C,)
    n_relays: np.ndarray  # int (C,)
    mean_relay_energy: np.ndarray  # J per device, (C,)

    def __len__(self):
        return self.outage.shape[0]


def run_batch(batch: ChannelBatch, params: ProtocolParams, cfg: NetworkConfig) -> BatchOutcome:
    """Vectorized equivalent of ``build_schedule`` + ``run_cycle`` (or
    ``run_cycle_k_best``) over every cycle of ``batch``."""
    if params.scheme == "k_best":
        return _run_batch_k_best(batch, params.k, cfg)
    w = cfg.bandwidth_hz
    b = cfg.payload_bits
    c, _, n = batch.g_ap_dev.shape
    t_d = data_time(params, cfg)
    beta = params.effective_beta
    t_1h = beta * t_d
    t_2h = (1.0 - beta) * t_d

    ap_snr = batch.g_ap_dev.sum(axis=1)
    est_rate = achievable_rate(batch.g_hat_ap_dev.sum(axis=1), w)

    if t_1h > 0:
        order = np.argsort(-est_rate, axis=1, kind="stable")
        r_sorted = np.take_along_axis(est_rate, order, axis=1)
        with np.errstate(divide="ignore", over="ignore"):
            airtime = np.where(r_sorted > 0, b / (params.theta * r_sorted), np.inf)
        k_strong = np.count_nonzero(np.cumsum(airtime, axis=1) <= t_1h * _BUDGET_SLACK, axis=1)
        rank = np.empty_like(order)
        np.put_along_axis(rank, order, np.arange(n)[None, :], axis=1)
        strong = rank < k_strong[:, None]
    else:
        k_strong = np.zeros(c, dtype=int)
        strong = np.zeros((c, n), dtype=bool)

    strong_fail = strong & ~decode_succeeds(ap_snr, params.theta * est_rate, w)
    k_weak = n - k_strong
    has_weak = k_weak > 0

    if t_2h <= 0:
        overflow = has_weak
        weak_fail = ~strong
        relays = np.zeros((c, n), dtype=bool)
    else:
        overflow = np.zeros(c, dtype=bool)
        load = b * k_weak
        r_b = load / (params.alpha * t_2h)
        r_r = load / ((1.0 - params.alpha) * t_2h)
        relays = decode_succeeds(ap_snr, r_b[:, None], w) & has_weak[:, None]
        relay_snr = np.matmul(relays[:, None, :].astype(float), batch.g_dev_dev)[:, 0, :]
        weak_fail = (~strong & ~relays
                     & ~decode_succeeds(ap_snr + relay_snr, r_r[:, None], w))

    failed = strong_fail | weak_fail
    n_relays = relays.sum(axis=1)
    per_relay = float(dbm_to_watt(cfg.p_dev_dbm)) * (1.0 - params.alpha) * t_2h
    return BatchOutcome(
        outage=failed.any(axis=1),
        overflow=overflow,
        k_weak=k_weak,
        n_relays=n_relays,
        mean_relay_energy=n_relays * per_relay / n,
    )


def _run_batch_k_best(batch: ChannelBatch, k: int, cfg: NetworkConfig) -> BatchOutcome:
    c, _, n = batch.g_ap_dev.shape
    if not 1 <= k <= n:
        raise ValueError("k must lie in [1, N]")
    rates = achievable_rate(batch.g_ap_dev.sum(axis=1), cfg.bandwidth_hz)
    best = -np.sort(-rates, axis=1)[:, :k]
    payload = n * cfg.payload_bits / k
    with np.errstate(divide="ignore"):
        airtime = np.sum(payload / best, axis=1)
    outage = airtime > cfg.cycle_s
    zeros = np.zeros(c, dtype=int)
    return BatchOutcome(outage, outage.copy(), zeros, zeros.copy(), np.zeros(c))
