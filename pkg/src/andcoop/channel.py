"""Network geometry and per-cycle channel realizations.

Large-scale effects (LOS state, dual-slope path loss, log-normal
shadowing) are drawn once per placement; small-scale Rayleigh fading and
the MMSE estimate of the AP-device fades are drawn per cycle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .linkmath import sigma_e

SPEED_OF_LIGHT = 299_792_458.0


def dbm_to_watt(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(x)


def make_rng(seed) -> np.random.Generator:
    """Counter-based generator for an int, a sequence of ints or a SeedSequence."""
    if isinstance(seed, np.random.Generator):
        return seed
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(seed))


@dataclass(frozen=True)
class NetworkConfig:
    """Static scenario description. Defaults follow the factory setup
    (100 m floor, N = 50, 50-byte payloads, 1 ms cycle, 20 MHz at 3.5 GHz).

    ``shadow_std_db`` holds (AP-LOS, AP-NLOS, device-LOS, device-NLOS).
    """

    floor_side_m: float = 100.0
    n_devices: int = 50
    n_aps: int = 1
    payload_bytes: float = 50.0
    cycle_s: float = 1e-3
    bandwidth_hz: float = 20e6
    carrier_hz: float = 3.5e9
    p_ap_dbm: float = 23.0
    p_dev_dbm: float = 23.0
    noise_psd_dbm_hz: float = -174.0
    ple_near: float = 2.0
    ple_los: float = 3.26
    ple_nlos: float = 3.93
    blockage_a: float = 0.25
    blockage_b: float = 15.0
    shadow_std_db: tuple = (1.4, 4.6, 8.7, 15.2)
    min_distance_m: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "shadow_std_db", tuple(float(s) for s in self.shadow_std_db))
        if self.n_devices < 1 or self.n_aps < 1:
            raise ValueError("need at least one device and one AP")
        if not 0.0 <= self.blockage_a <= 1.0:
            raise ValueError("blockage_a must lie in [0, 1]")
        if self.blockage_b <= 0 or self.floor_side_m <= 0:
            raise ValueError("blockage_b and floor_side_m must be positive")
        if self.payload_bytes < 0 or self.cycle_s <= 0 or self.bandwidth_hz <= 0:
            raise ValueError("payload, cycle and bandwidth must be positive")
        if len(self.shadow_std_db) != 4 or any(s < 0 for s in self.shadow_std_db):
            raise ValueError("shadow_std_db needs four nonnegative values")
        for name in ("p_ap_dbm", "p_dev_dbm", "noise_psd_dbm_hz"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @property
    def payload_bits(self) -> float:
        return 8.0 * self.payload_bytes

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_hz

    @property
    def noise_psd_w_hz(self) -> float:
        return float(dbm_to_watt(self.noise_psd_dbm_hz))

    @property
    def noise_power_dbm(self) -> float:
        return self.noise_psd_dbm_hz + 10.0 * math.log10(self.bandwidth_hz)

    @property
    def spectral_efficiency(self) -> float:
        """Load ``N B / (T W)`` in bits per channel use."""
        return self.n_devices * self.payload_bits / (self.cycle_s * self.bandwidth_hz)

    def with_power(self, dbm: float) -> "NetworkConfig":
        """Same scenario with ``P_a = P_d = dbm``."""
        return replace(self, p_ap_dbm=dbm, p_dev_dbm=dbm)

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]


@dataclass(frozen=True)
class Placement:
    ap_positions: np.ndarray  # (M, 2)
    dev_positions: np.ndarray  # (N, 2)


@dataclass(frozen=True)
class LinkStatics:
    """Average linear SNRs. ``avg_snr_dev_dev[k, j]`` is the link from
    device ``k`` to device ``j``; the diagonal is zero (no self links).
    A leading batch axis is allowed on every array.
    """

    avg_snr_ap_dev: np.ndarray  # (..., M, N)
    avg_snr_dev_dev: np.ndarray  # (..., N, N)
    los_ap_dev: np.ndarray = field(default=None)
    los_dev_dev: np.ndarray = field(default=None)

    @property
    def n_aps(self) -> int:
        return self.avg_snr_ap_dev.shape[-2]

    @property
    def n_devices(self) -> int:
        return self.avg_snr_ap_dev.shape[-1]


@dataclass(frozen=True)
class ChannelRealization:
    """One cycle of true and estimated instantaneous SNRs."""

    g_ap_dev: np.ndarray  # (M, N)
    g_dev_dev: np.ndarray  # (N, N)
    g_hat_ap_dev: np.ndarray  # (M, N)


@dataclass(frozen=True)
class ChannelBatch:
    """``C`` independent cycles stacked on a leading axis."""

    g_ap_dev: np.ndarray  # (C, M, N)
    g_dev_dev: np.ndarray  # (C, N, N)
    g_hat_ap_dev: np.ndarray  # (C, M, N)

    def __len__(self):
        return self.g_ap_dev.shape[0]

    def cycle(self, i: int) -> ChannelRealization:
        return ChannelRealization(self.g_ap_dev[i], self.g_dev_dev[i], self.g_hat_ap_dev[i])


# -- geometry ----------------------------------------------------------------


def sample_placement(cfg: NetworkConfig, rng_seed) -> Placement:
    """Uniform i.i.d. placement of APs and devices on the square floor."""
    rng = make_rng(rng_seed)
    side = cfg.floor_side_m
    ap = rng.uniform(0.0, side, size=(cfg.n_aps, 2))
    dev = rng.uniform(0.0, side, size=(cfg.n_devices, 2))
    return Placement(ap, dev)


def los_probability(distance, a: float, b: float):
    """LOS probability: quadratic decay from 1 at zero range to the floor
    ``a`` at the cutoff ``b``, constant ``a`` beyond."""
    nu = np.asarray(distance, dtype=float)
    if np.any(nu < 0):
        raise ValueError("distance must be nonnegative")
    p = a + np.where(nu <= b, (1.0 - a) / b**2 * (nu - b) ** 2, 0.0)
    return p if p.ndim else float(p)


def path_loss_db(distance, los, cfg: NetworkConfig):
    """Dual-slope path loss in dB, continuous at ``10 * wavelength``.

    Free-space Friis loss anchors the curve at 1 m; exponent ``ple_near``
    holds up to the breakpoint and the LOS/NLOS exponent beyond it.
    """
    lam = cfg.wavelength_m
    d = np.maximum(np.asarray(distance, dtype=float), cfg.min_distance_m)
    pl_1m = 20.0 * math.log10(4.0 * math.pi / lam)
    d_break = 10.0 * lam
    near = pl_1m + 10.0 * cfg.ple_near * np.log10(d)
    pl_break = pl_1m + 10.0 * cfg.ple_near * math.log10(d_break)
    ple_far = np.where(los, cfg.ple_los, cfg.ple_nlos)
    far = pl_break + 10.0 * ple_far * np.log10(d / d_break)
    return np.where(d <= d_break, near, far)


def _pairwise_distance(a, b):
    return np.sqrt(((a[..., :, None, :] - b[..., None, :, :]) ** 2).sum(axis=-1))


def statics_from_positions(cfg: NetworkConfig, ap_pos, dev_pos, rng) -> LinkStatics:
    """Vectorized link statics; positions may carry a leading batch axis."""
    rng = make_rng(rng)
    ap_pos = np.asarray(ap_pos, dtype=float)
    dev_pos = np.asarray(dev_pos, dtype=float)
    n = dev_pos.shape[-2]
    sh_ap_los, sh_ap_nlos, sh_dev_los, sh_dev_nlos = cfg.shadow_std_db
    noise_dbm = cfg.noise_power_dbm

    d_ad = _pairwise_distance(ap_pos, dev_pos)
    los_ad = rng.random(d_ad.shape) < los_probability(d_ad, cfg.blockage_a, cfg.blockage_b)
    shadow_ad = rng.standard_normal(d_ad.shape) * np.where(los_ad, sh_ap_los, sh_ap_nlos)
    rx_ad = cfg.p_ap_dbm - path_loss_db(d_ad, los_ad, cfg) + shadow_ad
    snr_ad = db_to_linear(rx_ad - noise_dbm)

    # device pairs: one LOS draw and one shadowing draw per unordered pair
    d_dd = _pairwise_distance(dev_pos, dev_pos)
    u = rng.random(d_dd.shape)
    z = rng.standard_normal(d_dd.shape)
    upper = np.triu(np.ones((n, n), dtype=bool), k=1)
    u = np.where(upper, u, np.swapaxes(u, -1, -2))
    z = np.where(upper, z, np.swapaxes(z, -1, -2))
    los_dd = u < los_probability(d_dd, cfg.blockage_a, cfg.blockage_b)
    shadow_dd = z * np.where(los_dd, sh_dev_los, sh_dev_nlos)
    rx_dd = cfg.p_dev_dbm - path_loss_db(d_dd, los_dd, cfg) + shadow_dd
    snr_dd = db_to_linear(rx_dd - noise_dbm)
    eye = np.eye(n, dtype=bool)
    snr_dd = np.where(eye, 0.0, snr_dd)
    los_dd = np.where(eye, False, los_dd)
    return LinkStatics(snr_ad, snr_dd, los_ad, los_dd)


def link_statics(cfg: NetworkConfig, placement: Placement, rng_seed) -> LinkStatics:
    """Average SNR of every AP-device and device-device link."""
    return statics_from_positions(cfg, placement.ap_positions, placement.dev_positions, rng_seed)


def iid_statics(n_aps: int, n_devices: int, snr: float) -> LinkStatics:
    """Every link at the same nominal SNR (i.i.d. fading simplification)."""
    ad = np.full((n_aps, n_devices), float(snr))
    dd = np.full((n_devices, n_devices), float(snr))
    np.fill_diagonal(dd, 0.0)
    return LinkStatics(ad, dd, np.ones_like(ad, dtype=bool), ~np.eye(n_devices, dtype=bool))


# -- small-scale fading ------------------------------------------------------


def _check_mode(mode: str, pilots: int):
    if mode not in ("perfect", "imperfect"):
        raise ValueError(f"unknown CSI mode {mode!r}")
    if pilots < 0:
        raise ValueError("pilot count must be nonnegative")
    if mode == "imperfect" and pilots == 0:
        raise ValueError("imperfect CSI needs at least one pilot symbol")


def sample_cycles(statics: LinkStatics, n_cycles: int, pilots: int, mode: str, rng) -> ChannelBatch:
    """Draw ``n_cycles`` block-fading realizations.

    ``statics`` arrays are either unbatched or carry a leading axis of
    length ``n_cycles`` (one placement per cycle).
    """
    _check_mode(mode, pilots)
    rng = make_rng(rng)
    rho_ad = statics.avg_snr_ap_dev
    rho_dd = statics.avg_snr_dev_dev
    m, n = rho_ad.shape[-2:]
    shape_ad = (n_cycles, m, n)
    if mode == "perfect":
        g_ad = rho_ad * rng.standard_exponential(shape_ad)
        g_hat = g_ad
    else:
        s_e = sigma_e(pilots, rho_ad)
        # independent CN(0, 1 - s_e) estimate and CN(0, s_e) error
        z = rng.standard_normal((4,) + shape_ad) * math.sqrt(0.5)
        h_hat = np.sqrt(1.0 - s_e) * (z[0] + 1j * z[1])
        eps = np.sqrt(s_e) * (z[2] + 1j * z[3])
        g_hat = rho_ad * np.abs(h_hat) ** 2
        g_ad = rho_ad * np.abs(h_hat + eps) ** 2
    g_dd = rho_dd * rng.standard_exponential((n_cycles, n, n))
    return ChannelBatch(np.ascontiguousarray(g_ad), g_dd, np.ascontiguousarray(g_hat))


def sample_cycle(statics: LinkStatics, pilots: int, mode: str, rng_seed) -> ChannelRealization:
    """One cycle of fading; the single-cycle case of :func:`sample_cycles`."""
    return sample_cycles(statics, 1, pilots, mode, rng_seed).cycle(0)
