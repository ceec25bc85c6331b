"""Scenario files: a flat ``key = value`` format in four sections.

::

    # comment
    [network]
    n_devices = 50
    p_ap_dbm = 23
    [protocol]
    scheme = andcoop
    [run]
    cycles = 100000
    [experiment]
    kind = power_sweep
    power_dbm = 0, 10, 20

Every section header must be present (bodies may be empty, in which case
defaults apply). Unknown keys, malformed values and out-of-range values
are reported with their line number. Units: powers in dBm, noise density
in dBm/Hz, frequencies and bandwidth in Hz, times in s, lengths in m and
payloads in bytes.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .channel import NetworkConfig
from .protocol import ProtocolParams

SECTIONS = ("network", "protocol", "run", "experiment")
KINDS = ("single", "power_sweep", "rate_sweep", "population_sweep", "dmt", "optimize",
         "coverage", "pilot_tradeoff")


class ScenarioError(ValueError):
    def __init__(self, message: str, line: int | None = None, path=None):
        loc = f"{path or '<scenario>'}:{line}: " if line is not None else f"{path or '<scenario>'}: "
        super().__init__(loc + message)
        self.line = line


@dataclass(frozen=True)
class RunSection:
    cycles: int = 100_000
    seed: int = 1
    placement: str = "per_block"
    block_size: int = 100
    iid_snr_db: float | None = None
    chunk_size: int | None = None
    workers: int = 1

    def __post_init__(self):
        if self.cycles < 1:
            raise ValueError("cycles must be >= 1")
        if self.placement not in ("fixed", "per_cycle", "per_block"):
            raise ValueError(f"unknown placement mode {self.placement!r}")
        if self.block_size < 1 or self.workers < 1:
            raise ValueError("block_size and workers must be >= 1")
        if self.chunk_size is not None and self.chunk_size < 1:
            raise ValueError("chunk_size must be >= 1")


@dataclass(frozen=True)
class ExperimentSection:
    kind: str = "single"
    power_dbm: tuple | None = None
    snr_db: tuple | None = None
    payload_bytes: tuple | None = None
    n_devices: tuple | None = None
    pilots: tuple | None = None
    beta_grid: tuple | None = None
    theta_grid: tuple | None = None
    r_grid: tuple | None = None
    analytic: bool = False
    grid_resolution: int = 100
    ap_antennas: int = 4
    penetration_loss_db: float = 20.0
    target_outage: float = 1e-9
    rate_bpcu: float = 1.0
    ap_position: tuple = (50.0, 50.0)
    wall: tuple = ((75.0, 25.0), (75.0, 75.0))
    relays: tuple = ((82.0, 30.0), (88.0, 50.0), (82.0, 70.0))

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")


@dataclass(frozen=True)
class Scenario:
    network: NetworkConfig = field(default_factory=NetworkConfig)
    protocol: ProtocolParams = field(default_factory=ProtocolParams)
    run: RunSection = field(default_factory=RunSection)
    experiment: ExperimentSection = field(default_factory=ExperimentSection)


# -- value codecs ---------------------------------------------------------------


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("true", "yes", "1", "on"):
        return True
    if v in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _opt(conv):
    def parse(s):
        return None if s.strip().lower() in ("", "none") else conv(s)
    return parse


def _floats(s: str) -> tuple:
    return tuple(float(v) for v in s.split(",") if v.strip())


def _ints(s: str) -> tuple:
    return tuple(int(v) for v in s.split(",") if v.strip())


def _point(s: str) -> tuple:
    xy = _floats(s)
    if len(xy) != 2:
        raise ValueError(f"expected 'x, y', got {s!r}")
    return xy


def _points(s: str) -> tuple:
    return tuple(_point(p) for p in s.split(";") if p.strip())


def _segment(s: str) -> tuple:
    v = _floats(s)
    if len(v) != 4:
        raise ValueError(f"expected 'x1, y1, x2, y2', got {s!r}")
    return (v[0], v[1]), (v[2], v[3])


def _fmt(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        if value and isinstance(value[0], tuple):
            return "; ".join(", ".join(repr(float(c)) for c in p) for p in value)
        return ", ".join(_fmt(v) for v in value)
    return str(value)


def _fmt_wall(wall) -> str:
    (x1, y1), (x2, y2) = wall
    return ", ".join(repr(float(v)) for v in (x1, y1, x2, y2))


_CODECS = {
    "network": {f.name: (int if f.name in ("n_devices", "n_aps") else
                         _floats if f.name == "shadow_std_db" else float)
                for f in fields(NetworkConfig)},
    "protocol": {"beta": float, "alpha": float, "theta": float, "pilots": int, "scheme": str,
                 "csi_mode": str, "k": int},
    "run": {"cycles": int, "seed": int, "placement": str, "block_size": int,
            "iid_snr_db": _opt(float), "chunk_size": _opt(int), "workers": int},
    "experiment": {"kind": str, "power_dbm": _opt(_floats), "snr_db": _opt(_floats),
                   "payload_bytes": _opt(_floats), "n_devices": _opt(_ints),
                   "pilots": _opt(_ints), "beta_grid": _opt(_floats),
                   "theta_grid": _opt(_floats), "r_grid": _opt(_floats), "analytic": _bool,
                   "grid_resolution": int, "ap_antennas": int, "penetration_loss_db": float,
                   "target_outage": float, "rate_bpcu": float, "ap_position": _point,
                   "wall": _segment, "relays": _points},
}
_TYPES = {"network": NetworkConfig, "protocol": ProtocolParams, "run": RunSection,
          "experiment": ExperimentSection}


def parse_text(text: str, path=None) -> Scenario:
    values = {s: {} for s in SECTIONS}
    key_lines = {s: {} for s in SECTIONS}
    header_lines = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section not in SECTIONS:
                raise ScenarioError(f"unknown section [{section}]", lineno, path)
            if section in header_lines:
                raise ScenarioError(f"duplicate section [{section}]", lineno, path)
            header_lines[section] = lineno
            continue
        if "=" not in line:
            raise ScenarioError(f"expected 'key = value', got {raw.strip()!r}", lineno, path)
        if section is None:
            raise ScenarioError("key outside of any section", lineno, path)
        key, val = (p.strip() for p in line.split("=", 1))
        codec = _CODECS[section].get(key)
        if codec is None:
            raise ScenarioError(f"unknown key {key!r} in [{section}]", lineno, path)
        if key in values[section]:
            raise ScenarioError(f"duplicate key {key!r}", lineno, path)
        try:
            values[section][key] = codec(val)
        except ValueError as exc:
            raise ScenarioError(f"bad value for {key!r}: {exc}", lineno, path) from None
        key_lines[section][key] = lineno

    missing = [s for s in SECTIONS if s not in header_lines]
    if missing:
        raise ScenarioError("missing sections: " + ", ".join(f"[{s}]" for s in missing),
                            None, path)

    built = {}
    for s in SECTIONS:
        try:
            built[s] = _TYPES[s](**values[s])
        except ValueError as exc:
            line = _blame(str(exc), key_lines[s], header_lines[s])
            raise ScenarioError(f"[{s}] {exc}", line, path) from None
    return Scenario(**built)


def _blame(message: str, key_lines: dict, default: int) -> int:
    for key, line in key_lines.items():
        if key in message:
            return line
    return default


def parse_scenario(path) -> Scenario:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario: {exc}", None, path) from None
    return parse_text(text, path)


def emit(scn: Scenario) -> str:
    """Serialize every effective value; ``parse_text(emit(s)) == s``."""
    out = []
    for s in SECTIONS:
        obj = getattr(scn, s)
        out.append(f"[{s}]")
        for f in fields(obj):
            v = getattr(obj, f.name)
            text = _fmt_wall(v) if f.name == "wall" else _fmt(v)
            out.append(f"{f.name} = {text}")
        out.append("")
    return "\n".join(out)


def with_overrides(scn: Scenario, kind=None, seed=None, cycles=None, workers=None) -> Scenario:
    run = scn.run
    if seed is not None:
        run = replace(run, seed=seed)
    if cycles is not None:
        run = replace(run, cycles=cycles)
    if workers is not None:
        run = replace(run, workers=workers)
    exp = replace(scn.experiment, kind=kind) if kind else scn.experiment
    return replace(scn, run=run, experiment=exp)


def bundled(name: str) -> Path:
    """Path of a scenario file shipped with the package."""
    return Path(__file__).parent / "scenarios" / name
