"""Run configuration: dataclasses, TOML/JSON files and command-line overrides.

Defaults reproduce the reference simulation setup (five 0.1 kg / 0.25 m links
under a 0.85 kg quadrotor tracking a Lissajous load path for 30 s).
"""

from __future__ import annotations

import json
import sys
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib
import tomli_w

from .dynamics import CableParams, QuadParams
from .signals import (AxisAngleRotation, Constant, VecSignal, lissajous, rotation_from_dict,
                      signal_from_dict, vec_signal_from_dict)

SYSTEMS = ("single", "multi-point", "multi-rigid")


class ConfigError(ValueError):
    pass


@dataclass
class QuadConfig:
    m: float = 0.85
    J: list = field(default_factory=lambda: [0.557e-2, 0.557e-2, 1.05e-2])
    g: float = 9.81

    def params(self):
        J = np.asarray(self.J, dtype=float)
        return QuadParams(self.m, np.diag(J) if J.ndim == 1 else J, self.g)


@dataclass
class CableConfig:
    """Uniform links unless ``m`` / ``l`` are given as per-link lists."""

    n: int = 5
    m: object = 0.1
    l: object = 0.25

    def params(self):
        m = np.broadcast_to(np.asarray(self.m, dtype=float), (self.n,))
        l = np.broadcast_to(np.asarray(self.l, dtype=float), (self.n,))
        return CableParams(m.copy(), l.copy())


@dataclass
class TrajectoryConfig:
    """``kind`` is ``lissajous``, ``hover`` or ``signal`` (explicit signal specs)."""

    kind: str = "lissajous"
    ax: float = 2.0
    ay: float = 2.5
    az: float = 1.5
    f1: float = 0.25
    f2: float = 0.2
    f3: float = 1 / 7
    hover: list = field(default_factory=lambda: [0.0, 0.0, 0.0])
    load: dict = field(default_factory=dict)
    yaw: float = 0.0

    def load_signal(self):
        if self.kind == "lissajous":
            return lissajous(self.ax, self.ay, self.az, self.f1, self.f2, self.f3)
        if self.kind == "hover":
            return VecSignal(*(Constant(float(c)) for c in self.hover))
        if self.kind == "signal":
            if not self.load:
                raise ConfigError("trajectory.kind = 'signal' needs a trajectory.load table")
            return vec_signal_from_dict(self.load)
        raise ConfigError(f"unknown trajectory kind {self.kind!r}")


@dataclass
class LqrConfig:
    q1_blocks: list = field(default_factory=lambda: [0.5, 0.75, 1.0, 0.75])
    q2: float = 0.2
    p_T: float = 0.01
    dt_riccati: float = 0.01


@dataclass
class TrialConfig:
    """Initial deviation from the reference at ``t = 0``.

    ``offset`` shifts the whole system rigidly; ``tilt_deg`` rotates the
    quadrotor about ``tilt_axis``; link ``i`` is turned by
    ``+-deflection_deg`` about ``deflection_axis`` (sign alternating when
    ``alternate``). ``random_scale`` adds a seeded random offset of that size.
    """

    offset: list = field(default_factory=lambda: [0.0, 0.0, 0.0])
    tilt_deg: float = 0.0
    tilt_axis: list = field(default_factory=lambda: [1.0, 0.0, 0.0])
    deflection_deg: float = 0.0
    deflection_axis: list = field(default_factory=lambda: [1.0, 0.0, 0.0])
    alternate: bool = True
    random_scale: float = 0.0


def default_trials():
    return {
        "I": TrialConfig(),
        "II": TrialConfig(offset=[0.3, -0.3, 0.2]),
        "III": TrialConfig(tilt_deg=15.0, deflection_deg=20.0),
    }


@dataclass
class SimConfig:
    dt: float = 1e-3
    T: float = 30.0
    record_every: int = 1
    snapshot_times: list = field(default_factory=list)
    converge_dist: float = 0.05
    converge_psi: float = 0.01
    plan_dt: float = 0.01


@dataclass
class MultiConfig:
    """Shared-load planning. Internal-force signals default to zero."""

    p: int = 3
    m_L: float = 0.5
    radius: float = 0.3
    J_L: list = field(default_factory=lambda: [0.01, 0.01, 0.02])
    tensions: list = field(default_factory=list)  # point mass: p-1 vector signal tables
    lam: list = field(default_factory=list)  # rigid: 3p-6 scalar signal tables
    attitude: dict = field(default_factory=lambda: {"axis": [0.0, 0.0, 1.0],
                                                    "angle": {"type": "constant", "c": 0.0}})
    samples: int = 100


@dataclass
class RunConfig:
    system: str = "single"
    seed: int = 0
    out: str = "runs"
    quad: QuadConfig = field(default_factory=QuadConfig)
    cable: CableConfig = field(default_factory=CableConfig)
    trajectory: TrajectoryConfig = field(default_factory=TrajectoryConfig)
    lqr: LqrConfig = field(default_factory=LqrConfig)
    sim: SimConfig = field(default_factory=SimConfig)
    multi: MultiConfig = field(default_factory=MultiConfig)
    trials: dict = field(default_factory=default_trials)

    def __post_init__(self):
        validate(self)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return _build(cls, d)


def _build(cls, d):
    if not isinstance(d, dict):
        raise ConfigError(f"section for {cls.__name__} must be a table")
    known = {f.name: f for f in fields(cls)}
    unknown = set(d) - set(known)
    if unknown:
        raise ConfigError(f"unknown keys in {cls.__name__}: {sorted(unknown)}")
    kw = {}
    for name, val in d.items():
        default = known[name].default_factory() if callable(known[name].default_factory) else None
        if is_dataclass(default):
            kw[name] = _build(type(default), val)
        elif name == "trials":
            kw[name] = {k: _build(TrialConfig, v) for k, v in val.items()}
        else:
            kw[name] = val
    return cls(**kw)


def validate(cfg):
    if cfg.system not in SYSTEMS:
        raise ConfigError(f"system must be one of {SYSTEMS}, got {cfg.system!r}")
    if cfg.cable.n < 1:
        raise ConfigError("cable.n must be >= 1")
    if cfg.sim.dt <= 0 or cfg.sim.T <= 0 or cfg.lqr.dt_riccati <= 0:
        raise ConfigError("dt, T and dt_riccati must be positive")
    if len(cfg.lqr.q1_blocks) != 4:
        raise ConfigError("lqr.q1_blocks needs four weights")
    if cfg.sim.record_every < 1:
        raise ConfigError("sim.record_every must be >= 1")
    for name, tr in cfg.trials.items():
        if len(tr.offset) != 3:
            raise ConfigError(f"trial {name}: offset needs three components")


def load_config(path=None):
    if path is None:
        return RunConfig()
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json":
        d = json.loads(text)
    else:
        try:
            d = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return RunConfig.from_dict(d)


def dumps(cfg, fmt="toml"):
    d = cfg.to_dict()
    return json.dumps(d, indent=2) if fmt == "json" else tomli_w.dumps(d)


def save_config(cfg, path):
    path = Path(path)
    path.write_text(dumps(cfg, "json" if path.suffix == ".json" else "toml"))


def apply_overrides(cfg, dt=None, horizon=None, dt_riccati=None, seed=None, out=None, sets=()):
    """Command-line values win over file values. ``sets`` holds ``a.b=value`` strings."""
    d = cfg.to_dict()
    if dt is not None:
        d["sim"]["dt"] = dt
    if horizon is not None:
        d["sim"]["T"] = horizon
    if dt_riccati is not None:
        d["lqr"]["dt_riccati"] = dt_riccati
    if seed is not None:
        d["seed"] = seed
    if out is not None:
        d["out"] = out
    for item in sets:
        key, _, raw = item.partition("=")
        if not _:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        try:
            val = json.loads(raw)
        except json.JSONDecodeError:
            val = raw
        node = d
        parts = key.split(".")
        for p in parts[:-1]:
            if p not in node:
                raise ConfigError(f"unknown config key {key!r}")
            node = node[p]
        node[parts[-1]] = val
    return RunConfig.from_dict(d)


def yaw_signal(cfg):
    return signal_from_dict(cfg.trajectory.yaw) if isinstance(cfg.trajectory.yaw, dict) \
        else Constant(float(cfg.trajectory.yaw))


def attitude_signal(cfg) -> AxisAngleRotation:
    return rotation_from_dict(cfg.multi.attitude)
