"""Run configuration: a nested YAML file, validated on load.  Every run echoes
the fully resolved configuration next to its outputs."""
from __future__ import annotations

import copy
import math
from dataclasses import MISSING, asdict, dataclass, field, fields, is_dataclass

import yaml

from .io import atomic_write_text


class ConfigError(ValueError):
    pass


@dataclass
class MaterialSection:
    a: float = 1.0
    b: float = 1.0
    c: float = 1.0


@dataclass
class RegimeSection:
    beta: float | None = 1.0
    eta: float | None = 0.3
    xi: float | None = None
    eta_list: list | None = None
    gamma: float = 0.7


@dataclass
class ParticleSection:
    shape: str = "sphere"  # sphere | ellipsoid | none
    radius: float = 1.0
    semi_axes_radii: list = field(default_factory=lambda: [1.0, 1.0, 1.0])
    position_radii: list = field(default_factory=lambda: [0.0, 0.0, 0.0])


@dataclass
class GridSection:
    h_radii: float = 0.0625
    box_half_radii: float = 1.75
    periodic: list = field(default_factory=lambda: [False, False, False])


@dataclass
class SolverSection:
    tol: float = 1e-4
    max_iter: int = 500
    step_rule: str = "armijo"
    dt: float | None = None


@dataclass
class ExtractionSection:
    alpha_Y: float = 1.5e-3
    seed: int = 0
    mollify: int = 0
    s_min: float = 0.2
    gap_min: float = 0.1
    dot_min: float = 0.1
    max_excluded: float = 0.01


@dataclass
class RecoverySection:
    preset: str = "plate"  # plate | hemisphere | disk
    piece2: str = "geodesic"
    h_over_eta: float = 0.125
    budget_points: float = 6e7


@dataclass
class OutputSection:
    directory: str = "run"
    formats: list = field(default_factory=lambda: ["csv", "obj"])


@dataclass
class RunConfig:
    material: MaterialSection = field(default_factory=MaterialSection)
    regime: RegimeSection = field(default_factory=RegimeSection)
    particle: ParticleSection = field(default_factory=ParticleSection)
    grid: GridSection = field(default_factory=GridSection)
    solver: SolverSection = field(default_factory=SolverSection)
    extraction: ExtractionSection = field(default_factory=ExtractionSection)
    recovery: RecoverySection = field(default_factory=RecoverySection)
    output: OutputSection = field(default_factory=OutputSection)
    threads: int = 1
    seed: int = 0

    # ------------------------------------------------------------------
    def validate(self):
        m = self.material
        if min(m.a, m.b, m.c) <= 0:
            raise ConfigError("material.a, material.b, material.c must be positive")
        r = self.regime
        if r.eta is None and not r.eta_list:
            raise ConfigError("regime.eta or regime.eta_list is required")
        etas = ([r.eta] if r.eta is not None else []) + list(r.eta_list or [])
        for e in etas:
            if not 0 < e < 1:
                raise ConfigError(f"regime eta = {e} outside (0, 1)")
        if r.xi is None and r.beta is None:
            raise ConfigError("regime.beta or regime.xi is required")
        if r.xi is not None and not 0 < r.xi < 1:
            raise ConfigError("regime.xi must lie in (0, 1)")
        if not 0.5 < r.gamma < 1:
            raise ConfigError("regime.gamma must lie in (1/2, 1)")
        if self.particle.shape not in ("sphere", "ellipsoid", "none"):
            raise ConfigError(f"particle.shape {self.particle.shape!r} unknown")
        if self.particle.radius <= 0:
            raise ConfigError("particle.radius must be positive")
        if self.grid.h_radii <= 0 or self.grid.box_half_radii <= 0:
            raise ConfigError("grid.h_radii and grid.box_half_radii must be positive")
        if self.solver.step_rule not in ("armijo", "fixed"):
            raise ConfigError(f"solver.step_rule {self.solver.step_rule!r} unknown")
        if self.solver.max_iter < 0:
            raise ConfigError("solver.max_iter must be >= 0")
        if self.recovery.preset not in ("plate", "hemisphere", "disk"):
            raise ConfigError(f"recovery.preset {self.recovery.preset!r} unknown")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        return self

    # ------------------------------------------------------------------
    def regimes(self):
        from .potentials import MaterialParams, RegimeParams, regime_from_beta
        mat = MaterialParams(self.material.a, self.material.b, self.material.c)
        r = self.regime
        etas = list(r.eta_list) if r.eta_list else [r.eta]
        out = []
        for e in etas:
            if r.xi is not None and not r.eta_list:
                beta = r.beta if r.beta is not None else e * abs(math.log(r.xi))
                out.append(RegimeParams(eta=e, xi=r.xi, beta=beta, gamma=r.gamma, material=mat))
            else:
                out.append(regime_from_beta(r.beta, e, r.gamma, mat))
        return out

    def shape(self):
        from .domain import ParticleShape
        p = self.particle
        R = p.radius
        c = tuple(R * x for x in p.position_radii)
        if p.shape == "sphere":
            return ParticleShape.sphere(R, c)
        if p.shape == "ellipsoid":
            return ParticleShape.ellipsoid(tuple(R * x for x in p.semi_axes_radii), c)
        return None

    def box(self):
        R = self.particle.radius
        c = [R * x for x in self.particle.position_radii]
        L = self.grid.box_half_radii * R
        return [x - L for x in c], [x + L for x in c]

    @property
    def h(self):
        return self.grid.h_radii * self.particle.radius

    def to_dict(self):
        return asdict(self)

    def dump(self, path, extra=None):
        d = self.to_dict()
        if extra:
            d["_run"] = extra
        atomic_write_text(path, yaml.safe_dump(d, sort_keys=False))


def _build(cls, data, prefix):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"section {prefix or '<root>'} must be a mapping")
    known = {f.name: f for f in fields(cls)}
    kw = {}
    for k, v in data.items():
        if k.startswith("_"):
            continue
        if k not in known:
            raise ConfigError(f"unknown config key {prefix}{k}")
        fac = known[k].default_factory
        proto = fac() if fac is not MISSING else None
        if is_dataclass(proto):
            kw[k] = _build(type(proto), v, f"{prefix}{k}.")
        else:
            kw[k] = copy.deepcopy(v)
    try:
        return cls(**kw)
    except TypeError as exc:
        raise ConfigError(f"bad value in section {prefix or '<root>'}: {exc}") from exc


def from_dict(data) -> RunConfig:
    cfg = _build(RunConfig, data, "")
    try:
        return cfg.validate()
    except TypeError as exc:
        raise ConfigError(f"ill-typed config value: {exc}") from exc


def load(path=None) -> RunConfig:
    if path is None:
        return RunConfig().validate()
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    return from_dict(data or {})
