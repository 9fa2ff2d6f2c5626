"""Flat dotted-key experiment configs.

A config file holds one experiment::

    experiment.kind = "qv"
    model.preset = "ou"
    model.n = 128
    functions.phi = "gauss-narrow"
    grid.t = [0.5]
    run.replicas = 200

Keys are parsed with the standard TOML reader and flattened, so
``[model]`` tables and dotted keys are interchangeable.
"""
from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..lattice import ModelParams, ParameterError
from ..testfns import PRESET_NAMES

KINDS = ("invariance", "exactness", "qv", "covariance", "crossover-scan", "bg-scan", "energy", "pair-decay",
         "semigroup", "gaussianity")

# named (beta, gamma) points, one per region of the phase diagram
REGIONS = {
    "sbe": dict(beta=0.0, gamma=0.5, alpha=1.0, a=1.0),
    "sbe-slow": dict(beta=0.25, gamma=0.5, alpha=1.0, a=1.0),
    "ou": dict(beta=0.0, gamma=1.0, alpha=1.0, a=1.0),
    "ou-slow": dict(beta=0.75, gamma=1.0, alpha=1.0, a=1.0),
    "robin": dict(beta=1.0, gamma=2.0, alpha=1.0, a=1.0),
    "robin-strong": dict(beta=1.0, gamma=1.0, alpha=2.0, a=1.0),
    "neumann": dict(beta=2.0, gamma=2.0, alpha=1.0, a=1.0),
}
REGION_LABELS = {
    "sbe": "stochastic Burgers equation",
    "sbe-slow": "stochastic Burgers equation",
    "ou": "OU, no boundary condition",
    "ou-slow": "OU, no boundary condition",
    "robin": "OU, Robin boundary condition",
    "robin-strong": "OU, Robin boundary condition with extra noise",
    "neumann": "OU, Neumann boundary condition",
}

DEFAULT_BUDGET = 2e10


class ConfigError(ValueError):
    """Unparseable or inconsistent experiment config."""


class PresetMissing(ConfigError):
    pass


class BudgetExceeded(ConfigError):
    pass


# ---------------------------------------------------------------------------
# text <-> flat dict


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def parse(text: str) -> dict:
    """Flat ``{dotted.key: value}`` mapping of a config text."""
    try:
        return _flatten(tomllib.loads(text))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc


def _scalar(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    raise ConfigError(f"cannot emit value of type {type(v).__name__}")


def emit(flat: dict) -> str:
    """Inverse of :func:`parse` for flat mappings of scalars and scalar lists."""
    lines = []
    for key in sorted(flat):
        v = flat[key]
        if isinstance(v, (list, tuple)):
            text = "[" + ", ".join(_scalar(x) for x in v) + "]"
        else:
            text = _scalar(v)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# typed config


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    name: str = ""
    # model
    n: int = 64
    alpha: float = 1.0
    beta: float = 0.0
    gamma: float = 1.0
    a: float = 0.0
    rho: float = 0.5
    region: str = ""
    K: int = 8
    # functions
    phi: str = "auto"
    psi: str = "auto"
    # grids
    grid_n: tuple = ()
    grid_L: tuple = ()
    grid_L_diffusive: bool = False
    grid_eps: tuple = ()
    grid_t: tuple = (0.25,)
    grid_gamma: tuple = ()
    grid_regions: tuple = ()
    grid_ring: tuple = ()
    grid_functions: int = 200
    grid_start: int = 7
    # run
    replicas: int = 100
    seed: int = 0
    budget_events: float = DEFAULT_BUDGET
    # tolerances
    tol: float = float("nan")
    factor: float = float("nan")
    spread: float = float("nan")
    # output
    out_dir: str = "out"
    fmt: str = "csv"
    figures: bool = False

    @property
    def ns(self) -> tuple:
        return self.grid_n or (self.n,)

    @property
    def params(self) -> ModelParams:
        return self.params_at(self.n)

    def params_at(self, n: int, gamma: float | None = None, region: str | None = None) -> ModelParams:
        base = dict(alpha=self.alpha, beta=self.beta, gamma=self.gamma, a=self.a)
        if region:
            base.update(REGIONS[region])
        if gamma is not None:
            base["gamma"] = gamma
        return ModelParams(int(n), base["alpha"], base["beta"], base["gamma"], base["a"], self.rho)

    def with_overrides(self, **kw) -> "ExperimentConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw) if kw else self


# flat key -> (field, caster)
def _tuple_of(cast):
    def f(v):
        if not isinstance(v, (list, tuple)):
            v = [v]
        return tuple(cast(x) for x in v)
    return f


def _int(v):
    if isinstance(v, bool) or not float(v).is_integer():
        raise ConfigError(f"expected an integer, got {v!r}")
    return int(v)


def _bool(v):
    if not isinstance(v, bool):
        raise ConfigError(f"expected true/false, got {v!r}")
    return v


KEYS = {
    "experiment.kind": ("kind", str),
    "experiment.name": ("name", str),
    "model.n": ("n", _int),
    "model.alpha": ("alpha", float),
    "model.beta": ("beta", float),
    "model.gamma": ("gamma", float),
    "model.a": ("a", float),
    "model.rho": ("rho", float),
    "model.preset": ("region", str),
    "lattice.K": ("K", _int),
    "functions.phi": ("phi", str),
    "functions.psi": ("psi", str),
    "grid.n": ("grid_n", _tuple_of(_int)),
    "grid.L": ("grid_L", _tuple_of(_int)),
    "grid.L_diffusive": ("grid_L_diffusive", _bool),
    "grid.eps": ("grid_eps", _tuple_of(float)),
    "grid.t": ("grid_t", _tuple_of(float)),
    "grid.gamma": ("grid_gamma", _tuple_of(float)),
    "grid.regions": ("grid_regions", _tuple_of(str)),
    "grid.ring": ("grid_ring", _tuple_of(_int)),
    "grid.functions": ("grid_functions", _int),
    "grid.start": ("grid_start", _int),
    "run.replicas": ("replicas", _int),
    "run.seed": ("seed", _int),
    "run.budget_events": ("budget_events", float),
    "check.tol": ("tol", float),
    "check.factor": ("factor", float),
    "check.spread": ("spread", float),
    "output.dir": ("out_dir", str),
    "output.format": ("fmt", str),
    "output.figures": ("figures", _bool),
}
_FIELD_KEY = {f: k for k, (f, _) in KEYS.items()}


def from_flat(flat: dict) -> ExperimentConfig:
    unknown = sorted(set(flat) - set(KEYS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    if "experiment.kind" not in flat:
        raise ConfigError("experiment.kind is required")
    kw = {}
    for key, v in flat.items():
        name, cast = KEYS[key]
        try:
            kw[name] = cast(v)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{key}: {exc}") from exc
    region = kw.get("region", "")
    if region:
        if region not in REGIONS:
            raise PresetMissing(f"unknown model preset {region!r}; known: {', '.join(REGIONS)}")
        for k, v in REGIONS[region].items():
            if f"model.{k}" not in flat:
                kw[k] = v
    cfg = ExperimentConfig(**kw)
    validate(cfg)
    return cfg


def to_flat(cfg: ExperimentConfig) -> dict:
    """Every field as a flat key, so the result re-parses to an equal config."""
    out = {}
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, float) and math.isnan(v):
            continue
        out[_FIELD_KEY[f.name]] = list(v) if isinstance(v, tuple) else v
    return out


def loads(text: str) -> ExperimentConfig:
    return from_flat(parse(text))


def load(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return loads(text)


def dumps(cfg: ExperimentConfig) -> str:
    return emit(to_flat(cfg))


# ---------------------------------------------------------------------------
# validation


def _check_model(cfg: ExperimentConfig, n: int, gamma=None, region=None):
    try:
        cfg.params_at(n, gamma, region)
    except ParameterError as exc:
        raise ConfigError(str(exc)) from exc


def validate(cfg: ExperimentConfig) -> None:
    """Raise :class:`ConfigError` on anything :func:`run_experiment` would reject."""
    if cfg.kind not in KINDS:
        raise ConfigError(f"unknown experiment kind {cfg.kind!r}; known: {', '.join(KINDS)}")
    for nm in (cfg.phi, cfg.psi):
        if nm not in PRESET_NAMES + ("auto",):
            raise PresetMissing(f"unknown test function preset {nm!r}")
    for r in cfg.grid_regions:
        if r not in REGIONS:
            raise PresetMissing(f"unknown model preset {r!r}")
    if cfg.fmt not in ("csv", "json"):
        raise ConfigError("output.format must be csv or json")
    if cfg.replicas < 1:
        raise ConfigError("run.replicas must be positive")
    if cfg.seed < 0:
        raise ConfigError("run.seed must be nonnegative")
    if cfg.grid_functions < 0:
        raise ConfigError("grid.functions must be nonnegative")
    if cfg.K < 4 or cfg.K % 2:
        raise ConfigError("lattice.K must be even and at least 4")
    if any(n < 1 for n in cfg.ns):
        raise ConfigError("grid.n entries must be positive")
    if not cfg.grid_t or any(t <= 0 for t in cfg.grid_t):
        raise ConfigError("grid.t must be a nonempty list of positive times")
    if any(L < 1 for L in cfg.grid_L):
        raise ConfigError("grid.L entries must be positive")
    if any(not 0 < e <= 1 for e in cfg.grid_eps):
        raise ConfigError("grid.eps entries must lie in (0, 1]")
    regions = cfg.grid_regions or ((cfg.region,) if cfg.region else ("",))
    gammas = cfg.grid_gamma or (None,)
    if cfg.kind not in ("semigroup",):
        for n in cfg.ns:
            for r in regions:
                for g in gammas:
                    _check_model(cfg, n, g, r or None)
    need = {
        "bg-scan": ("grid_L",),
        "energy": ("grid_eps",),
        "crossover-scan": ("grid_gamma",),
    }
    for f in need.get(cfg.kind, ()):
        if cfg.kind == "bg-scan" and cfg.grid_L_diffusive:
            continue
        if not getattr(cfg, f):
            raise ConfigError(f"{_FIELD_KEY[f]} must be nonempty for kind {cfg.kind!r}")
    if cfg.kind in ("crossover-scan", "pair-decay") and len(cfg.ns) < 2:
        raise ConfigError(f"kind {cfg.kind!r} needs at least two values in grid.n")
    if cfg.kind == "exactness":
        for N in cfg.grid_ring or (6,):
            if not 3 <= N <= 14:
                raise ConfigError("exactness rings must have 3 to 14 sites")
            if not 0 <= cfg.grid_start < 2**N:
                raise ConfigError("grid.start must be a state of the ring")
    if cfg.kind in ("qv", "crossover-scan") and cfg.rho != 0.5 and any(
            cfg.params_at(cfg.ns[0], g, r or None).a != 0 for r in regions for g in gammas):
        raise ConfigError(f"kind {cfg.kind!r} integrates fields in time and needs a static frame (a = 0 or rho = 1/2)")
    if cfg.kind == "crossover-scan" and not any(cfg.params_at(cfg.ns[0], g, r or None).a > 0
                                                for r in regions for g in gammas):
        raise ConfigError("crossover-scan needs a > 0 (the current term vanishes otherwise)")
    if cfg.kind == "invariance" and any(not 3 <= N <= 14 for N in cfg.grid_ring):
        raise ConfigError("grid.ring entries must lie in [3, 14]")

