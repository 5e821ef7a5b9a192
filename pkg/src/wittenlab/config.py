"""Experiment configuration: tolerances, presets, deterministic digests.

Configs round-trip through JSON and are validated against the schema
shipped in wittenlab/schemas/.  Every output file embeds the config
digest so runs are attributable and reproducible byte for byte.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .trigpoly import TrigPoly, circle_sin2, torus_sin2_product


@dataclass(frozen=True)
class Tolerances:
    """Numerical thresholds; defaults chosen for dense double precision."""

    operator_identity: float = 1e-10
    eig_residual: float = 1e-9
    zero_rel: float = 1e-9  # kernel detection, relative to spectral scale
    overlap_min: float = 0.9  # consecutive eigenvector overlap in tracking
    cluster_rel: float = 1e-6  # relative gap treated as a degenerate cluster
    gap_min: float = 10.0  # small/large spectral separation at t_max
    decay_ratio: float = 0.5  # lambda(t_max) <= ratio * lambda(t_max/2)
    vanish_max: float = 1e-6  # ceiling for decaying branches at t_max
    growth_floor: float = 1.0  # floor for growing branches at t_max
    mass_min: float = 0.5  # localization mass per assigned branch
    mass_radius: float = math.pi / 8
    quad_rel: float = 1e-10  # adaptive quadrature relative target
    det_gap: float = 1e3  # nullity gap ratio in det'
    newton_tol: float = 1e-12  # critical point refinement
    nondegen_tol: float = 1e-8  # Hessian nondegeneracy floor

    def replace(self, **kw) -> "Tolerances":
        return dataclasses.replace(self, **kw)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "Tolerances":
        known = {f.name for f in dataclasses.fields(cls)}
        bad = set(d) - known
        if bad:
            raise ConfigError(f"unknown tolerance keys: {sorted(bad)}")
        for k, v in d.items():
            if not (isinstance(v, (int, float)) and v > 0):
                raise ConfigError(f"tolerance {k} must be a positive number")
        return cls(**d)


def _potential_to_json(f: TrigPoly) -> dict:
    terms = []
    for key in sorted(f.terms):
        c, s = f.terms[key]
        terms.append({"freq": list(key), "cos": c, "sin": s})
    return {"arity": f.arity, "terms": terms}


def _potential_from_json(spec) -> TrigPoly:
    if isinstance(spec, str):
        if spec == "sin2":
            return circle_sin2()
        if spec == "sin2-product":
            return torus_sin2_product()
        raise ConfigError(f"unknown potential preset {spec!r}")
    try:
        p = TrigPoly(int(spec["arity"]))
        for term in spec["terms"]:
            key = tuple(int(k) for k in term["freq"])
            if len(key) != p.arity:
                raise ConfigError("frequency vector length must equal arity")
            p._add(key, float(term.get("cos", 0.0)), float(term.get("sin", 0.0)))
        return p
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed potential document: {exc}") from exc


@dataclass(frozen=True)
class ExperimentConfig:
    manifold: str = "circle"
    potential: str | dict = "sin2"
    modes: int = 32
    t_max: float = 15.0
    t_step: float = 0.25
    k_extra: int = 6  # tracked branches beyond c_q
    degrees: tuple | None = None  # None = all degrees of the manifold
    seed: int = 0
    out_dir: str = "out"
    format: str = "json"
    tolerances: Tolerances = field(default_factory=Tolerances)

    def __post_init__(self):
        if self.manifold not in ("circle", "torus"):
            raise ConfigError(f"unknown manifold {self.manifold!r}")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"format must be csv or json, got {self.format!r}")
        if not (isinstance(self.modes, int) and 2 <= self.modes <= 128):
            raise ConfigError("modes must be an integer in [2, 128]")
        if not (0 < self.t_step <= self.t_max):
            raise ConfigError("need 0 < t_step <= t_max")
        if self.k_extra < 0:
            raise ConfigError("k_extra must be nonnegative")
        n = 1 if self.manifold == "circle" else 2
        degs = tuple(range(n + 1)) if self.degrees is None else tuple(self.degrees)
        if any(not (0 <= q <= n) for q in degs):
            raise ConfigError(f"degrees must lie in 0..{n}")
        object.__setattr__(self, "degrees", degs)

    @property
    def dim(self) -> int:
        return 1 if self.manifold == "circle" else 2

    def potential_trigpoly(self) -> TrigPoly:
        f = _potential_from_json(self.potential)
        if f.arity != self.dim:
            raise ConfigError(
                f"potential arity {f.arity} does not match manifold {self.manifold}"
            )
        return f

    def grid(self) -> np.ndarray:
        ts = np.arange(0.0, self.t_max + 0.5 * self.t_step, self.t_step)
        ts = np.round(ts, 12)
        if ts[-1] < self.t_max:
            ts = np.append(ts, self.t_max)
        else:
            ts[-1] = self.t_max
        return ts

    def as_dict(self) -> dict:
        d = {
            "manifold": self.manifold,
            "potential": self.potential,
            "modes": self.modes,
            "t_max": self.t_max,
            "t_step": self.t_step,
            "k_extra": self.k_extra,
            "degrees": list(self.degrees),
            "seed": self.seed,
            "out_dir": self.out_dir,
            "format": self.format,
            "tolerances": self.tolerances.as_dict(),
        }
        return d

    def digest(self) -> str:
        canon = json.dumps(self.as_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]

    def replace(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        validate_config_dict(d)
        d = dict(d)
        if "tolerances" in d:
            d["tolerances"] = Tolerances.from_dict(d["tolerances"])
        if "degrees" in d and d["degrees"] is not None:
            d["degrees"] = tuple(d["degrees"])
        cfg = cls(**d)
        cfg.potential_trigpoly()  # fail fast on malformed potentials
        return cfg

    @classmethod
    def from_json(cls, path: str) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                d = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(d)


def validate_config_dict(d: dict):
    """Validate a raw config document against the shipped JSON schema."""
    import jsonschema

    try:
        jsonschema.validate(d, load_schema("experiment-config"))
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"config schema violation: {exc.message}") from exc


def load_schema(name: str) -> dict:
    from importlib import resources

    ref = resources.files("wittenlab") / "schemas" / f"{name}.schema.json"
    with ref.open() as fh:
        return json.load(fh)


# one-command reproductions of the worked example; the torus preset uses
# the window where its cutoff resolves the decaying branches (the small
# eigenvalues re-inflate past t ~ 5 at modes=12, a pure truncation effect)
PRESETS = {
    "circle-sin2": ExperimentConfig(
        manifold="circle", potential="sin2", modes=32, t_max=15.0, t_step=0.25
    ),
    "torus-sin2-product": ExperimentConfig(
        manifold="torus",
        potential="sin2-product",
        modes=12,
        t_max=5.0,
        t_step=0.25,
        tolerances=Tolerances(vanish_max=1e-4),
    ),
}


def preset(name: str) -> ExperimentConfig:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(
            f"unknown preset {name!r}; available: {sorted(PRESETS)}"
        ) from None
