"""YAML run configurations for the ``bounds``, ``distance`` and ``experiment`` commands.

Unknown keys are errors. Defaults are applied here and the resolved config
is what gets hashed and echoed into the run manifest.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .bounds import compute_bound_report
from .distance import VARIANTS, SearchOptions
from .distributions import DistributionSpec
from .errors import ConfigError, DomainError, GanBoundError, ShapeError
from .experiments import ERROR_KINDS, ExperimentConfig, scalar_toy_config
from .nets import MeasuringFunction, NetworkSpec, WeightAssignment

COMMON_KEYS = {"discriminator", "generator", "phi", "target", "base", "master_seed", "abs_mode", "search"}
EXPERIMENT_KEYS = COMMON_KEYS | {
    "experiment_id", "error_kind", "n_grid", "m_grid", "replicates", "N_pop",
    "sup_method", "inf_method", "epsilon_slack",
}
BOUNDS_KEYS = {"discriminator", "generator", "phi", "target", "base", "B_X", "B_Z",
               "weights_f", "weights_g"}
DISTANCE_KEYS = COMMON_KEYS | {"theta", "variant", "method", "n", "m", "samples", "N_pop"}
SEARCH_KEYS = set(SearchOptions.__dataclass_fields__)


@dataclass
class BoundsRequest:
    fspec: NetworkSpec
    gspec: NetworkSpec
    phi: MeasuringFunction
    B_X: float
    B_Z: float
    weights_f: WeightAssignment | None = None
    weights_g: WeightAssignment | None = None

    def to_dict(self) -> dict:
        d = {"discriminator": self.fspec.to_dict(), "generator": self.gspec.to_dict(),
             "phi": self.phi.to_dict(), "B_X": self.B_X, "B_Z": self.B_Z}
        if self.weights_f is not None:
            d["weights_f"] = self.weights_f.to_list()
        if self.weights_g is not None:
            d["weights_g"] = self.weights_g.to_list()
        return d


@dataclass
class DistanceRequest:
    fspec: NetworkSpec
    gspec: NetworkSpec
    phi: MeasuringFunction
    theta: WeightAssignment
    variant: str
    method: str = "pgd"
    abs_mode: bool = True
    master_seed: int = 0
    target: DistributionSpec | None = None
    base: DistributionSpec | None = None
    n: int | None = None
    m: int | None = None
    samples: dict | None = None
    N_pop: int = 100_000
    search: SearchOptions = field(default_factory=SearchOptions)

    def to_dict(self) -> dict:
        d = {"discriminator": self.fspec.to_dict(), "generator": self.gspec.to_dict(),
             "phi": self.phi.to_dict(), "theta": self.theta.to_list(), "variant": self.variant,
             "method": self.method, "abs_mode": self.abs_mode, "master_seed": self.master_seed,
             "N_pop": self.N_pop, "search": self.search.to_dict()}
        for key in ("n", "m", "samples"):
            if getattr(self, key) is not None:
                d[key] = getattr(self, key)
        if self.target is not None:
            d["target"] = self.target.to_dict()
        if self.base is not None:
            d["base"] = self.base.to_dict()
        return d


# ------------------------------------------------------------- helpers


def _require(d: dict, key: str):
    if key not in d:
        raise ConfigError(f"{key} required")
    return d[key]


def _check_keys(d: dict, allowed: set, where: str):
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be a mapping")
    unknown = sorted(set(d) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")


def _int(d: dict, key: str, default=None, minimum: int | None = None) -> int:
    v = d.get(key, default)
    if v is None:
        raise ConfigError(f"{key} required")
    if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
        raise ConfigError(f"{key} must be an integer, got {v!r}")
    if minimum is not None and v < minimum:
        raise ConfigError(f"{key} must be >= {minimum}, got {v}")
    return int(v)


def _float(d: dict, key: str, default=None) -> float:
    v = d.get(key, default)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{key} must be a number, got {v!r}")
    return float(v)


def _int_list(d: dict, key: str, default=None) -> tuple:
    v = d.get(key, default)
    if v is None:
        raise ConfigError(f"{key} required")
    if not isinstance(v, list) or any(isinstance(x, bool) or not isinstance(x, int) for x in v):
        raise ConfigError(f"{key} must be a list of integers")
    return tuple(v)


def parse_abs_mode(v) -> bool:
    # YAML 1.1 already turns bare on/off into booleans
    if isinstance(v, bool):
        return v
    if v in ("on", "off"):
        return v == "on"
    raise ConfigError(f"abs_mode must be on or off, got {v!r}")


def _spec(d, where: str) -> NetworkSpec:
    _check_keys(d, {"layer_dims", "norm_bounds", "activations"}, where)
    try:
        return NetworkSpec.from_dict({"layer_dims": _require(d, "layer_dims"),
                                      "norm_bounds": _require(d, "norm_bounds"),
                                      "activations": d.get("activations") or []})
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _phi(v) -> MeasuringFunction:
    if v is None:
        return MeasuringFunction("identity")
    if isinstance(v, str):
        v = {"kind": v}
    _check_keys(v, {"kind", "delta"}, "phi")
    try:
        return MeasuringFunction.from_dict(v)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"phi: {exc}") from exc


def _dist(d, where: str, generator=None, base=None) -> DistributionSpec:
    _check_keys(d, {"kind", "dimension", "radius", "generator", "theta", "base", "points"}, where)
    try:
        return DistributionSpec.from_dict(d, generator=generator, base=base)
    except KeyError as exc:
        raise ConfigError(f"{where}: {exc.args[0]} required") from exc
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _weights(v, spec: NetworkSpec, where: str) -> WeightAssignment:
    try:
        return WeightAssignment.from_list(v).validate(spec)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _search(d) -> SearchOptions:
    d = d or {}
    _check_keys(d, SEARCH_KEYS, "search")
    kwargs = {}
    for key, default in SearchOptions().to_dict().items():
        if key in d:
            kwargs[key] = _float(d, key) if isinstance(default, float) else _int(d, key, minimum=0)
    try:
        return SearchOptions(**kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"search: {exc}") from exc


def _laws(raw: dict, gspec: NetworkSpec):
    base = _dist(_require(raw, "base"), "base")
    target = _dist(_require(raw, "target"), "target", generator=gspec, base=base)
    return target, base


def precheck(fspec, gspec, phi, target, base):
    """Reject classes whose envelope intervals leave the measuring function's domain."""
    try:
        return compute_bound_report(fspec, gspec, phi, target.norm_bound(), base.norm_bound())
    except (DomainError, ShapeError, ValueError) as exc:
        raise ConfigError(f"bound-report precheck failed: {exc}") from exc


# ------------------------------------------------------------- parsers


def load_yaml(path) -> dict:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config {p}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config {p} must be a mapping at top level")
    return raw


def experiment_from_dict(raw: dict) -> ExperimentConfig:
    _check_keys(raw, EXPERIMENT_KEYS, "experiment config")
    seed = _int(raw, "master_seed", minimum=0)
    kind = _require(raw, "error_kind")
    if kind not in ERROR_KINDS:
        raise ConfigError(f"error_kind must be one of {', '.join(ERROR_KINDS)}, got {kind!r}")
    fspec = _spec(_require(raw, "discriminator"), "discriminator")
    gspec = _spec(_require(raw, "generator"), "generator")
    phi = _phi(raw.get("phi"))
    target, base = _laws(raw, gspec)
    precheck(fspec, gspec, phi, target, base)
    try:
        return ExperimentConfig(
            error_kind=kind, fspec=fspec, gspec=gspec, phi=phi, target=target, base=base,
            n_grid=_int_list(raw, "n_grid"), m_grid=_int_list(raw, "m_grid", []),
            replicates=_int(raw, "replicates", 200, 1), N_pop=_int(raw, "N_pop", 100_000, 1),
            sup_method=raw.get("sup_method", "grid"), inf_method=raw.get("inf_method", "grid"),
            master_seed=seed, epsilon_slack=_float(raw, "epsilon_slack", 0.0),
            abs_mode=parse_abs_mode(raw.get("abs_mode", True)),
            experiment_id=str(raw.get("experiment_id", "exp")), search=_search(raw.get("search")),
        )
    except ConfigError:
        raise
    except GanBoundError as exc:
        raise ConfigError(str(exc)) from exc


def bounds_from_dict(raw: dict) -> BoundsRequest:
    _check_keys(raw, BOUNDS_KEYS, "bounds config")
    fspec = _spec(_require(raw, "discriminator"), "discriminator")
    gspec = _spec(_require(raw, "generator"), "generator")
    phi = _phi(raw.get("phi"))
    if "B_X" in raw and "B_Z" in raw:
        B_X, B_Z = _float(raw, "B_X"), _float(raw, "B_Z")
    else:
        target, base = _laws(raw, gspec)
        B_X = _float(raw, "B_X", target.norm_bound()) if "B_X" in raw else target.norm_bound()
        B_Z = _float(raw, "B_Z", base.norm_bound()) if "B_Z" in raw else base.norm_bound()
    wf = _weights(raw["weights_f"], fspec, "weights_f") if "weights_f" in raw else None
    wg = _weights(raw["weights_g"], gspec, "weights_g") if "weights_g" in raw else None
    return BoundsRequest(fspec, gspec, phi, B_X, B_Z, wf, wg)


def distance_from_dict(raw: dict) -> DistanceRequest:
    _check_keys(raw, DISTANCE_KEYS, "distance config")
    fspec = _spec(_require(raw, "discriminator"), "discriminator")
    gspec = _spec(_require(raw, "generator"), "generator")
    phi = _phi(raw.get("phi"))
    theta = _weights(_require(raw, "theta"), gspec, "theta")
    variant = raw.get("variant", "empirical_mn")
    if variant not in VARIANTS:
        raise ConfigError(f"variant must be one of {', '.join(VARIANTS)}, got {variant!r}")
    method = raw.get("method", "pgd")
    if method not in ("pgd", "grid"):
        raise ConfigError(f"method must be pgd or grid, got {method!r}")
    samples = raw.get("samples")
    target = base = None
    if samples is not None:
        _check_keys(samples, {"x", "z"}, "samples")
        _require(samples, "x"), _require(samples, "z")
    if "target" in raw or "base" in raw:
        target, base = _laws(raw, gspec)
        precheck(fspec, gspec, phi, target, base)
    needs_draws = samples is None and variant != "population"
    if needs_draws and target is None:
        raise ConfigError("samples or target/base laws required")
    if variant == "half_empirical" and base is None:
        raise ConfigError("base required for the half_empirical variant")
    if variant == "population" and target is None:
        raise ConfigError("target and base required for the population variant")
    n = _int(raw, "n", minimum=1) if needs_draws else raw.get("n")
    m = _int(raw, "m", minimum=1) if needs_draws and variant == "empirical_mn" else raw.get("m")
    return DistanceRequest(
        fspec, gspec, phi, theta, variant, method, parse_abs_mode(raw.get("abs_mode", True)),
        _int(raw, "master_seed", 0, 0), target, base, n, m, samples,
        _int(raw, "N_pop", 100_000, 1), _search(raw.get("search")))


PARSERS = {"experiment": experiment_from_dict, "bounds": bounds_from_dict, "distance": distance_from_dict}


def parse_config(path, command: str = "experiment"):
    """Validated request object for ``command`` from the YAML file at ``path``."""
    if command not in PARSERS:
        raise ConfigError(f"no config schema for command {command!r}")
    return PARSERS[command](load_yaml(path))


def dump_config(obj) -> str:
    """Canonical YAML text; parsing it back gives an equal object."""
    return yaml.safe_dump(config_dict(obj), sort_keys=True, default_flow_style=None)


def config_dict(obj) -> dict:
    if isinstance(obj, ExperimentConfig):
        d = obj.to_dict()
        d["discriminator"] = d.pop("fspec")
        d["generator"] = d.pop("gspec")
        return d
    return obj.to_dict()


def config_hash(obj) -> str:
    """SHA-256 of the canonical JSON encoding (sorted keys, fixed separators)."""
    text = json.dumps(config_dict(obj), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def example_config(kind: str) -> str:
    """A valid template: the scalar toy for an error kind, or a bounds/distance request."""
    if kind in ERROR_KINDS:
        return dump_config(scalar_toy_config(kind))
    cfg = scalar_toy_config()
    if kind == "bounds":
        return dump_config(BoundsRequest(cfg.fspec, cfg.gspec, cfg.phi, cfg.target.norm_bound(),
                                         cfg.base.norm_bound()))
    if kind == "distance":
        return dump_config(DistanceRequest(cfg.fspec, cfg.gspec, cfg.phi, WeightAssignment([[[0.5]]]),
                                           "empirical_mn", "grid", True, 1, cfg.target, cfg.base,
                                           1000, 1000, search=SearchOptions(grid_points=21)))
    raise ConfigError(f"no example config for {kind!r}; choose from {', '.join(ERROR_KINDS)}, bounds, distance")
