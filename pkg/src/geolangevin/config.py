"""Experiment configuration: JSON parsing, validation and object construction.

A config is a JSON object with a ``schema`` version string and sections
``manifold``, ``target``, ``sampler``, ``diagnostics`` and ``output``.  Only
``manifold`` and ``target`` are mandatory; everything else has defaults.
Parsing validates the whole document before any object is built, so a bad
config never produces partial outputs.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Optional

import numpy as np

from geolangevin.geometry import FlatTorus, Manifold, Sphere
from geolangevin.partition import EqualAreaGrid, LatLonGrid, Partition, TorusGrid, default_partition
from geolangevin.sampler import VARIANTS, ChainConfig
from geolangevin.target import Target, target_from_dict

SCHEMA = "geolangevin/1"

#: accepted spellings of the sampler variants
VARIANT_ALIASES = {
    "chart": "chart",
    "embedded": "embedded",
    "exp": "embedded",
    "exponential": "embedded",
    "retraction": "retraction",
    "retr": "retraction",
}

SAMPLER_DEFAULTS = {
    "variants": ["embedded"],
    "epsilon": 0.1,
    "n_steps": 1000,
    "burn_in": 0,
    "thin": 1,
    "n_chains": 1,
    "seed": 0,
    "x0": None,
    "n_ode": 64,
}

DIAGNOSTICS_DEFAULTS = {
    "partition": None,
    "checkpoints": None,
    "kl": True,
    "w2": True,
    "talagrand": True,
    "lipschitz": True,
    "moments": True,
    "rate_fit": True,
    "lipschitz_pairs": 10000,
    "quadrature_resolution": 64,
    "fp": {},
}

FP_DEFAULTS = {
    "resolution": [64, 128],
    "t_end": 2.0,
    "dt": None,
    "output_dt": 0.01,
    "rho0": "uniform",
    "mass_tol": 1e-10,
}

RECIPES = ("figure1", "figure2", "figure3")


class ConfigError(ValueError):
    """The experiment config is malformed or inconsistent."""


@dataclass
class ExperimentConfig:
    raw: dict
    manifold: Manifold
    target: Target
    sampler: dict
    diagnostics: dict
    output_dir: Optional[str]

    @property
    def variants(self) -> list[str]:
        return list(self.sampler["variants"])

    def chain_config(self, variant: str, chain_index: int = 0) -> ChainConfig:
        s = self.sampler
        return ChainConfig(
            manifold=self.manifold,
            target=self.target,
            variant=variant,
            epsilon=float(s["epsilon"]),
            n_steps=int(s["n_steps"]),
            burn_in=int(s["burn_in"]),
            thin=int(s["thin"]),
            seed=int(s["seed"]),
            chain_index=int(chain_index),
            n_ode=int(s["n_ode"]),
            x0=None if s["x0"] is None else np.asarray(s["x0"], dtype=float),
        )

    def partition(self) -> Partition:
        return build_partition(self.manifold, self.diagnostics["partition"])

    def checkpoints(self, last: Optional[int] = None) -> list[int]:
        """Checkpoint iterations; the default is 40 log-spaced points up to ``last``."""
        spec = self.diagnostics["checkpoints"]
        last = int(self.sampler["n_steps"]) if last is None else int(last)
        if spec is None:
            pts = np.unique(np.geomspace(min(10, last), last, 40).astype(np.int64))
            return [int(k) for k in pts]
        if isinstance(spec, dict):
            every = int(spec["every"])
            return list(range(every, last + 1, every))
        return [int(k) for k in spec]

    def fp(self) -> dict:
        return self.diagnostics["fp"]


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ConfigError(msg)


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and np.isfinite(v)


def build_manifold(spec: dict) -> Manifold:
    _require(isinstance(spec, dict), "manifold must be an object")
    kind = spec.get("type")
    n = spec.get("n", 3 if kind == "sphere" else 2)
    _require(_is_int(n) and n >= 1, "manifold.n must be a positive integer")
    if kind == "sphere":
        _require(n >= 2, "sphere needs ambient dimension n >= 2")
        return Sphere(n)
    if kind == "torus":
        return FlatTorus(n)
    raise ConfigError(f"unknown manifold type {kind!r}")


def build_partition(m: Manifold, spec: Optional[dict]) -> Partition:
    if spec is None:
        return default_partition(m, "kl")
    _require(isinstance(spec, dict), "diagnostics.partition must be an object")
    kind = spec.get("kind", "equal_area")
    if kind == "equal_area":
        _require(isinstance(m, Sphere) and m.n == 3, "equal_area partition needs S^2")
        return EqualAreaGrid(int(spec.get("n_z", 12)), int(spec.get("n_phi", 16)))
    if kind == "latlon":
        _require(isinstance(m, Sphere) and m.n == 3, "latlon partition needs S^2")
        return LatLonGrid(int(spec.get("n_theta", 64)), int(spec.get("n_phi", 128)))
    if kind == "torus":
        _require(isinstance(m, FlatTorus), "torus partition needs a torus")
        return TorusGrid(m.n, int(spec.get("n_per_axis", 14)))
    raise ConfigError(f"unknown partition kind {kind!r}")


def _merge(defaults: dict, given: Any, section: str) -> dict:
    if given is None:
        given = {}
    _require(isinstance(given, dict), f"{section} must be an object")
    unknown = set(given) - set(defaults) - {"variant"}
    _require(not unknown, f"unknown keys in {section}: {sorted(unknown)}")
    out = copy.deepcopy(defaults)
    out.update(copy.deepcopy(given))
    return out


def _check_sampler(s: dict, m: Manifold) -> None:
    if "variant" in s:
        s["variants"] = [s.pop("variant")]
    variants = s["variants"]
    _require(isinstance(variants, list) and variants, "sampler.variants must be a non-empty list")
    names = []
    for v in variants:
        _require(v in VARIANT_ALIASES, f"unknown variant {v!r}; expected one of {sorted(VARIANT_ALIASES)}")
        names.append(VARIANT_ALIASES[v])
    _require(len(set(names)) == len(names), "duplicate sampler variants")
    assert set(names) <= set(VARIANTS)
    if isinstance(m, FlatTorus):
        _require(names == ["chart"], "the torus supports only the chart variant")
    s["variants"] = names
    _require(_is_num(s["epsilon"]) and s["epsilon"] > 0, "sampler.epsilon must be positive")
    for key in ("n_steps", "burn_in", "thin", "n_chains", "n_ode", "seed"):
        _require(_is_int(s[key]), f"sampler.{key} must be an integer")
    _require(s["n_steps"] >= 1, "sampler.n_steps must be >= 1")
    _require(0 <= s["burn_in"] < s["n_steps"], "need 0 <= burn_in < n_steps")
    _require(s["thin"] >= 1, "sampler.thin must be >= 1")
    _require(s["n_chains"] >= 1, "sampler.n_chains must be >= 1")
    _require(s["n_ode"] >= 1, "sampler.n_ode must be >= 1")
    _require(0 <= s["seed"] < 2**64, "sampler.seed must be an unsigned 64-bit integer")
    if s["x0"] is not None:
        x0 = s["x0"]
        _require(isinstance(x0, list) and len(x0) == m.coord_dim and all(_is_num(v) for v in x0),
                 f"sampler.x0 must be a list of {m.coord_dim} numbers")
        if isinstance(m, Sphere):
            _require(np.linalg.norm(x0) > 0, "sampler.x0 must be nonzero")


def _check_diagnostics(d: dict, s: dict) -> None:
    cp = d["checkpoints"]
    if isinstance(cp, dict):
        _require(set(cp) == {"every"} and _is_int(cp["every"]) and cp["every"] >= 1,
                 "diagnostics.checkpoints object must be {\"every\": positive int}")
    elif cp is not None:
        _require(isinstance(cp, list) and cp and all(_is_int(k) for k in cp),
                 "diagnostics.checkpoints must be a non-empty list of integers")
        _require(all(b > a for a, b in zip(cp, cp[1:])), "checkpoint schedule must be strictly increasing")
        _require(cp[0] >= 1 and cp[-1] <= s["n_steps"], "checkpoints must lie in [1, n_steps]")
    for flag in ("kl", "w2", "talagrand", "lipschitz", "moments", "rate_fit"):
        _require(isinstance(d[flag], bool), f"diagnostics.{flag} must be true or false")
    _require(_is_int(d["lipschitz_pairs"]) and d["lipschitz_pairs"] >= 1, "lipschitz_pairs must be >= 1")
    _require(_is_int(d["quadrature_resolution"]) and d["quadrature_resolution"] >= 4,
             "quadrature_resolution must be an integer >= 4")
    fp = _merge(FP_DEFAULTS, d["fp"], "diagnostics.fp")
    res = fp["resolution"]
    _require(isinstance(res, list) and len(res) == 2 and all(_is_int(r) and r >= 4 for r in res),
             "fp.resolution must be [n_theta, n_phi]")
    _require(_is_num(fp["t_end"]) and fp["t_end"] > 0, "fp.t_end must be positive")
    _require(_is_num(fp["output_dt"]) and 0 < fp["output_dt"] <= fp["t_end"], "fp.output_dt must be in (0, t_end]")
    _require(fp["dt"] is None or (_is_num(fp["dt"]) and fp["dt"] > 0), "fp.dt must be positive or null")
    _require(fp["rho0"] in ("uniform", "nu"), "fp.rho0 must be 'uniform' or 'nu'")
    _require(_is_num(fp["mass_tol"]) and fp["mass_tol"] > 0, "fp.mass_tol must be positive")
    d["fp"] = fp


def parse_config(data: Any, seed: Optional[int] = None, out: Optional[str] = None) -> ExperimentConfig:
    """Validate a decoded config document and build the experiment objects.

    Args:
        data: decoded JSON object.
        seed: optional override of ``sampler.seed``.
        out: optional override of ``output.dir``.

    Raises:
        ConfigError: on any schema or consistency problem.
    """
    _require(isinstance(data, dict), "config must be a JSON object")
    _require(data.get("schema") == SCHEMA, f"config schema must be {SCHEMA!r}")
    known = {"schema", "name", "description", "manifold", "target", "sampler", "diagnostics", "output"}
    unknown = set(data) - known
    _require(not unknown, f"unknown top-level keys: {sorted(unknown)}")
    _require("manifold" in data and "target" in data, "config needs manifold and target sections")
    raw = copy.deepcopy(data)

    m = build_manifold(raw["manifold"])
    _require(isinstance(raw["target"], dict), "target must be an object")
    try:
        target = target_from_dict(raw["target"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad target: {exc}") from exc
    if target.coords == "ambient":
        dim = target.A.shape[0]
        _require(isinstance(m, Sphere) and dim == m.n and target.b.shape == (dim,),
                 "target dimension does not match the manifold")
    elif target.coords == "chart":
        _require(isinstance(m, FlatTorus) and target.dim == m.n, "chart target needs a matching torus")

    given = raw.get("sampler")
    _require(not (isinstance(given, dict) and "variant" in given and "variants" in given),
             "give either sampler.variant or sampler.variants")
    s = _merge(SAMPLER_DEFAULTS, given, "sampler")
    if seed is not None:
        s["seed"] = seed
    _check_sampler(s, m)
    d = _merge(DIAGNOSTICS_DEFAULTS, raw.get("diagnostics"), "diagnostics")
    _check_diagnostics(d, s)
    try:
        build_partition(m, d["partition"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad partition: {exc}") from exc

    output = raw.get("output") or {}
    _require(isinstance(output, dict), "output must be an object")
    out_dir = out if out is not None else output.get("dir")

    raw["sampler"] = s
    raw["diagnostics"] = d
    raw["output"] = {"dir": out_dir}
    return ExperimentConfig(raw=raw, manifold=m, target=target, sampler=s, diagnostics=d, output_dir=out_dir)


def load_config(path, seed: Optional[int] = None, out: Optional[str] = None) -> ExperimentConfig:
    """Read and validate a config file, or a bundled recipe name such as ``figure1``."""
    text = None
    if str(path) in RECIPES and not Path(path).exists():
        text = recipe_text(str(path))
    else:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    return parse_config(data, seed=seed, out=out)


def recipe_text(name: str) -> str:
    if name not in RECIPES:
        raise ConfigError(f"unknown recipe {name!r}")
    return resources.files("geolangevin.recipes").joinpath(f"{name}.json").read_text()
