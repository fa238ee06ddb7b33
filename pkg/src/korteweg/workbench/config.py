"""Strict JSON configuration for runs, sweeps and lemma suites.

Every block has a fixed key set; unknown or missing keys raise ConfigError
so that a config file always describes exactly one experiment.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

from ..constitutive import ModelParams
from ..errors import ConfigError, KortewegError
from ..field import Grid
from ..integrate import TimeControls

MODELS = ("euler_korteweg", "nsk", "quantum_euler_direct")
DEFAULT_CHECKPOINTS = 32
DEFAULT_C0 = 1.0


def _take(block, name, required=(), optional=()):
    if not isinstance(block, dict):
        raise ConfigError(f"{name}: expected an object, got {type(block).__name__}")
    unknown = set(block) - set(required) - set(optional)
    if unknown:
        raise ConfigError(f"{name}: unknown keys {sorted(unknown)}")
    missing = [k for k in required if k not in block]
    if missing:
        raise ConfigError(f"{name}: missing keys {missing}")
    return block


def _number(block, key, name, default=None, integer=False):
    if key not in block:
        if default is None:
            raise ConfigError(f"{name}.{key} is required")
        return default
    val = block[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{name}.{key} must be a number, got {val!r}")
    if not math.isfinite(val):
        raise ConfigError(f"{name}.{key} must be finite")
    if integer:
        if int(val) != val:
            raise ConfigError(f"{name}.{key} must be an integer")
        return int(val)
    return float(val)


# -- initial data ----------------------------------------------------------------

INITIAL_FIELDS = {
    "constant": ("rho0", "u0"),
    "gaussian_bump": ("amplitude", "width", "base"),
    "sine_perturbation": ("mode", "amplitude", "base_rho", "base_u"),
}


@dataclass(frozen=True)
class InitialData:
    kind: str
    values: tuple  # ordered as INITIAL_FIELDS[kind]

    @classmethod
    def from_dict(cls, block) -> "InitialData":
        if not isinstance(block, dict) or "kind" not in block:
            raise ConfigError("initial: expected an object with a 'kind' key")
        kind = block["kind"]
        if kind not in INITIAL_FIELDS:
            raise ConfigError(f"initial.kind must be one of {sorted(INITIAL_FIELDS)}")
        names = INITIAL_FIELDS[kind]
        _take(block, "initial", required=("kind",) + names)
        vals = tuple(_number(block, k, "initial", integer=(k == "mode")) for k in names)
        init = cls(kind, vals)
        init.validate()
        return init

    def get(self, key):
        return self.values[INITIAL_FIELDS[self.kind].index(key)]

    def validate(self):
        if self.kind == "constant":
            if not self.get("rho0") > 0:
                raise ConfigError("initial.rho0 must be positive")
        elif self.kind == "gaussian_bump":
            if not self.get("base") > 0 or not abs(self.get("amplitude")) < self.get("base"):
                raise ConfigError("initial: need base > 0 and |amplitude| < base")
            if not self.get("width") > 0:
                raise ConfigError("initial.width must be positive")
        else:
            if not self.get("base_rho") > 0 or not abs(self.get("amplitude")) < self.get("base_rho"):
                raise ConfigError("initial: need base_rho > 0 and |amplitude| < base_rho")
            if self.get("mode") < 1:
                raise ConfigError("initial.mode must be >= 1")

    def fields(self, grid: Grid):
        """Primitive (rho, u) node values."""
        x, L = grid.x, grid.length
        if self.kind == "constant":
            return np.full(grid.n, self.get("rho0")), np.full(grid.n, self.get("u0"))
        if self.kind == "gaussian_bump":
            w, centre = self.get("width"), L / 2
            # periodize with enough images that truncation is below round-off
            images = int(np.ceil(8 * w / L)) + 1
            bump = sum(np.exp(-((x - centre + k * L) / w) ** 2)
                       for k in range(-images, images + 1))
            bump = bump / np.max(bump)
            return self.get("base") + self.get("amplitude") * bump, np.zeros(grid.n)
        k = 2 * np.pi * self.get("mode") / L
        rho = self.get("base_rho") + self.get("amplitude") * np.sin(k * x)
        return rho, np.full(grid.n, self.get("base_u"))

    def to_dict(self) -> dict:
        return {"kind": self.kind, **dict(zip(INITIAL_FIELDS[self.kind], self.values))}


# -- reference --------------------------------------------------------------------

@dataclass(frozen=True)
class Manufactured:
    """Travelling wave r = base + amplitude sin(k (x - speed t)), U = speed."""

    base: float
    amplitude: float
    mode: int
    speed: float

    def to_dict(self):
        return {"kind": "traveling_wave", "base": self.base, "amplitude": self.amplitude,
                "mode": self.mode, "speed": self.speed}


@dataclass(frozen=True)
class ReferenceSpec:
    high_resolution_factor: Optional[int] = None
    manufactured: Optional[Manufactured] = None

    @classmethod
    def from_dict(cls, block):
        _take(block, "reference", optional=("high_resolution_factor", "manufactured"))
        if len(block) != 1:
            raise ConfigError("reference: give exactly one of high_resolution_factor, manufactured")
        if "high_resolution_factor" in block:
            f = _number(block, "high_resolution_factor", "reference", integer=True)
            if f not in (2, 4, 8):
                raise ConfigError("reference.high_resolution_factor must be 2, 4 or 8")
            return cls(high_resolution_factor=f)
        m = _take(block["manufactured"], "reference.manufactured",
                  required=("kind", "base", "amplitude", "mode", "speed"))
        if m["kind"] != "traveling_wave":
            raise ConfigError("reference.manufactured.kind must be 'traveling_wave'")
        man = Manufactured(_number(m, "base", "manufactured"),
                           _number(m, "amplitude", "manufactured"),
                           _number(m, "mode", "manufactured", integer=True),
                           _number(m, "speed", "manufactured"))
        if not (man.base > 0 and abs(man.amplitude) < man.base and man.mode >= 1):
            raise ConfigError("manufactured wave needs base > 0, |amplitude| < base, mode >= 1")
        return cls(manufactured=man)

    def to_dict(self):
        if self.high_resolution_factor is not None:
            return {"high_resolution_factor": self.high_resolution_factor}
        return {"manufactured": self.manufactured.to_dict()}


# -- scenario ---------------------------------------------------------------------

CONTROL_KEYS = ("t_end", "cfl_hyperbolic", "cfl_dispersive", "dt_max", "vacuum_floor",
                "record_stride", "checkpoints", "consistency_tol", "dealias")


@dataclass(frozen=True)
class ScenarioConfig:
    model: str
    params: ModelParams
    grid: Grid
    controls: TimeControls
    initial: InitialData
    reference: Optional[ReferenceSpec] = None
    output_dir: Optional[str] = None
    gronwall_c0: float = DEFAULT_C0

    @classmethod
    def from_dict(cls, data) -> "ScenarioConfig":
        _take(data, "scenario", required=("model", "params", "grid", "controls", "initial"),
              optional=("reference", "output_dir", "gronwall_c0"))
        model = data["model"]
        if model not in MODELS:
            raise ConfigError(f"model must be one of {MODELS}, got {model!r}")
        pb = _take(data["params"], "params", required=("gamma",),
                   optional=("s", "epsilon", "nu"))
        gb = _take(data["grid"], "grid", required=("n", "length"))
        cb = _take(data["controls"], "controls", required=("t_end",), optional=CONTROL_KEYS)
        try:
            params = ModelParams(_number(pb, "gamma", "params"), _number(pb, "s", "params", -1.0),
                                 _number(pb, "epsilon", "params", 0.0),
                                 _number(pb, "nu", "params", 0.0))
            if model == "nsk":
                params.require_nsk()
            elif params.nu != 0:
                raise ConfigError(f"model {model} is inviscid; params.nu must be 0")
            if model == "quantum_euler_direct" and params.s != -1:
                raise ConfigError("quantum_euler_direct requires s = -1")
            grid = Grid(_number(gb, "n", "grid", integer=True), _number(gb, "length", "grid"))
            kw = {}
            for key in CONTROL_KEYS:
                if key not in cb or cb[key] is None:
                    continue
                if key == "dealias":
                    if not isinstance(cb[key], bool):
                        raise ConfigError("controls.dealias must be a boolean")
                    kw[key] = cb[key]
                else:
                    kw[key] = _number(cb, key, "controls",
                                      integer=key in ("record_stride", "checkpoints"))
            kw.setdefault("checkpoints", DEFAULT_CHECKPOINTS)
            controls = TimeControls(**kw)
        except ConfigError:
            raise
        except (KortewegError, ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc
        initial = InitialData.from_dict(data["initial"])
        reference = ReferenceSpec.from_dict(data["reference"]) if data.get("reference") else None
        if reference is not None and reference.manufactured is not None and model != "euler_korteweg":
            raise ConfigError("manufactured references are supported for euler_korteweg only")
        out = data.get("output_dir")
        if out is not None and not isinstance(out, str):
            raise ConfigError("output_dir must be a string")
        c0 = _number(data, "gronwall_c0", "scenario", DEFAULT_C0)
        if not c0 > 0:
            raise ConfigError("gronwall_c0 must be positive")
        return cls(model, params, grid, controls, initial, reference, out, c0)

    def to_dict(self) -> dict:
        out = {
            "model": self.model,
            "params": self.params.to_dict(),
            "grid": self.grid.to_dict(),
            "controls": {k: v for k, v in self.controls.to_dict().items() if v is not None},
            "initial": self.initial.to_dict(),
            "gronwall_c0": self.gronwall_c0,
        }
        if self.reference is not None:
            out["reference"] = self.reference.to_dict()
        if self.output_dir is not None:
            out["output_dir"] = self.output_dir
        return out

    def with_changes(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)


# -- sweep ------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepConfig:
    base: ScenarioConfig
    nu_values: tuple
    limit_run: ScenarioConfig
    output_dir: Optional[str] = None

    @classmethod
    def from_dict(cls, data) -> "SweepConfig":
        _take(data, "sweep", required=("base", "nu_values"), optional=("limit_run", "output_dir"))
        base_block = dict(data["base"])
        nus = data["nu_values"]
        if not isinstance(nus, list) or not nus:
            raise ConfigError("nu_values must be a non-empty list")
        nu_values = tuple(_number({"nu": v}, "nu", "nu_values") for v in nus)
        base_params = dict(base_block.get("params", {}))
        base_params["nu"] = base_params.get("nu", nu_values[0]) or nu_values[0]
        base_block["params"] = base_params
        base = ScenarioConfig.from_dict(base_block)
        if base.model != "nsk":
            raise ConfigError("sweep base model must be nsk")
        eps = base.params.epsilon
        for nu in nu_values:
            if not 0 < nu < eps:
                raise ConfigError(f"every nu must lie in (0, epsilon={eps}); got {nu}")
        if any(b >= a for a, b in zip(nu_values, nu_values[1:])):
            raise ConfigError("nu_values must be strictly decreasing")
        if "limit_run" in data:
            limit = ScenarioConfig.from_dict(data["limit_run"])
        else:
            limit = replace(base, model="euler_korteweg", params=base.params.replace(nu=0.0),
                            reference=None)
        if limit.model not in ("euler_korteweg", "quantum_euler_direct"):
            raise ConfigError("limit_run model must be euler_korteweg")
        if limit.params.nu != 0 or limit.params.epsilon != eps:
            raise ConfigError("limit_run must use nu = 0 and the same epsilon as the base")
        if (limit.params.gamma, limit.params.s) != (base.params.gamma, base.params.s):
            raise ConfigError("limit_run must share gamma and s with the base")
        if limit.grid != base.grid or limit.initial != base.initial:
            raise ConfigError("limit_run must share grid and initial data with the base")
        if not np.allclose(limit.controls.checkpoint_times(), base.controls.checkpoint_times(),
                           rtol=0, atol=0):
            raise ConfigError("limit_run must share t_end and checkpoints with the base")
        out = data.get("output_dir")
        return cls(base, nu_values, limit, out)

    def cell(self, nu: float) -> ScenarioConfig:
        return replace(self.base, params=self.base.params.replace(nu=nu))

    def to_dict(self) -> dict:
        out = {"base": self.base.to_dict(), "nu_values": list(self.nu_values),
               "limit_run": self.limit_run.to_dict()}
        if self.output_dir is not None:
            out["output_dir"] = self.output_dir
        return out


# -- lemma suite ---------------------------------------------------------------------

@dataclass(frozen=True)
class LemmaConfig:
    pairs: tuple = ((2.0, -1.0), (3.0, 0.0), (3.0, 1.0))
    negative_controls: tuple = ((1.5, 1.0),)
    r_range: tuple = (0.5, 2.0)
    rho_range: tuple = (0.1, 10.0)
    n_samples: int = 4096
    seed: int = 0
    identity_samples: int = 10_000
    output_dir: Optional[str] = None

    @classmethod
    def from_dict(cls, data) -> "LemmaConfig":
        _take(data, "lemmas", optional=("pairs", "negative_controls", "region",
                                        "identity_samples", "output_dir"))
        kw = {}
        for key in ("pairs", "negative_controls"):
            if key in data:
                val = data[key]
                if not isinstance(val, list) or not all(
                        isinstance(p, list) and len(p) == 2 for p in val):
                    raise ConfigError(f"{key} must be a list of [gamma, s] pairs")
                kw[key] = tuple((_number({"v": g}, "v", key), _number({"v": s}, "v", key))
                                for g, s in val)
        for gamma, s in kw.get("pairs", cls.pairs):
            try:
                ModelParams(gamma, s)
            except KortewegError as exc:
                raise ConfigError(f"pairs: {exc}; list violating pairs under "
                                  "negative_controls") from exc
        for gamma, s in kw.get("negative_controls", ()):
            if gamma >= s + 2:
                raise ConfigError(f"negative control ({gamma}, {s}) satisfies the hypotheses")
        if "region" in data:
            reg = _take(data["region"], "region",
                        optional=("r_range", "rho_range", "n_samples", "seed"))
            for key in ("r_range", "rho_range"):
                if key in reg:
                    rng = reg[key]
                    if not (isinstance(rng, list) and len(rng) == 2):
                        raise ConfigError(f"region.{key} must be [min, max]")
                    lo, hi = (_number({"v": v}, "v", key) for v in rng)
                    if not 0 < lo < hi:
                        raise ConfigError(f"region.{key} must satisfy 0 < min < max")
                    kw[key] = (lo, hi)
            if "n_samples" in reg:
                kw["n_samples"] = _number(reg, "n_samples", "region", integer=True)
                if kw["n_samples"] < 1000:
                    raise ConfigError("region.n_samples must be >= 1000")
            if "seed" in reg:
                kw["seed"] = _number(reg, "seed", "region", integer=True)
        if "identity_samples" in data:
            kw["identity_samples"] = _number(data, "identity_samples", "lemmas", integer=True)
        if "output_dir" in data:
            kw["output_dir"] = data["output_dir"]
        return cls(**kw)


def load_json(path) -> dict:
    try:
        with open(Path(path)) as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from exc


def load_scenario(path) -> ScenarioConfig:
    """Read a scenario config; a run's manifest.json is accepted as well."""
    data = load_json(path)
    if isinstance(data, dict) and "config" in data and "status" in data:
        data = data["config"]
    return ScenarioConfig.from_dict(data)
