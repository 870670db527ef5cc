"""Experiment configuration: defaults, INI overrides and domain construction.

An INI file has an ``[experiment]`` section for run-wide settings and one
optional section per domain (``[so3]``, ``[terrain-ridge]``, ``[pdm-lite]``,
...) whose keys override that domain's dynamics or geometry. Unknown
sections or keys are errors.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from corrsched import geometry as geo
from corrsched.dynamics import DynamicsParams
from corrsched.pdm_lite import AnnealSchedule, ObstacleSet, TrajectoryEnergy


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


def default_budget_grid(step: float = 0.05) -> tuple[float, ...]:
    n = round(1.0 / step)
    return tuple(round(k / n, 10) for k in range(n + 1))


# Tuned per-domain overrides of DynamicsParams / DomainSpec / pdm settings.
DEFAULT_OVERRIDES: dict[str, dict] = {
    "so3": {},
    "se3": {},
    "terrain": {},
    "so3-impulse": {"impulse_magnitude": 10.0},
    "se3-lever": {"impulse_magnitude": 10.0, "lever_length": 5.0, "lever_gain": 0.8},
    "terrain-ridge": {
        "ridge_amplitude": 1.5,
        "ridge_sharpness": 20.0,
        "ridge_offset": 5.0,
        "ridge_bend": 0.5,
        "ridge_bend_freq": 0.5,
    },
    "pdm-lite": {
        "obstacles": ((2.5, 0.25, 0.8), (5.0, -0.25, 0.8), (7.5, 0.25, 0.8)),
        "levels": 10,
        "inner_steps": 20,
        "sigma_max": 0.3,
        "sigma_min": 0.01,
        "anneal_step": 0.2,
        "smoothness": 1.0,
        "obstacle_stiffness": 40.0,
    },
}

_DYN_KEYS = {f.name for f in dataclasses.fields(DynamicsParams)} - {"anneal", "energy", "horizon"}
_FIELD_KEYS = {f.name for f in dataclasses.fields(geo.HeightField)}
_SPEC_KEYS = {"alpha", "lever_length", "lever_anchor", "waypoints", "start", "goal"}
_PDM_KEYS = {
    "obstacles", "margin", "corridor", "levels", "inner_steps", "sigma_max", "sigma_min",
    "anneal_step", "smoothness", "obstacle_stiffness",
}
_INT_KEYS = {"impulse_start", "impulse_end", "waypoints", "levels", "inner_steps"}
_VECTOR_KEYS = {"lever_anchor": 3, "start": 2, "goal": 2, "corridor": 2}


def allowed_domain_keys(domain: str) -> set[str]:
    if domain == "pdm-lite":
        return (_DYN_KEYS - {"impulse_start", "impulse_end", "impulse_magnitude"}) | _SPEC_KEYS | _PDM_KEYS
    return set(_DYN_KEYS) | _FIELD_KEYS | _SPEC_KEYS


@dataclass(frozen=True)
class DomainSetup:
    spec: geo.DomainSpec
    params: DynamicsParams


@dataclass
class ExperimentConfig:
    domains: tuple[str, ...] = geo.SYNTHETIC_DOMAINS
    horizon: int = 200
    budget_grid: tuple[float, ...] = field(default_factory=default_budget_grid)
    calibration_seed_start: int = 10_000
    n_cal: int = 64
    evaluation_seed_start: int = 0
    n_eval: int = 50
    q: float = 0.2
    eps: float = 1e-8
    summary_fraction: float = 0.25
    compact_traces: bool = False
    write_traces: bool = False
    # pdm-lite uses its own seed ranges; its horizon is levels * inner_steps
    pdm_calibration_seed_start: int = 20_000
    pdm_n_cal: int = 64
    pdm_evaluation_seed_start: int = 30_000
    pdm_n_eval: int = 50
    pdm_scene_seeds: tuple[int, ...] = (30_000,)
    overrides: dict[str, dict] = field(default_factory=dict)

    def __post_init__(self):
        self.validate()

    # --- derived -----------------------------------------------------------

    @property
    def calibration_seeds(self) -> range:
        return range(self.calibration_seed_start, self.calibration_seed_start + self.n_cal)

    @property
    def evaluation_seeds(self) -> range:
        return range(self.evaluation_seed_start, self.evaluation_seed_start + self.n_eval)

    @property
    def pdm_calibration_seeds(self) -> range:
        return range(self.pdm_calibration_seed_start, self.pdm_calibration_seed_start + self.pdm_n_cal)

    @property
    def pdm_evaluation_seeds(self) -> range:
        return range(self.pdm_evaluation_seed_start, self.pdm_evaluation_seed_start + self.pdm_n_eval)

    def validate(self) -> None:
        for d in self.domains:
            if d not in geo.SYNTHETIC_DOMAINS:
                raise ConfigError(f"unknown synthetic domain {d!r}")
        if len(set(self.domains)) != len(self.domains):
            raise ConfigError("duplicate domain")
        if self.horizon < 2:
            raise ConfigError("horizon must be at least 2")
        grid = tuple(self.budget_grid)
        if not grid or any(not 0.0 <= f <= 1.0 for f in grid) or list(grid) != sorted(set(grid)):
            raise ConfigError("budget grid must be strictly increasing fractions in [0, 1]")
        if min(self.n_cal, self.n_eval, self.pdm_n_cal, self.pdm_n_eval) < 1:
            raise ConfigError("seed counts must be positive")
        if min(self.calibration_seed_start, self.evaluation_seed_start,
               self.pdm_calibration_seed_start, self.pdm_evaluation_seed_start) < 0:
            raise ConfigError("seeds must be nonnegative")
        for a, b, what in ((self.calibration_seeds, self.evaluation_seeds, "synthetic"),
                           (self.pdm_calibration_seeds, self.pdm_evaluation_seeds, "pdm-lite")):
            if a.start < b.stop and b.start < a.stop:
                raise ConfigError(f"{what} calibration and evaluation seed ranges overlap")
        if not 0 < self.q <= 1:
            raise ConfigError("q must lie in (0, 1]")
        if not self.eps > 0:
            raise ConfigError("eps must be positive")
        if not any(math.isclose(f, self.summary_fraction) for f in grid):
            raise ConfigError("summary_fraction must be on the budget grid")
        for s in self.pdm_scene_seeds:
            if s not in self.pdm_evaluation_seeds:
                raise ConfigError("pdm scene seeds must be evaluation seeds")
        for dom, over in self.overrides.items():
            if dom not in geo.DOMAINS:
                raise ConfigError(f"unknown domain section [{dom}]")
            bad = set(over) - allowed_domain_keys(dom)
            if bad:
                raise ConfigError(f"unknown key(s) in [{dom}]: {', '.join(sorted(bad))}")
        # build every domain once so bad values fail at load time
        for dom in (*self.domains, "pdm-lite"):
            try:
                self.domain_setup(dom)
            except ConfigError:
                raise
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"[{dom}]: {exc}") from exc

    # --- construction -----------------------------------------------------

    def domain_settings(self, domain: str) -> dict:
        out = dict(DEFAULT_OVERRIDES[domain])
        out.update(self.overrides.get(domain, {}))
        return out

    def domain_setup(self, domain: str) -> DomainSetup:
        kv = self.domain_settings(domain)
        dyn = {k: kv.pop(k) for k in list(kv) if k in _DYN_KEYS}
        spec_kw = {k: kv.pop(k) for k in list(kv) if k in _SPEC_KEYS}
        for k, n in _VECTOR_KEYS.items():
            if k in spec_kw:
                spec_kw[k] = tuple(float(v) for v in spec_kw[k])
                if len(spec_kw[k]) != n:
                    raise ConfigError(f"[{domain}] {k} needs {n} values")
        if domain == "pdm-lite":
            obs = kv.pop("obstacles")
            anneal = AnnealSchedule.geometric(
                levels=int(kv.pop("levels")),
                inner_steps=int(kv.pop("inner_steps")),
                sigma_max=float(kv.pop("sigma_max")),
                sigma_min=float(kv.pop("sigma_min")),
                step_size=float(kv.pop("anneal_step")),
            )
            energy = TrajectoryEnergy(float(kv.pop("smoothness")), float(kv.pop("obstacle_stiffness")))
            obs_kw = {"centers": tuple((float(o[0]), float(o[1])) for o in obs),
                      "radii": tuple(float(o[2]) for o in obs)}
            if "margin" in kv:
                obs_kw["margin"] = float(kv.pop("margin"))
            if "corridor" in kv:
                obs_kw["corridor"] = tuple(float(v) for v in kv.pop("corridor"))
            spec = geo.DomainSpec(domain, obstacles=ObstacleSet(**obs_kw), **spec_kw)
            params = DynamicsParams(horizon=anneal.horizon, anneal=anneal, energy=energy,
                                    impulse_start=0, impulse_end=0, **dyn)
        else:
            fld = geo.HeightField(**{k: float(kv.pop(k)) for k in list(kv) if k in _FIELD_KEYS})
            spec = geo.DomainSpec(domain, field=fld, **spec_kw)
            # default burst: width 0.05 T starting at 0.4 T
            dyn.setdefault("impulse_start", round(0.4 * self.horizon))
            dyn.setdefault("impulse_end", dyn["impulse_start"] + max(1, round(0.05 * self.horizon)))
            params = DynamicsParams(horizon=self.horizon, **dyn)
        if kv:
            raise ConfigError(f"unused key(s) in [{domain}]: {', '.join(sorted(kv))}")
        return DomainSetup(spec, params)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["resolved"] = {dom: self.domain_settings(dom) for dom in (*self.domains, "pdm-lite")}
        return d

    def digest(self) -> str:
        """Stable hash of the resolved configuration."""
        blob = json.dumps(self.to_dict(), sort_keys=True, default=list)
        return hashlib.sha256(blob.encode()).hexdigest()


# --- INI parsing -------------------------------------------------------------


def _parse_bool(key, text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {text!r}")


def _parse_grid(text: str) -> tuple[float, ...]:
    """``start:stop:step`` (inclusive) or a comma-separated list."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError("budget_grid range must be start:stop:step")
        start, stop, step = (float(p) for p in parts)
        if not step > 0:
            raise ConfigError("budget_grid step must be positive")
        n = round((stop - start) / step)
        if not math.isclose(start + n * step, stop, abs_tol=1e-9):
            raise ConfigError("budget_grid stop is not reachable from start by step")
        return tuple(round(start + k * step, 10) for k in range(n + 1))
    return tuple(float(v) for v in text.split(","))


def _parse_seed_range(key: str, text: str) -> tuple[int, int]:
    """``a-b`` inclusive, returned as (start, count)."""
    try:
        a, b = (int(v) for v in text.strip().split("-"))
    except ValueError as exc:
        raise ConfigError(f"{key}: expected 'first-last', got {text!r}") from exc
    if b < a:
        raise ConfigError(f"{key}: empty seed range")
    return a, b - a + 1


def _parse_domain_value(domain: str, key: str, text: str):
    try:
        if key == "obstacles":
            # x,y,r; x,y,r; ...
            obs = []
            for item in text.split(";"):
                vals = tuple(float(v) for v in item.split(","))
                if len(vals) != 3:
                    raise ConfigError(f"[{domain}] obstacles: each entry needs x,y,r")
                obs.append(vals)
            return tuple(obs)
        if key in _VECTOR_KEYS:
            return tuple(float(v) for v in text.split(","))
        if key in _INT_KEYS:
            return int(text)
        return float(text)
    except ValueError as exc:
        raise ConfigError(f"[{domain}] {key}: {exc}") from exc


_EXPERIMENT_KEYS = {
    "domains", "horizon", "budget_grid", "calibration_seeds", "evaluation_seeds", "q", "eps",
    "summary_fraction", "compact_traces", "write_traces", "pdm_calibration_seeds",
    "pdm_evaluation_seeds", "pdm_scene_seeds",
}


def parse_ini(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";;"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    kw: dict = {}
    overrides: dict = {}
    for section in cp.sections():
        items = dict(cp.items(section))
        if section == "experiment":
            bad = set(items) - _EXPERIMENT_KEYS
            if bad:
                raise ConfigError(f"unknown key(s) in [experiment]: {', '.join(sorted(bad))}")
            try:
                for k, v in items.items():
                    if k == "domains":
                        kw[k] = tuple(d.strip() for d in v.split(",") if d.strip())
                    elif k == "budget_grid":
                        kw[k] = _parse_grid(v)
                    elif k in ("horizon",):
                        kw[k] = int(v)
                    elif k in ("q", "eps", "summary_fraction"):
                        kw[k] = float(v)
                    elif k in ("compact_traces", "write_traces"):
                        kw[k] = _parse_bool(k, v)
                    elif k == "pdm_scene_seeds":
                        kw[k] = tuple(int(s) for s in v.split(","))
                    else:
                        start, count = _parse_seed_range(k, v)
                        prefix = "pdm_" if k.startswith("pdm_") else ""
                        stem = "calibration" if "calibration" in k else "evaluation"
                        kw[f"{prefix}{stem}_seed_start"] = start
                        kw[f"{prefix}n_{'cal' if stem == 'calibration' else 'eval'}"] = count
            except ValueError as exc:
                if isinstance(exc, ConfigError):
                    raise
                raise ConfigError(f"[experiment]: {exc}") from exc
        elif section in geo.DOMAINS:
            bad = set(items) - allowed_domain_keys(section)
            if bad:
                raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(sorted(bad))}")
            overrides[section] = {k: _parse_domain_value(section, k, v) for k, v in items.items()}
        else:
            raise ConfigError(f"unknown section [{section}]")
    kw["overrides"] = overrides
    if "pdm_scene_seeds" not in kw and "pdm_evaluation_seed_start" in kw:
        kw["pdm_scene_seeds"] = (kw["pdm_evaluation_seed_start"],)
    try:
        return ExperimentConfig(**kw)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    return parse_ini(p.read_text())
