"""Run configurations for the command-line front end.

Each subcommand reads one JSON object.  Every key is validated before any
computation and unknown keys are rejected.  Model and distribution entries
use the formats of :func:`liouville.models.model_from_config` and
:meth:`liouville.rand_inputs.XiDistribution.from_config`.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, LiouvilleError
from .models import FhhsModel, model_from_config
from .rand_inputs import XiDistribution

THREADS_ENV = "LIOUVILLE_THREADS"


def default_threads():
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from exc
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be >= 1")
    return n


def _number(name, value, lo=None, hi=None, strict_lo=False, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name} must be a number")
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(f"{name} must be finite")
    if lo is not None and (value < lo or (strict_lo and value == lo)):
        raise ConfigError(f"{name} must be {'>' if strict_lo else '>='} {lo}")
    if hi is not None and value > hi:
        raise ConfigError(f"{name} must be <= {hi}")
    if integer:
        if value != int(value):
            raise ConfigError(f"{name} must be an integer")
        return int(value)
    return value


def _times(name, value, lo=0.0, strict=False):
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{name} must be a non-empty list of numbers")
    return [_number(f"{name}[{i}]", v, lo, strict_lo=strict) for i, v in enumerate(value)]


def _choice(name, value, options):
    if value not in options:
        raise ConfigError(f"{name} must be one of {sorted(options)}")
    return value


def _model(value):
    try:
        return model_from_config(value)
    except LiouvilleError as exc:
        raise ConfigError(f"model: {exc}") from exc
    except (TypeError, KeyError, AttributeError) as exc:
        raise ConfigError(f"model: malformed entry ({exc})") from exc


def _dist(value, name="distribution"):
    try:
        return XiDistribution.from_config(value)
    except LiouvilleError as exc:
        raise ConfigError(f"{name}: {exc}") from exc
    except (TypeError, KeyError, AttributeError) as exc:
        raise ConfigError(f"{name}: malformed entry ({exc})") from exc


def _time_axis(raw):
    """``times`` list, or ``{"t_start", "t_end", "n", "spacing"}``."""
    if isinstance(raw, list):
        return np.array(sorted(_times("times", raw)))
    if not isinstance(raw, dict):
        raise ConfigError("times must be a list or an axis object")
    allowed = {"t_start", "t_end", "n", "spacing"}
    extra = set(raw) - allowed
    if extra:
        raise ConfigError(f"times: unknown keys {sorted(extra)}")
    t1 = _number("times.t_end", raw.get("t_end"), 0.0, strict_lo=True)
    n = _number("times.n", raw.get("n", 50), 1, integer=True)
    spacing = _choice("times.spacing", raw.get("spacing", "log"), {"log", "linear"})
    t0 = _number("times.t_start", raw.get("t_start", t1 / 1000.0), 0.0)
    if t0 >= t1 or (spacing == "log" and t0 <= 0):
        raise ConfigError("times: need 0 < t_start < t_end (t_start >= 0 for linear)")
    return np.geomspace(t0, t1, n) if spacing == "log" else np.linspace(t0, t1, n)


@dataclass
class BaseConfig:
    out_dir: str = "out"
    seed: int = 0
    threads: int = 1

    KEYS = ()

    @classmethod
    def parse(cls, raw, overrides=None):
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        allowed = {"out_dir", "seed", "threads"} | set(cls.KEYS)
        extra = set(raw) - allowed
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        raw = dict(raw)
        for key, val in (overrides or {}).items():
            if val is not None:
                raw[key] = val
        obj = cls._build(raw)
        obj.out_dir = str(raw.get("out_dir", "out"))
        obj.seed = _number("seed", raw.get("seed", 0), 0, integer=True)
        obj.threads = _number("threads", raw.get("threads", default_threads()), 1, integer=True)
        return obj

    @classmethod
    def _build(cls, raw):
        raise NotImplementedError

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}


def _dists(raw, model=None):
    if "distributions" in raw and "distribution" in raw:
        raise ConfigError("give either 'distribution' or 'distributions'")
    if "distributions" in raw:
        items = raw["distributions"]
        if not isinstance(items, list) or not items:
            raise ConfigError("distributions must be a non-empty list")
        return [_dist(d, f"distributions[{i}]") for i, d in enumerate(items)]
    if "distribution" in raw:
        return [_dist(raw["distribution"])]
    return [XiDistribution.normal()]


@dataclass
class PdfConfig(BaseConfig):
    model: object = None
    distributions: list = field(default_factory=list)
    times: list = field(default_factory=list)
    points: int = 1001

    KEYS = ("model", "distribution", "distributions", "times", "points")

    @classmethod
    def _build(cls, raw):
        if "model" not in raw or "times" not in raw:
            raise ConfigError("pdf config needs 'model' and 'times'")
        model = _model(raw["model"])
        return cls(model=model, distributions=_dists(raw), times=_times("times", raw["times"], 0.0, True),
                   points=_number("points", raw.get("points", 1001), 3, integer=True))


@dataclass
class McConfig(BaseConfig):
    model: object = None
    distribution: object = None
    times: list = field(default_factory=list)
    n: int = 100000
    dt: float = 1e-3
    bins: object = None
    liouville: bool = True
    langevin: bool = True
    exact: object = None
    dump_paths: bool = False
    diffusion_rule: str = "midpoint"

    KEYS = ("model", "distribution", "times", "n", "dt", "bins", "liouville", "langevin",
            "exact", "dump_paths", "diffusion_rule")

    @classmethod
    def _build(cls, raw):
        if "model" not in raw or "times" not in raw:
            raise ConfigError("mc config needs 'model' and 'times'")
        model = _model(raw["model"])
        dist = _dist(raw["distribution"]) if "distribution" in raw else None
        if dist is None and getattr(model, "kind", "") != "forcing":
            dist = XiDistribution.normal()
        bins = raw.get("bins")
        if bins is not None:
            bins = _number("bins", bins, 1, integer=True)
        flags = {}
        for key in ("liouville", "langevin", "dump_paths"):
            val = raw.get(key, cls.__dataclass_fields__[key].default)
            if not isinstance(val, bool):
                raise ConfigError(f"{key} must be true or false")
            flags[key] = val
        exact = raw.get("exact")
        if exact is not None and not isinstance(exact, bool):
            raise ConfigError("exact must be true, false or null")
        return cls(model=model, distribution=dist, times=_times("times", raw["times"], 0.0, True),
                   n=_number("n", raw.get("n", 100000), 100, integer=True),
                   dt=_number("dt", raw.get("dt", 1e-3), 0.0, strict_lo=True), bins=bins,
                   exact=exact,
                   diffusion_rule=_choice("diffusion_rule", raw.get("diffusion_rule", "midpoint"),
                                          ("midpoint", "step_average")),
                   **flags)


@dataclass
class FpConfig(BaseConfig):
    model: object = None
    times: list = field(default_factory=list)
    n: int = 2001
    dt: float = 1e-3
    t0: object = None
    domain: object = None

    KEYS = ("model", "times", "n", "dt", "t0", "domain")

    @classmethod
    def _build(cls, raw):
        if "model" not in raw or "times" not in raw:
            raise ConfigError("fp config needs 'model' and 'times'")
        model = _model(raw["model"])
        if getattr(model, "kind", "") not in ("position", "velocity", "fhhs"):
            raise ConfigError("fp supports the position, velocity and fhhs models")
        domain = raw.get("domain")
        if domain is not None:
            if not (isinstance(domain, list) and len(domain) == 2):
                raise ConfigError("domain must be [lo, hi]")
            domain = (_number("domain[0]", domain[0]), _number("domain[1]", domain[1]))
            if domain[1] <= domain[0]:
                raise ConfigError("domain must satisfy lo < hi")
        t0 = raw.get("t0")
        if t0 is not None:
            t0 = _number("t0", t0, 0.0, strict_lo=True)
        times = _times("times", raw["times"], 0.0, True)
        return cls(model=model, times=times, n=_number("n", raw.get("n", 2001), 3, integer=True),
                   dt=_number("dt", raw.get("dt", 1e-3), 0.0, strict_lo=True), t0=t0,
                   domain=domain)


@dataclass
class MomentsConfig(BaseConfig):
    model: object = None
    distribution: object = None
    times: object = None
    init: str = "deterministic"
    dt: float = 1e-3

    KEYS = ("model", "distribution", "times", "init", "dt")

    @classmethod
    def _build(cls, raw):
        if "model" not in raw or "times" not in raw:
            raise ConfigError("moments config needs 'model' and 'times'")
        model = _model(raw["model"])
        if getattr(model, "kind", "") not in ("position", "velocity", "fhhs"):
            raise ConfigError("moments supports the position, velocity and fhhs models")
        dist = _dist(raw["distribution"]) if "distribution" in raw else None
        return cls(model=model, distribution=dist, times=_time_axis(raw["times"]),
                   init=_choice("init", raw.get("init", "deterministic"),
                                {"deterministic", "maxwellian"}),
                   dt=_number("dt", raw.get("dt", 1e-3), 0.0, strict_lo=True))


@dataclass
class FhhsConfig(BaseConfig):
    model: object = None
    times: object = None
    re_t_scale: float = 1.0
    n_temperatures: int = 101

    KEYS = ("model", "Re_m", "times", "re_t_scale", "n_temperatures")

    @classmethod
    def _build(cls, raw):
        from .fhhs import model_for_re

        if ("model" in raw) == ("Re_m" in raw):
            raise ConfigError("fhhs config needs exactly one of 'model' or 'Re_m'")
        if "model" in raw:
            model = _model(raw["model"])
            if not isinstance(model, FhhsModel):
                raise ConfigError("fhhs command needs an fhhs model")
        else:
            model = model_for_re(_number("Re_m", raw["Re_m"], 0.0, strict_lo=True))
        times = _time_axis(raw["times"]) if "times" in raw else \
            np.linspace(0.0, 10 * model.tau_p, 201)
        return cls(model=model, times=times,
                   re_t_scale=_number("re_t_scale", raw.get("re_t_scale", 1.0), 0.0, strict_lo=True),
                   n_temperatures=_number("n_temperatures", raw.get("n_temperatures", 101), 2,
                                          integer=True))


@dataclass
class FitConfig(BaseConfig):
    data: list = field(default_factory=list)
    synthetic: object = None
    C2: float = 1.2
    tau_p: float = 0.14
    refine_c2: bool = False
    base_dir: str = "."

    KEYS = ("data", "synthetic", "C2", "tau_p", "refine_c2")

    @classmethod
    def _build(cls, raw):
        if ("data" in raw) == ("synthetic" in raw):
            raise ConfigError("fit config needs exactly one of 'data' or 'synthetic'")
        data, synthetic = [], None
        if "data" in raw:
            if not isinstance(raw["data"], list) or not raw["data"]:
                raise ConfigError("data must be a non-empty list")
            for i, item in enumerate(raw["data"]):
                if not isinstance(item, dict) or set(item) - {"Re_m", "path"} or "path" not in item:
                    raise ConfigError(f"data[{i}] needs 'path' and optional 'Re_m'")
                re_m = item.get("Re_m")
                if re_m is not None:
                    re_m = _number(f"data[{i}].Re_m", re_m, 0.0, strict_lo=True)
                data.append({"Re_m": re_m, "path": str(item["path"])})
        else:
            syn = raw["synthetic"]
            if not isinstance(syn, dict) or set(syn) - {"Re_m", "noise", "n"}:
                raise ConfigError("synthetic accepts keys Re_m, noise, n")
            synthetic = {
                "Re_m": _times("synthetic.Re_m", syn.get("Re_m", [20]), 0.0, True),
                "noise": _number("synthetic.noise", syn.get("noise", 0.0), 0.0),
                "n": _number("synthetic.n", syn.get("n", 200), 10, integer=True),
            }
        refine = raw.get("refine_c2", False)
        if not isinstance(refine, bool):
            raise ConfigError("refine_c2 must be true or false")
        return cls(data=data, synthetic=synthetic,
                   C2=_number("C2", raw.get("C2", 1.2), 1.0),
                   tau_p=_number("tau_p", raw.get("tau_p", 0.14), 0.0, strict_lo=True),
                   refine_c2=refine)


CONFIGS = {
    "pdf": PdfConfig,
    "mc": McConfig,
    "fp": FpConfig,
    "moments": MomentsConfig,
    "fhhs": FhhsConfig,
    "fit": FitConfig,
}


def load_config(command, path, overrides=None):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    cfg = CONFIGS[command].parse(raw, overrides)
    if isinstance(cfg, FitConfig):
        cfg.base_dir = os.path.dirname(os.path.abspath(path))
    return cfg
