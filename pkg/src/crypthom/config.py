"""Run configuration files.

Flat ``key = value`` lines, grouped by dotted prefixes; ``#`` starts a comment.
Every key is optional; the defaults are the crypt model's reference values::

    geometry.a = 0.6204032394
    geometry.r = ...              # defaults to a/4 (R to a/2, L to 14a)
    reaction.tau_gamma = 0.01
    reaction.tau_beta1 = 0.01
    reaction.beta2 = 0.1
    reaction.D = 0.1
    discretization.h = 0.005
    discretization.dt = 0.005
    discretization.T = 0.05
    discretization.n_ref = 32
    discretization.output_times = 0.01, 0.03, 0.05
    discretization.tol = 1e-10
    experiment.eps = 0.8, 0.4, 0.05, 0.03224
    experiment.output_dir = results
    experiment.seed = 0
    experiment.offset = 0, 0

The default eps list ends at ``4h/a``, the smallest eps for which the grid
still resolves the inner circle (``h <= eps a / 4``).
"""
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, ParameterError
from .geometry import EDGE_UNIT_AREA, CoefficientField, CryptGeometry
from .sim import SimConfig


def _floats(text):
    return tuple(float(v) for v in text.replace(",", " ").split())


_KEYS = {
    "geometry.a": float, "geometry.r": float, "geometry.R": float, "geometry.L": float,
    "reaction.tau_gamma": float, "reaction.tau_beta1": float, "reaction.beta2": float,
    "reaction.D": float,
    "discretization.h": float, "discretization.dt": float, "discretization.T": float,
    "discretization.n_ref": int, "discretization.output_times": _floats,
    "discretization.tol": float,
    "experiment.eps": _floats, "experiment.output_dir": str, "experiment.seed": int,
    "experiment.offset": _floats,
}


@dataclass(frozen=True)
class RunConfig:
    geometry: CryptGeometry = field(default_factory=CryptGeometry)
    coeffs: CoefficientField = field(default_factory=CoefficientField)
    sim: SimConfig = field(default_factory=SimConfig)
    n_ref: int = 32
    eps_list: tuple = ()
    output_dir: Path = Path("results")
    seed: int = 0
    source: dict = field(default_factory=dict)   # key -> (value text, line)

    @classmethod
    def default(cls):
        return parse_config_text("")

    def sim_for(self, eps=None):
        return self.sim.with_(eps=eps)

    def echo(self):
        g, c, s = self.geometry, self.coeffs, self.sim
        return {
            "geometry.a": g.a, "geometry.r": g.r, "geometry.R": g.R, "geometry.L": g.L,
            "reaction.tau_gamma": c.tau_gamma, "reaction.tau_beta1": c.tau_beta1,
            "reaction.beta2": c.beta2, "reaction.D": c.D,
            "discretization.h": s.h, "discretization.dt": s.dt, "discretization.T": s.T,
            "discretization.n_ref": self.n_ref,
            "discretization.output_times": list(s.output_times), "discretization.tol": s.tol,
            "experiment.eps": list(self.eps_list), "experiment.output_dir": str(self.output_dir),
            "experiment.seed": self.seed, "experiment.offset": list(s.offset),
        }


def parse_config_text(text):
    vals, lines = {}, {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", line=lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"unknown key {key!r}", line=lineno)
        if key in vals:
            raise ConfigError(f"duplicate key {key!r} (first set on line {lines[key]})", line=lineno)
        try:
            vals[key] = _KEYS[key](value)
        except ValueError:
            raise ConfigError(f"bad value for {key}: {value!r}", line=lineno) from None
        lines[key] = lineno
    return _build(vals, lines)


def parse_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise ConfigError(f"configuration file {path} not found") from None
    return parse_config_text(text)


def _line_of(lines, *keys):
    found = [lines[k] for k in keys if k in lines]
    return max(found) if found else None


def _build(vals, lines):
    a = vals.get("geometry.a", EDGE_UNIT_AREA)
    try:
        geometry = CryptGeometry(a=a, r=vals.get("geometry.r", a / 4),
                                 R=vals.get("geometry.R", a / 2), L=vals.get("geometry.L", 14 * a))
        if abs(geometry.area - 1.0) > 1e-12:
            raise ParameterError(f"hexagon area {geometry.area:.12g} is not 1 (edge a = {a})")
    except ParameterError as exc:
        raise ConfigError(str(exc), line=_line_of(lines, *[k for k in _KEYS if k.startswith("geometry.")])) from None

    try:
        coeffs = CoefficientField(geometry=geometry,
                                  tau_gamma=vals.get("reaction.tau_gamma", 0.01),
                                  tau_beta1=vals.get("reaction.tau_beta1", 0.01),
                                  beta2=vals.get("reaction.beta2", 0.1),
                                  D=vals.get("reaction.D", 0.1))
        if min(coeffs.tau_gamma, coeffs.tau_beta1, coeffs.beta2) < 0:
            raise ParameterError("reaction rates must be non-negative")
        if coeffs.tau_beta1 < coeffs.tau_gamma:
            raise ParameterError("need tau_beta1 >= tau_gamma so that beta >= gamma")
    except ParameterError as exc:
        raise ConfigError(str(exc), line=_line_of(lines, *[k for k in _KEYS if k.startswith("reaction.")])) from None

    disc = {k: vals[f"discretization.{k}"] for k in ("h", "dt", "T", "output_times", "tol")
            if f"discretization.{k}" in vals}
    if "experiment.offset" in vals:
        if len(vals["experiment.offset"]) != 2:
            raise ConfigError("experiment.offset needs two numbers", line=lines["experiment.offset"])
        disc["offset"] = vals["experiment.offset"]

    n_ref = vals.get("discretization.n_ref", 32)
    if n_ref < 1:
        raise ConfigError("n_ref must be at least 1", line=lines.get("discretization.n_ref"))

    h = disc.get("h", SimConfig.h)
    if "experiment.eps" in vals:
        eps_list = vals["experiment.eps"]
    else:
        eps_list = (0.8, 0.4, 0.05, 4 * h / geometry.a)
    eps_line = lines.get("experiment.eps")
    if not eps_list:
        raise ConfigError("experiment.eps is empty", line=eps_line)
    if any(e <= 0 for e in eps_list):
        raise ConfigError("eps values must be positive", line=eps_line)
    if any(b >= a_ for a_, b in zip(eps_list, eps_list[1:])):
        raise ConfigError("experiment.eps must be sorted in descending order", line=eps_line)
    # the resolvability rule is checked before the grid itself so that the
    # message names the rule even when h is also not a divisor of 2
    for e in eps_list:
        bound = e * geometry.a / 4
        if h > bound * (1 + 1e-12):
            raise ConfigError(f"h = {h:g} violates the resolvability rule h <= eps*a/4 = {bound:.6g} "
                              f"for eps = {e:g}",
                              line=_line_of(lines, "discretization.h", "experiment.eps"))
    try:
        sim = SimConfig(**disc)
    except ConfigError as exc:
        raise ConfigError(str(exc), line=_line_of(lines, *[k for k in _KEYS if k.startswith("discretization.")])) from None

    return RunConfig(geometry=geometry, coeffs=coeffs, sim=sim, n_ref=n_ref,
                     eps_list=tuple(eps_list),
                     output_dir=Path(vals.get("experiment.output_dir", "results")),
                     seed=vals.get("experiment.seed", 0),
                     source={k: (vals[k], lines[k]) for k in vals})
