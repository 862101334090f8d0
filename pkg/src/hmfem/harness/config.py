"""Run configuration: flat ``section.key = value`` text with CLI overrides.

A config file may use dotted keys directly::

    mesh.n = 33
    scheme.tau = 0.1

or ordinary ``[section]`` headers; both forms can be mixed.  Lines starting
with ``#`` or ``;`` are comments.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, replace

from ..problems import (Exponential, SinY, initial_from_params, profile_from_params,
                        to_params)
from ..stepper import SchemeConfig

SECTIONS = ("mesh", "initial", "profile", "scheme", "solver", "run")
_ROOT = "__root__"


class ConfigError(ValueError):
    """Validation failure; ``errors`` lists one message per offending field."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.errors))


@dataclass
class RunConfig:
    n: int = 33
    x0: float = 0.0
    y0: float = 0.0
    L: float = math.pi
    initial: object = field(default_factory=SinY)
    profile: object = field(default_factory=Exponential)
    scheme: str = "semilinear"
    tau: float = 0.1
    fp_tol: float = 1e-10
    fp_maxit: int = 50
    stability_mode: str = "warn"
    contraction_safety: float = 1.0
    solver_tol: float = 1e-10
    solver_maxit: int = 0  # 0 means 10 * number of unknowns
    T: float = 20.0
    u_max: float = 0.3
    snapshot_every: int = 10
    output_dir: str = "output"

    def scheme_config(self) -> SchemeConfig:
        return SchemeConfig(self.scheme, self.tau, self.fp_tol, self.fp_maxit,
                            self.stability_mode, self.contraction_safety)

    def validate(self) -> "RunConfig":
        errs = []
        if not (isinstance(self.n, int) and self.n >= 3):
            errs.append(f"mesh.n: must be an integer >= 3, got {self.n!r}")
        if not self.L > 0:
            errs.append(f"mesh.L: must be positive, got {self.L!r}")
        try:
            self.scheme_config()
        except ValueError as exc:
            errs += [f"scheme.{m.strip()}" for m in str(exc).split(";")]
        if not self.solver_tol > 0:
            errs.append(f"solver.tol: must be positive, got {self.solver_tol!r}")
        if not (isinstance(self.solver_maxit, int) and self.solver_maxit >= 0):
            errs.append(f"solver.maxit: must be a non-negative integer, got {self.solver_maxit!r}")
        if not (self.T >= 0 and math.isfinite(self.T)):
            errs.append(f"run.T: must be a non-negative finite number, got {self.T!r}")
        if not self.u_max > 0:
            errs.append(f"run.u_max: must be positive, got {self.u_max!r}")
        if not (isinstance(self.snapshot_every, int) and self.snapshot_every >= 0):
            errs.append(f"run.snapshot_every: must be a non-negative integer, got {self.snapshot_every!r}")
        if errs:
            raise ConfigError(errs)
        return self

    @classmethod
    def from_preset(cls, p) -> "RunConfig":
        return cls(n=p.n, x0=p.x0, y0=p.y0, L=p.L, initial=p.initial, profile=p.profile,
                   tau=p.tau, T=p.T, u_max=p.u_max, snapshot_every=p.snapshot_every,
                   output_dir=f"output/{p.name}")

    # flat key mapping ------------------------------------------------------
    def to_flat(self) -> dict:
        flat = {f"mesh.{k}": getattr(self, k) for k in ("n", "x0", "y0", "L")}
        flat.update({f"initial.{k}": v for k, v in to_params(self.initial).items()})
        flat.update({f"profile.{k}": v for k, v in to_params(self.profile).items()})
        for k in ("scheme", "tau", "fp_tol", "fp_maxit", "stability_mode", "contraction_safety"):
            flat["scheme.name" if k == "scheme" else f"scheme.{k}"] = getattr(self, k)
        flat["solver.tol"] = self.solver_tol
        flat["solver.maxit"] = self.solver_maxit
        for k in ("T", "u_max", "snapshot_every", "output_dir"):
            flat[f"run.{k}"] = getattr(self, k)
        return flat

    @classmethod
    def from_flat(cls, flat: dict, base: "RunConfig | None" = None) -> "RunConfig":
        """Apply ``section.key`` values (strings or numbers) on top of ``base``."""
        base = base or cls()
        current = base.to_flat()
        errs = []
        init = {k[8:]: v for k, v in current.items() if k.startswith("initial.")}
        prof = {k[8:]: v for k, v in current.items() if k.startswith("profile.")}
        kwargs = {}
        scalar = {
            "mesh.n": ("n", int), "mesh.x0": ("x0", float), "mesh.y0": ("y0", float),
            "mesh.L": ("L", float), "scheme.name": ("scheme", str), "scheme.tau": ("tau", float),
            "scheme.fp_tol": ("fp_tol", float), "scheme.fp_maxit": ("fp_maxit", int),
            "scheme.stability_mode": ("stability_mode", str),
            "scheme.contraction_safety": ("contraction_safety", float),
            "solver.tol": ("solver_tol", float), "solver.maxit": ("solver_maxit", int),
            "run.T": ("T", float), "run.u_max": ("u_max", float),
            "run.snapshot_every": ("snapshot_every", int), "run.output_dir": ("output_dir", str),
        }
        # a new kind discards the old kind's parameters, so apply kinds first
        ordered = sorted(flat.items(), key=lambda kv: not kv[0].endswith(".kind"))
        for key, value in ordered:
            if key.startswith("initial."):
                if key == "initial.kind" and value != init.get("kind"):
                    init = {}
                init[key[8:]] = value
            elif key.startswith("profile."):
                if key == "profile.kind" and value != prof.get("kind"):
                    prof = {}
                prof[key[8:]] = value
            elif key in scalar:
                name, typ = scalar[key]
                try:
                    kwargs[name] = _convert(value, typ)
                except (ValueError, OverflowError):
                    errs.append(f"{key}: expected {typ.__name__}, got {value!r}")
            else:
                errs.append(f"{key}: unknown setting")
        try:
            kwargs["initial"] = initial_from_params(init)
        except (ValueError, TypeError) as exc:
            errs.append(str(exc))
        try:
            kwargs["profile"] = profile_from_params(prof)
        except (ValueError, TypeError) as exc:
            errs.append(str(exc))
        kwargs.setdefault("initial", base.initial)
        kwargs.setdefault("profile", base.profile)
        cfg = replace(base, **kwargs)
        try:
            cfg.validate()
        except ConfigError as exc:
            errs += exc.errors
        if errs:
            raise ConfigError(errs)
        return cfg


def _convert(value, typ):
    if typ is int:
        f = float(value)
        if f != int(f):
            raise ValueError(value)
        return int(f)
    if typ is float:
        return float(value)
    return str(value)


def parse_text(text: str) -> dict:
    """Flat ``section.key -> string`` mapping from config text."""
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",),
                                   comment_prefixes=("#", ";"), inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string(f"[{_ROOT}]\n" + text)
    except configparser.Error as exc:
        raise ConfigError([f"cannot parse config: {exc}"]) from None
    flat = {}
    for section in cp.sections():
        for key, value in cp.items(section):
            full = key if section == _ROOT else f"{section}.{key}"
            if "." not in full:
                raise ConfigError([f"{full}: settings need a section, e.g. mesh.{full}"])
            flat[full] = value.strip()
    return flat


def load_config(path, base: RunConfig | None = None) -> RunConfig:
    with open(path) as fh:
        return RunConfig.from_flat(parse_text(fh.read()), base)


def format_config(cfg: RunConfig) -> str:
    lines = []
    for key, value in cfg.to_flat().items():
        text = repr(value) if isinstance(value, float) else str(value)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"


def parse_overrides(items) -> dict:
    """``["mesh.n=17", ...]`` -> ``{"mesh.n": "17", ...}``."""
    out = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError([f"override {item!r}: expected section.key=value"])
        out[key.strip()] = value.strip()
    return out
