"""Initial conditions, background density profiles and the built-in presets.

Analytic fields can also be given as strings in a small arithmetic grammar::

    numbers, x, y, pi, e
    + - * / ^ (power), unary minus, parentheses
    sin cos tan exp ln log sqrt abs

Example: ``"1e-5*sin(3*y) + 2e-6*cos(x)^2"``.
"""
from __future__ import annotations

import ast
import math
from dataclasses import dataclass, fields

import numpy as np

from .assembly import AnalyticGradient, ConstantGradient

_FUNCS = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp,
    "ln": np.log, "log": np.log, "sqrt": np.sqrt, "abs": np.abs,
}
_CONSTS = {"pi": math.pi, "e": math.e}
_BINOPS = {ast.Add: np.add, ast.Sub: np.subtract, ast.Mult: np.multiply,
           ast.Div: np.divide, ast.Pow: np.power}


class ExpressionError(ValueError):
    pass


class Expression:
    """Compiled analytic field f(x, y) from the restricted grammar."""

    def __init__(self, text: str):
        self.text = str(text).strip()
        if not self.text:
            raise ExpressionError("empty expression")
        try:
            tree = ast.parse(self.text.replace("^", "**"), mode="eval")
        except SyntaxError as exc:
            raise ExpressionError(f"cannot parse {self.text!r}: {exc.msg}") from None
        self._body = tree.body
        self._check(self._body)

    def _check(self, node):
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            self._check(node.left)
            self._check(node.right)
        elif isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            self._check(node.operand)
        elif isinstance(node, ast.Call):
            if not (isinstance(node.func, ast.Name) and node.func.id in _FUNCS):
                raise ExpressionError(f"unknown function in {self.text!r}")
            if len(node.args) != 1 or node.keywords:
                raise ExpressionError(f"functions take exactly one argument in {self.text!r}")
            self._check(node.args[0])
        elif isinstance(node, ast.Name):
            if node.id not in ("x", "y") and node.id not in _CONSTS:
                raise ExpressionError(f"unknown name {node.id!r} in {self.text!r}")
        elif isinstance(node, ast.Constant):
            if not isinstance(node.value, (int, float)) or isinstance(node.value, bool):
                raise ExpressionError(f"unsupported literal in {self.text!r}")
        else:
            raise ExpressionError(f"unsupported syntax {type(node).__name__} in {self.text!r}")

    def _eval(self, node, x, y):
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](self._eval(node.left, x, y), self._eval(node.right, x, y))
        if isinstance(node, ast.UnaryOp):
            v = self._eval(node.operand, x, y)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.Call):
            return _FUNCS[node.func.id](self._eval(node.args[0], x, y))
        if isinstance(node, ast.Name):
            return {"x": x, "y": y}.get(node.id, _CONSTS.get(node.id))
        return float(node.value)

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        with np.errstate(all="ignore"):
            out = self._eval(self._body, x, y)
        return np.broadcast_to(np.asarray(out, dtype=float), np.broadcast(x, y).shape).copy()

    def __repr__(self):
        return f"Expression({self.text!r})"


# ---------------------------------------------------------------------------
# initial conditions

@dataclass(frozen=True)
class SinY:
    amplitude: float = 1e-5
    wavenumber: float = 3.0
    kind = "sin_y"

    def __call__(self, x, y):
        return self.amplitude * np.sin(self.wavenumber * np.asarray(y, float)) + 0 * np.asarray(x, float)


@dataclass(frozen=True)
class SinX:
    amplitude: float = 1e-5
    wavenumber: float = 3.0
    kind = "sin_x"

    def __call__(self, x, y):
        return self.amplitude * np.sin(self.wavenumber * np.asarray(x, float)) + 0 * np.asarray(y, float)


@dataclass(frozen=True)
class PolyDemo:
    """amplitude * x*y*(x-2)*sin(x)."""

    amplitude: float = 1e-10
    kind = "poly_demo"

    def __call__(self, x, y):
        x = np.asarray(x, float)
        return self.amplitude * x * np.asarray(y, float) * (x - 2.0) * np.sin(x)


@dataclass(frozen=True)
class GaussDeriv:
    """-amplitude * (x-cx) * exp(-((x-cx)^2 + (y-cy)^2) / (2 width^2))."""

    amplitude: float = 1e-5
    center_x: float = 10.0
    center_y: float = 10.0
    width: float = 1.0
    kind = "gauss_deriv"

    def __call__(self, x, y):
        dx = np.asarray(x, float) - self.center_x
        dy = np.asarray(y, float) - self.center_y
        return -self.amplitude * dx * np.exp(-(dx ** 2 + dy ** 2) / (2.0 * self.width ** 2))


@dataclass(frozen=True)
class ExpressionIC:
    expr: str
    kind = "expression"

    def __post_init__(self):
        Expression(self.expr)

    def __call__(self, x, y):
        return Expression(self.expr)(x, y)


INITIAL_CONDITIONS = {c.kind: c for c in (SinY, SinX, PolyDemo, GaussDeriv, ExpressionIC)}


# ---------------------------------------------------------------------------
# density profiles; p = ln(n0 / omega_ci)

@dataclass(frozen=True)
class Exponential:
    """n0/omega_ci = exp(A x + B), so p_x = A and p_y = 0."""

    A: float = 12.0
    B: float = 0.0
    kind = "exponential"

    def gradient(self, x, y):
        x = np.asarray(x, float)
        return np.full(np.broadcast(x, y).shape, float(self.A)), np.zeros(np.broadcast(x, y).shape)

    def p_field(self):
        return ConstantGradient(float(self.A))


@dataclass(frozen=True)
class Gaussian:
    """n0 = amplitude * exp(-((x-cx)^2 + (y-cy)^2) / width), divided by omega_ci."""

    n0: float = 1e20
    center_x: float = 10.0
    center_y: float = 10.0
    width: float = 64.0
    omega_ci: float = 1e7
    kind = "gaussian"

    def gradient(self, x, y):
        gx = -2.0 * (np.asarray(x, float) - self.center_x) / self.width
        gy = -2.0 * (np.asarray(y, float) - self.center_y) / self.width
        shape = np.broadcast(gx, gy).shape
        return np.broadcast_to(gx, shape).copy(), np.broadcast_to(gy, shape).copy()

    def p_field(self):
        return AnalyticGradient(lambda x, y: self.gradient(x, y)[0],
                                lambda x, y: self.gradient(x, y)[1])


@dataclass(frozen=True)
class ExpressionProfile:
    """User-supplied p_x and p_y expressions."""

    px: str = "0"
    py: str = "0"
    kind = "expression"

    def __post_init__(self):
        Expression(self.px)
        Expression(self.py)

    def gradient(self, x, y):
        return Expression(self.px)(x, y), Expression(self.py)(x, y)

    def p_field(self):
        fx, fy = Expression(self.px), Expression(self.py)
        return AnalyticGradient(fx, fy)


PROFILES = {c.kind: c for c in (Exponential, Gaussian, ExpressionProfile)}


def evaluate_p_gradient(profile, x, y):
    """(p_x, p_y) of a density profile at the given points."""
    return profile.gradient(x, y)


def to_params(obj) -> dict:
    """Flat parameter dict (``kind`` plus dataclass fields)."""
    return {"kind": obj.kind, **{f.name: getattr(obj, f.name) for f in fields(obj)}}


def _from_params(table: dict, params: dict, what: str):
    params = dict(params)
    kind = params.pop("kind", None)
    if kind not in table:
        raise ValueError(f"{what}.kind: expected one of {sorted(table)}, got {kind!r}")
    cls = table[kind]
    names = {f.name: f.type for f in fields(cls)}
    unknown = set(params) - set(names)
    if unknown:
        raise ValueError(f"{what}: unknown keys {sorted(unknown)} for kind {kind!r}")
    args = {}
    for k, v in params.items():
        if names[k] in ("str", str):
            args[k] = str(v)
        else:
            try:
                args[k] = float(v)
            except (TypeError, ValueError):
                raise ValueError(f"{what}.{k}: expected a number, got {v!r}") from None
    return cls(**args)


def initial_from_params(params: dict):
    return _from_params(INITIAL_CONDITIONS, params, "initial")


def profile_from_params(params: dict):
    return _from_params(PROFILES, params, "profile")


# ---------------------------------------------------------------------------
# presets

@dataclass(frozen=True)
class Preset:
    name: str
    description: str
    n: int
    x0: float
    y0: float
    L: float
    initial: object
    profile: object
    tau: float = 0.1
    T: float = 100.0
    u_max: float = 0.3
    snapshot_every: int = 10


PRESETS = {
    p.name: p for p in [
        Preset("case1", "sin(10 pi y) on the unit square, exponential profile A=12",
               65, 0.0, 0.0, 1.0, SinY(1e-5, 10 * math.pi), Exponential(12.0),
               T=300.0, snapshot_every=50),
        Preset("case2", "sin(3y) on [0,pi]^2, 33x33 grid, exponential profile A=12",
               33, 0.0, 0.0, math.pi, SinY(1e-5, 3.0), Exponential(12.0), T=20.0),
        Preset("case2_fine", "sin(3y) on [0,pi]^2, 65x65 grid, exponential profile A=12",
               65, 0.0, 0.0, math.pi, SinY(1e-5, 3.0), Exponential(12.0), T=20.0),
        Preset("case3", "sin(3x) on [0,pi]^2, 33x33 grid, exponential profile A=12",
               33, 0.0, 0.0, math.pi, SinX(1e-5, 3.0), Exponential(12.0), T=100.0),
        Preset("poly_demo", "1e-10 x y (x-2) sin(x) on [0,pi]^2, exponential profile A=12",
               33, 0.0, 0.0, math.pi, PolyDemo(1e-10), Exponential(12.0), T=100.0),
        Preset("gaussian", "Gaussian-derivative blob rotating in a Gaussian density on [0,20]^2",
               65, 0.0, 0.0, 20.0, GaussDeriv(1e-5, 10.0, 10.0, 1.0), Gaussian(),
               T=50.0),
    ]
}
PRESETS["case4"] = PRESETS["poly_demo"]


def preset(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}") from None


def list_presets() -> list[str]:
    return sorted(PRESETS)
