"""Registry of smooth scalar functions with analytic derivatives.

Each member knows its open domain; spectral operations refuse matrices
whose eigenvalues leave it.  ``smoothstep`` is a C-infinity plateau
function built from the standard exp(-1/x) mollifier, usable to isolate a
spectral cluster (value 1 on [a, b], 0 outside (a - delta, b + delta)).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError

__all__ = ["ScalarFunction", "get_function", "parse_function_spec", "REGISTRY"]

_INF = float("inf")


@dataclass(frozen=True)
class ScalarFunction:
    """A scalar function f with its analytic derivative and open domain."""

    name: str
    params: tuple
    eval: Callable[[np.ndarray], np.ndarray]
    deriv: Callable[[np.ndarray], np.ndarray]
    domain: tuple  # open interval (lo, hi)

    def __repr__(self):
        if self.params:
            return f"{self.name}({', '.join(map(str, self.params))})"
        return self.name


def _mollifier(t):
    """exp(-1/t) for t > 0, 0 otherwise; smooth on all of R."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    with np.errstate(divide="ignore", over="ignore"):
        out[pos] = np.exp(-1.0 / t[pos])
    return out


def _mollifier_deriv(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    with np.errstate(divide="ignore", over="ignore"):
        tp = t[pos]
        out[pos] = np.exp(-1.0 / tp) / tp**2
    return out


def _smooth_transition(t):
    """C-infinity monotone step: 0 for t <= 0, 1 for t >= 1."""
    u = _mollifier(t)
    v = _mollifier(1.0 - t)
    return u / (u + v)


def _smooth_transition_deriv(t):
    u = _mollifier(t)
    v = _mollifier(1.0 - t)
    du = _mollifier_deriv(t)
    dv = _mollifier_deriv(1.0 - t)
    return (du * v + u * dv) / (u + v) ** 2


def _make_smoothstep(a: float, b: float, delta: float) -> ScalarFunction:
    if not (delta > 0):
        raise ValueError("smoothstep requires delta > 0")
    if not (a <= b):
        raise ValueError("smoothstep requires a <= b")

    def ev(x):
        x = np.asarray(x, dtype=float)
        rise = _smooth_transition((x - (a - delta)) / delta)
        fall = _smooth_transition(((b + delta) - x) / delta)
        return rise * fall

    def dv(x):
        x = np.asarray(x, dtype=float)
        r = (x - (a - delta)) / delta
        q = ((b + delta) - x) / delta
        return (
            _smooth_transition_deriv(r) * _smooth_transition(q)
            - _smooth_transition(r) * _smooth_transition_deriv(q)
        ) / delta

    return ScalarFunction(
        name="smoothstep", params=(a, b, delta), eval=ev, deriv=dv,
        domain=(-_INF, _INF),
    )


def _make_power(p: float) -> ScalarFunction:
    p = float(p)
    # non-integer powers: keep a margin away from 0 where p*x^(p-1) blows up
    lo = 0.0 if float(p).is_integer() and p >= 1 else 1e-12

    def ev(x):
        return np.asarray(x, dtype=float) ** p

    def dv(x):
        return p * np.asarray(x, dtype=float) ** (p - 1.0)

    return ScalarFunction(
        name="power", params=(p,), eval=ev, deriv=dv, domain=(lo, _INF)
    )


def _asf(x):
    return np.asarray(x, dtype=float)


_FACTORIES = {
    "identity": lambda: ScalarFunction(
        "identity", (), lambda x: _asf(x) + 0.0, lambda x: np.ones_like(_asf(x)),
        (-_INF, _INF)),
    "square": lambda: ScalarFunction(
        "square", (), lambda x: _asf(x) ** 2, lambda x: 2.0 * _asf(x),
        (-_INF, _INF)),
    "cube": lambda: ScalarFunction(
        "cube", (), lambda x: _asf(x) ** 3, lambda x: 3.0 * _asf(x) ** 2,
        (-_INF, _INF)),
    "log": lambda: ScalarFunction(
        "log", (), lambda x: np.log(_asf(x)), lambda x: 1.0 / _asf(x),
        (0.0, _INF)),
    "exp": lambda: ScalarFunction(
        "exp", (), lambda x: np.exp(_asf(x)), lambda x: np.exp(_asf(x)),
        (-_INF, _INF)),
    "power": _make_power,
    "smoothstep": _make_smoothstep,
}

REGISTRY = tuple(_FACTORIES)


def get_function(name: str, *params) -> ScalarFunction:
    """Look up a registry member, e.g. ``get_function('power', 0.5)``."""
    try:
        factory = _FACTORIES[name]
    except KeyError:
        raise DomainError(
            f"unknown function {name!r}; registry: {', '.join(REGISTRY)}"
        ) from None
    return factory(*params)


def parse_function_spec(spec: str) -> ScalarFunction:
    """Parse ``name`` or ``name:p1,p2,...`` into a registry member."""
    name, _, rest = spec.partition(":")
    name = name.strip()
    params = []
    if rest.strip():
        for tok in rest.split(","):
            try:
                params.append(float(tok))
            except ValueError:
                raise DomainError(f"bad parameter {tok!r} in function spec {spec!r}") from None
    try:
        return get_function(name, *params)
    except TypeError as exc:
        raise DomainError(f"bad parameters for {name!r}: {exc}") from None
