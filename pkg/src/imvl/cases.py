"""Built-in manufactured-solution cases ex1-ex6.

Sources are hand-derived from

    f = (1 + phi'(c)) c_t + u' c + u c_x - D' c_x - D c_xx,    z = -D c_x,

and guarded by :func:`pde_residual`, a finite-difference check that never
looks at the closed-form f.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .grid_ops import Grid
from .isotherms import Isotherm, Langmuir, Linear, Freundlich, RegularizedFreundlich
from .solver import Dirichlet, DirichletInletZeroFluxOutlet, Periodic, Problem

LN3 = math.log(3.0)


class UnknownCaseError(KeyError):
    pass


@dataclass
class ManufacturedCase:
    id: str
    x_left: float
    x_right: float
    T: float
    periodic: bool
    velocity: Callable
    velocity_dx: Callable
    diffusion: Callable
    diffusion_dx: Callable
    isotherm: Isotherm
    source: Callable
    initial: Callable
    exact_c: Callable | None = None
    exact_z: Callable | None = None
    boundary: object = None
    description: str = ""
    params: dict = field(default_factory=dict)
    kwargs: dict = field(default_factory=dict)

    def grid(self, J: int) -> Grid:
        return Grid(self.x_left, self.x_right, J)

    def problem(self, J: int) -> Problem:
        return Problem(
            grid=self.grid(J),
            velocity=self.velocity,
            diffusion=self.diffusion,
            source=self.source,
            isotherm=self.isotherm,
            boundary=self.boundary,
            initial=self.initial,
            exact_c=self.exact_c,
            exact_z=self.exact_z,
            name=self.id,
        )


def _const(v):
    return lambda x, *_: np.full_like(np.asarray(x, dtype=float), v)


def _mms_source(c, c_t, c_x, c_xx, u, du, D, dD, iso: Isotherm):
    def f(x, t):
        x = np.asarray(x, dtype=float)
        cv, cx = c(x, t), c_x(x, t)
        return (1.0 + iso.dphi(cv)) * c_t(x, t) + du(x) * cv + u(x) * cx - dD(x) * cx - D(x) * c_xx(x, t)

    return f


def _build(id_, *, x_left, x_right, T, periodic, c, c_t, c_x, c_xx, u, du, D, dD, iso, desc, boundary=None):
    src = _mms_source(c, c_t, c_x, c_xx, u, du, D, dD, iso)
    if boundary is None:
        boundary = Periodic() if periodic else Dirichlet(lambda t: float(c(x_left, t)), lambda t: float(c(x_right, t)))
    return ManufacturedCase(
        id=id_,
        x_left=x_left,
        x_right=x_right,
        T=T,
        periodic=periodic,
        velocity=u,
        velocity_dx=du,
        diffusion=D,
        diffusion_dx=dD,
        isotherm=iso,
        source=src,
        initial=lambda x: c(np.asarray(x, dtype=float), 0.0),
        exact_c=c,
        exact_z=lambda x, t: -D(x) * c_x(x, t),
        boundary=boundary,
        description=desc,
    )


def _ex1():
    return _build(
        "ex1",
        x_left=0.0,
        x_right=2 * math.pi,
        T=1.0,
        periodic=True,
        c=lambda x, t: np.exp(-t) * (np.sin(2 * x) + 1) / 2,
        c_t=lambda x, t: -np.exp(-t) * (np.sin(2 * x) + 1) / 2,
        c_x=lambda x, t: np.exp(-t) * np.cos(2 * x),
        c_xx=lambda x, t: -2 * np.exp(-t) * np.sin(2 * x),
        u=lambda x: np.sin(2 * x),
        du=lambda x: 2 * np.cos(2 * x),
        D=lambda x: 0.1 * (np.cos(2 * x) + 2),
        dD=lambda x: -0.2 * np.sin(2 * x),
        iso=Langmuir(K_L=6.0, S_m=5.0 / 6.0),
        desc="periodic, Langmuir 5c/(1+6c)",
    )


def _ex2():
    def c(x, t):
        return 3.0 ** (np.cos(2 * x + t) - 1)

    return _build(
        "ex2",
        x_left=0.0,
        x_right=math.pi,
        T=1.0,
        periodic=True,
        c=c,
        c_t=lambda x, t: -LN3 * np.sin(2 * x + t) * c(x, t),
        c_x=lambda x, t: -2 * LN3 * np.sin(2 * x + t) * c(x, t),
        c_xx=lambda x, t: (4 * LN3**2 * np.sin(2 * x + t) ** 2 - 4 * LN3 * np.cos(2 * x + t)) * c(x, t),
        u=lambda x: np.cos(2 * x),
        du=lambda x: -2 * np.sin(2 * x),
        D=lambda x: np.sin(2 * x) / 2 + 1,
        dD=lambda x: np.cos(2 * x),
        iso=Freundlich(K_F=1.0, alpha=1.0 / 3.0),
        desc="periodic, Freundlich c^(1/3), unregularized",
    )


def _ex3():
    return _build(
        "ex3",
        x_left=0.0,
        x_right=4.0,
        T=1.0,
        periodic=False,
        c=lambda x, t: np.exp(t) * np.cos(x) ** 2,
        c_t=lambda x, t: np.exp(t) * np.cos(x) ** 2,
        c_x=lambda x, t: -np.exp(t) * np.sin(2 * x),
        c_xx=lambda x, t: -2 * np.exp(t) * np.cos(2 * x),
        u=_const(0.15),
        du=_const(0.0),
        D=_const(0.135),
        dD=_const(0.0),
        iso=Linear(K_d=0.7),
        desc="Dirichlet, linear isotherm",
    )


def _ex4():
    def th(x):
        return np.tanh(2 * x)

    return _build(
        "ex4",
        x_left=-3.0,
        x_right=3.0,
        T=1.0,
        periodic=False,
        c=lambda x, t: np.exp(-t) * th(x) ** 2,
        c_t=lambda x, t: -np.exp(-t) * th(x) ** 2,
        c_x=lambda x, t: 4 * np.exp(-t) * th(x) * (1 - th(x) ** 2),
        c_xx=lambda x, t: 8 * np.exp(-t) * (1 - th(x) ** 2) * (1 - 3 * th(x) ** 2),
        u=lambda x: np.asarray(x, dtype=float),
        du=_const(1.0),
        D=lambda x: np.asarray(x, dtype=float) ** 2 + 1,
        dD=lambda x: 2 * np.asarray(x, dtype=float),
        iso=RegularizedFreundlich(K_F=1.0, alpha=1.0 / 3.0, eps=1e-10),
        desc="Dirichlet, regularized Freundlich c^(1/3)",
    )


def _ex5():
    return _build(
        "ex5",
        x_left=0.0,
        x_right=6.0,
        T=1.0,
        periodic=False,
        c=lambda x, t: np.exp(-t) * np.sin(x) ** 2,
        c_t=lambda x, t: -np.exp(-t) * np.sin(x) ** 2,
        c_x=lambda x, t: np.exp(-t) * np.sin(2 * x),
        c_xx=lambda x, t: 2 * np.exp(-t) * np.cos(2 * x),
        u=lambda x: np.asarray(x, dtype=float),
        du=_const(1.0),
        D=lambda x: np.asarray(x, dtype=float) / 10,
        dD=_const(0.1),
        iso=Langmuir(K_L=1.0, S_m=1.0),
        desc="Dirichlet, Langmuir c/(1+c), D vanishing at the inlet node",
    )


EX6_PARAMS = {"rho": 1500.0, "u": 0.012, "D": 0.17477, "n": 0.3, "K_L": 2.6, "S_m": 3e-4, "c_in": 100.0}


def _ex6(length: float = 5.0, T: float = 1800.0):
    p = EX6_PARAMS
    iso = Langmuir(K_L=p["K_L"], S_m=p["S_m"], scale=p["rho"] / p["n"])
    zero = _const(0.0)
    return ManufacturedCase(
        id="ex6",
        x_left=0.0,
        x_right=float(length),
        T=T,
        periodic=False,
        velocity=_const(p["u"]),
        velocity_dx=zero,
        diffusion=_const(p["D"]),
        diffusion_dx=zero,
        isotherm=iso,
        source=lambda x, t: np.zeros_like(np.asarray(x, dtype=float)),
        initial=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        boundary=DirichletInletZeroFluxOutlet(p["c_in"]),
        description=f"lead column, {length:g} m, inlet {p['c_in']:g} mg/L",
        params=dict(p, length=float(length)),
    )


_REGISTRY = {"ex1": _ex1, "ex2": _ex2, "ex3": _ex3, "ex4": _ex4, "ex5": _ex5, "ex6": _ex6}
CASE_IDS = tuple(_REGISTRY)


def builtin_case(id: str, **kwargs) -> ManufacturedCase:
    key = id.lower()
    if key not in _REGISTRY:
        raise UnknownCaseError(f"unknown case {id!r}; choose from {list(CASE_IDS)}")
    case = _REGISTRY[key](**kwargs)
    case.kwargs = dict(kwargs)
    return case


def pde_residual(case: ManufacturedCase, x, t, hx: float = 1e-3, ht: float = 1e-3) -> np.ndarray:
    """``f`` minus a finite-difference evaluation of the operator on the exact c.

    Derivatives use fourth-order central differences; the flux
    ``u c - D c_x`` is formed with a differenced c_x and differenced again.
    For ex6 (no exact solution) the zero state is checked.
    """
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    if case.exact_c is None:
        c = lambda xx, tt: np.zeros_like(xx * tt)
    else:
        c = case.exact_c
    iso = case.isotherm

    def d1(fn, h):
        return (fn(-2 * h) - 8 * fn(-h) + 8 * fn(h) - fn(2 * h)) / (12 * h)

    psi_t = d1(lambda s: iso.psi(c(x, t + s)).value, ht)

    def flux(xx):
        cx = d1(lambda s: c(xx + s, t), hx)
        return case.velocity(xx) * c(xx, t) - case.diffusion(xx) * cx

    flux_x = d1(lambda s: flux(x + s), hx)
    return case.source(x, t) - (psi_t + flux_x)
