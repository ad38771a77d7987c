"""Equilibrium adsorption isotherms phi(c) and the storage term psi = c + phi.

All evaluations are vectorized over numpy arrays.  ``scale`` multiplies the
isotherm (it plays the role of rho_b / n when the isotherm is given per unit
solid mass).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np


class DegenerateDerivativeError(ValueError):
    """phi'(c) is unbounded at the requested concentration."""


class AssumptionError(ValueError):
    """An isotherm violates one of the structural assumptions H1-H4."""


class DegeneracyWarning(UserWarning):
    pass


class PsiEval(NamedTuple):
    value: np.ndarray
    derivative: np.ndarray


def _positive(**params):
    for name, val in params.items():
        if not (np.isfinite(val) and val > 0):
            raise ValueError(f"isotherm parameter {name} must be positive, got {val}")


@dataclass(frozen=True)
class Isotherm:
    scale: float = field(default=1.0, kw_only=True)

    def _phi(self, c):
        raise NotImplementedError

    def _dphi(self, c):
        raise NotImplementedError

    def phi(self, c):
        return self.scale * self._phi(np.asarray(c, dtype=float))

    def dphi(self, c):
        return self.scale * self._dphi(np.asarray(c, dtype=float))

    def psi(self, c) -> PsiEval:
        c = np.asarray(c, dtype=float)
        return PsiEval(c + self.phi(c), 1.0 + self.dphi(c))

    def to_config(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Linear(Isotherm):
    K_d: float

    def __post_init__(self):
        _positive(K_d=self.K_d, scale=self.scale)

    def _phi(self, c):
        return self.K_d * c

    def _dphi(self, c):
        return np.full_like(c, self.K_d)

    def to_config(self):
        return {"type": "linear", "params": {"K_d": self.K_d}, "scale": self.scale}


@dataclass(frozen=True)
class Langmuir(Isotherm):
    """``K_L S_m c / (1 + K_L c)``."""

    K_L: float
    S_m: float

    def __post_init__(self):
        _positive(K_L=self.K_L, S_m=self.S_m, scale=self.scale)

    def _phi(self, c):
        return self.K_L * self.S_m * c / (1.0 + self.K_L * c)

    def _dphi(self, c):
        return self.K_L * self.S_m / (1.0 + self.K_L * c) ** 2

    def to_config(self):
        return {"type": "langmuir", "params": {"K_L": self.K_L, "S_m": self.S_m}, "scale": self.scale}


@dataclass(frozen=True)
class Freundlich(Isotherm):
    """``K_F c**alpha``, extended oddly to c < 0.

    For alpha < 1 the derivative blows up at c = 0; :meth:`dphi` raises there.
    """

    K_F: float
    alpha: float

    def __post_init__(self):
        _positive(K_F=self.K_F, alpha=self.alpha, scale=self.scale)

    @property
    def degenerate(self) -> bool:
        return self.alpha < 1.0

    def _phi(self, c):
        return self.K_F * np.sign(c) * np.abs(c) ** self.alpha

    def _dphi(self, c):
        if self.degenerate and np.any(c == 0.0):
            raise DegenerateDerivativeError(
                f"Freundlich derivative is unbounded at c = 0 (alpha = {self.alpha}); "
                "use RegularizedFreundlich"
            )
        with np.errstate(divide="ignore"):
            return self.K_F * self.alpha * np.abs(c) ** (self.alpha - 1.0)

    def to_config(self):
        return {"type": "freundlich", "params": {"K_F": self.K_F, "alpha": self.alpha}, "scale": self.scale}


@dataclass(frozen=True)
class RegularizedFreundlich(Isotherm):
    """Freundlich above ``eps``; below it the tangent-slope line
    ``K_F (alpha eps^(alpha-1) c + (1 - alpha) eps^alpha)``, also used for c < 0.
    """

    K_F: float
    alpha: float
    eps: float

    def __post_init__(self):
        _positive(K_F=self.K_F, alpha=self.alpha, eps=self.eps, scale=self.scale)

    @property
    def max_slope(self) -> float:
        return self.scale * self.K_F * self.alpha * self.eps ** (self.alpha - 1.0)

    def _phi(self, c):
        p, e = self.alpha, self.eps
        lin = p * e ** (p - 1.0) * c + (1.0 - p) * e**p
        pw = np.abs(np.maximum(c, e)) ** p
        return self.K_F * np.where(c > e, pw, lin)

    def _dphi(self, c):
        p, e = self.alpha, self.eps
        pw = p * np.maximum(c, e) ** (p - 1.0)
        return self.K_F * np.where(c > e, pw, p * e ** (p - 1.0))

    def to_config(self):
        return {
            "type": "regularized_freundlich",
            "params": {"K_F": self.K_F, "alpha": self.alpha, "eps": self.eps},
            "scale": self.scale,
        }


def phi(iso: Isotherm, c):
    return iso.phi(c)


def dphi(iso: Isotherm, c):
    return iso.dphi(c)


def psi(iso: Isotherm, c) -> PsiEval:
    return iso.psi(c)


def phi_regularized(K_F: float, alpha: float, eps: float, c):
    return RegularizedFreundlich(K_F, alpha, eps).phi(c)


_TYPES = {
    "linear": Linear,
    "langmuir": Langmuir,
    "freundlich": Freundlich,
    "regularized_freundlich": RegularizedFreundlich,
}


def from_config(doc: dict) -> Isotherm:
    """Build an isotherm from ``{type, params, scale}``."""
    kind = doc["type"].lower()
    if kind not in _TYPES:
        raise ValueError(f"unknown isotherm type {doc['type']!r}; choose from {sorted(_TYPES)}")
    return _TYPES[kind](**doc.get("params", {}), scale=float(doc.get("scale", 1.0)))


# ---------------------------------------------------------------------------
# assumption checks
# ---------------------------------------------------------------------------


@dataclass
class AssumptionReport:
    isotherm: Isotherm
    c_max: float
    monotone: bool
    min_quotient: float
    psi_at_zero: float
    degenerate: bool
    notes: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.monotone and self.min_quotient >= 1.0 - 1e-12


def validate_assumptions(iso: Isotherm, c_max: float = 1.0, n: int = 401, strict: bool = True) -> AssumptionReport:
    """Sample phi and psi on ``[0, c_max]`` and check monotonicity (H1) and the
    uniform monotonicity of psi (H4).

    psi(0) = 0 is checked up to an additive constant: the regularized
    Freundlich line has a nonzero intercept, which is reported but does not
    affect the time derivative in the model.
    """
    c = np.linspace(0.0, c_max, n)
    ph = iso.phi(c)
    ps = c + ph
    monotone = bool(np.all(np.diff(ph) >= -1e-15 * np.maximum(1.0, np.abs(ph[1:]))))
    quot = np.diff(ps) / np.diff(c)
    # pairs at different separations
    rng = np.random.default_rng(0)
    a, b = rng.uniform(0, c_max, 2000), rng.uniform(0, c_max, 2000)
    keep = a != b
    pa, pb = iso.phi(a[keep]) + a[keep], iso.phi(b[keep]) + b[keep]
    min_q = float(min(np.min(quot), np.min((pa - pb) / (a[keep] - b[keep]))))
    psi0 = float(ps[0])
    degenerate = isinstance(iso, Freundlich) and iso.degenerate
    report = AssumptionReport(iso, c_max, monotone, min_q, psi0, degenerate)
    if psi0 != 0.0:
        report.notes.append(f"psi(0) = {psi0:.3e}: normalization holds up to an additive constant")
    if degenerate:
        msg = f"Freundlich alpha={iso.alpha} < 1: phi'(c) is unbounded as c -> 0 (degenerate adsorption)"
        report.notes.append(msg)
        warnings.warn(msg, DegeneracyWarning, stacklevel=2)
    if strict and not monotone:
        raise AssumptionError("H1 violated: phi is not monotone increasing")
    if strict and min_q < 1.0 - 1e-12:
        raise AssumptionError(f"H4 violated: psi difference quotient drops to {min_q:.6g} < 1")
    return report
