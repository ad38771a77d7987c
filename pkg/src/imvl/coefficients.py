"""Stencil coefficients for the parameterized IMVL scheme family.

Every interior coefficient is a polynomial in ``m**2`` and ``a2``, so the
functions here accept either a float ``m`` or an exact ``msq`` (``m**2`` as a
:class:`fractions.Fraction`).  With exact inputs the outputs are exact
rationals, which is what the golden tests compare against.

Two pairs of operators make up a scheme:

* the *staggered* pair, mass stencil A(m, a2) with the face/node difference
  delta(m);
* the *node* pair, mass stencil A*(m*, a2*) with the collocated derivative
  H(m*).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Literal, Sequence, Union

import numpy as np

Number = Union[int, float, Fraction]

ORDER_TOL = 1e-13


class DegenerateStencilError(ValueError):
    """The moment-matching system has no (unique) solution."""


class SchemeValidationError(ValueError):
    """A scheme parameter set violates one of its invariants."""


def _msq(m: Number | None, msq: Number | None) -> Number:
    if msq is not None:
        return msq
    if m is None:
        raise TypeError("either m or msq must be given")
    return m * m


def _is_exact(*values) -> bool:
    return all(isinstance(v, (int, Fraction)) for v in values)


def _frac(x: Number) -> Number:
    return Fraction(x) if isinstance(x, int) else x


# ---------------------------------------------------------------------------
# stencil containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MassStencil:
    """Symmetric 5-point weights ``(a_-2, a_-1, a_0, a_1, a_2)``."""

    a: tuple

    offsets = (-2, -1, 0, 1, 2)

    @property
    def a0(self):
        return self.a[2]

    @property
    def a1(self):
        return self.a[3]

    @property
    def a2(self):
        return self.a[4]

    def as_array(self) -> np.ndarray:
        return np.array([float(v) for v in self.a])

    def stencil(self) -> dict:
        return dict(zip(self.offsets, self.a))


@dataclass(frozen=True)
class NodeDerivStencil:
    """Antisymmetric collocated derivative, ``(1/h) sum_p d_p w_{i+p}``."""

    d1: Number
    d2: Number

    offsets = (-2, -1, 0, 1, 2)

    @property
    def full(self) -> tuple:
        zero = Fraction(0) if _is_exact(self.d1, self.d2) else 0.0
        return (-self.d2, -self.d1, zero, self.d1, self.d2)

    def stencil(self) -> dict:
        return dict(zip(self.offsets, self.full))


@dataclass(frozen=True)
class StaggeredDerivStencil:
    """Antisymmetric half-shifted difference.

    ``b1`` weights the points at offset +-1/2 and ``b2`` those at +-3/2.
    """

    b1: Number
    b2: Number

    offsets = (Fraction(-3, 2), Fraction(-1, 2), Fraction(1, 2), Fraction(3, 2))

    @property
    def full(self) -> tuple:
        return (-self.b2, -self.b1, self.b1, self.b2)

    def stencil(self) -> dict:
        return dict(zip(self.offsets, self.full))


@dataclass(frozen=True)
class BoundaryStencils:
    """One-sided rows for the Dirichlet closures (left boundary form).

    ``l`` is the mass row on faces 1/2..7/2, ``k`` the collocated derivative
    row at node 1 on nodes 0..4, ``g`` the staggered derivative row on five
    points starting half a cell before its target.
    """

    l: tuple
    k: tuple
    g: tuple

    l_offsets = (0, 1, 2, 3)
    k_offsets = (-1, 0, 1, 2, 3)
    g_offsets = tuple(Fraction(2 * j - 1, 2) for j in range(5))


@dataclass(frozen=True)
class TruncationCoeffs:
    """Leading coefficients of ``h^4 w^(5)``, ``h^6 w^(7)``, ``h^8 w^(9)``."""

    e4: Number
    e6: Number
    e8: Number

    @property
    def order(self) -> int:
        return classify_order(self)


@dataclass(frozen=True)
class StabilityReport:
    R_a: float
    R_b: float
    R_d: float


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------


def interior_mass_coeffs(m: Number | None = None, a2: Number = 0, *, msq: Number | None = None) -> MassStencil:
    """Mass stencil A(m, a2); the weights always sum to one."""
    s = _msq(m, msq)
    if _is_exact(s, a2):
        s, a2 = _frac(s), _frac(a2)
        a1 = (-48 * a2 + s) / 12
        a0 = (6 + 36 * a2 - s) / 6
    else:
        s, a2 = float(s), float(a2)
        a1 = (-48.0 * a2 + s) / 12.0
        a0 = (6.0 + 36.0 * a2 - s) / 6.0
    return MassStencil((a2, a1, a0, a1, a2))


def node_derivative_coeffs(m: Number | None = None, *, msq: Number | None = None) -> NodeDerivStencil:
    s = _msq(m, msq)
    if _is_exact(s):
        s = _frac(s)
        return NodeDerivStencil((8 - s) / 12, (s - 2) / 24)
    s = float(s)
    return NodeDerivStencil((8.0 - s) / 12.0, (s - 2.0) / 24.0)


def staggered_derivative_coeffs(m: Number | None = None, *, msq: Number | None = None) -> StaggeredDerivStencil:
    s = _msq(m, msq)
    if _is_exact(s):
        s = _frac(s)
        return StaggeredDerivStencil((9 - 2 * s) / 8, (2 * s - 1) / 24)
    s = float(s)
    return StaggeredDerivStencil((9.0 - 2.0 * s) / 8.0, (2.0 * s - 1.0) / 24.0)


def boundary_coeffs_hos1d(m: Number | None = None, *, msq: Number | None = None) -> tuple[tuple, tuple]:
    """Left-boundary mass row ``l`` and collocated derivative row ``k``."""
    s = _msq(m, msq)
    s = _frac(s) if _is_exact(s) else float(s)
    l = ((6 + s) / 6, -5 * s / 12, s / 3, -s / 12)
    k = ((-2 - s) / 8, 5 * (s - 2) / 12, (3 - s) / 2, (s - 2) / 4, (2 - s) / 24)
    return l, k


def boundary_coeffs_hos2d(m: Number | None = None, *, msq: Number | None = None) -> tuple:
    """Left-boundary staggered derivative row ``g`` (five points)."""
    s = _msq(m, msq)
    s = _frac(s) if _is_exact(s) else float(s)
    return (
        (-11 - 2 * s) / 12,
        (17 + 14 * s) / 24,
        -3 * (2 * s - 1) / 8,
        5 * (2 * s - 1) / 24,
        (1 - 2 * s) / 24,
    )


def boundary_stencils(m: Number | None = None, *, msq: Number | None = None) -> BoundaryStencils:
    l, k = boundary_coeffs_hos1d(m, msq=msq)
    return BoundaryStencils(l=l, k=k, g=boundary_coeffs_hos2d(m, msq=msq))


# Truncation coefficients are affine in (m^2, a2):  e = c0 + c1*m^2 + c2*a2.
_TRUNC = {
    "node": {
        "e4": (Fraction(1, 30), Fraction(-1, 72), Fraction(1)),
        "e6": (Fraction(15, 3780), Fraction(-7, 3780), Fraction(630, 3780)),
        "e8": (Fraction(84, 362880), Fraction(-41, 362880), Fraction(4536, 362880)),
    },
    "staggered": {
        "e4": (Fraction(3, 640), Fraction(-1, 288), Fraction(1)),
        "e6": (Fraction(135, 483840), Fraction(-161, 483840), Fraction(80640, 483840)),
        "e8": (Fraction(819, 92897280), Fraction(-1256, 92897280), Fraction(1161216, 92897280)),
    },
}


def _trunc(kind: str, m, a2, msq) -> TruncationCoeffs:
    s = _msq(m, msq)
    exact = _is_exact(s, a2)
    if exact:
        s, a2 = _frac(s), _frac(a2)
    out = {}
    for key, (c0, c1, c2) in _TRUNC[kind].items():
        if exact:
            out[key] = c0 + c1 * s + c2 * a2
        else:
            out[key] = float(c0) + float(c1) * float(s) + float(c2) * float(a2)
    return TruncationCoeffs(**out)


def truncation_coeffs_node(m: Number | None = None, a2: Number = 0, *, msq: Number | None = None) -> TruncationCoeffs:
    """Leading error terms of ``A(m,a2) w' - H(m) w`` at a node."""
    return _trunc("node", m, a2, msq)


def truncation_coeffs_staggered(m: Number | None = None, a2: Number = 0, *, msq: Number | None = None) -> TruncationCoeffs:
    """Leading error terms of ``A(m,a2) w' - delta(m) w`` at a staggered point."""
    return _trunc("staggered", m, a2, msq)


def classify_order(tc: TruncationCoeffs, tol: float = ORDER_TOL) -> int:
    def zero(v):
        return v == 0 if isinstance(v, Fraction) else abs(v) < tol

    if not zero(tc.e4):
        return 4
    if not zero(tc.e6):
        return 6
    return 8


def sixth_order_a2(kind: Literal["node", "staggered"], m: Number | None = None, *, msq: Number | None = None) -> Number:
    """The a2 value that cancels the fourth-order term for a given m."""
    c0, c1, c2 = _TRUNC[kind]["e4"]
    s = _msq(m, msq)
    if _is_exact(s):
        return -(c0 + c1 * _frac(s)) / c2
    return -(float(c0) + float(c1) * float(s)) / float(c2)


def eighth_order_params_exact(kind: Literal["node", "staggered"]) -> tuple[Fraction, Fraction]:
    """Exact ``(m**2, a2)`` zeroing both e4 and e6."""
    (p0, p1, p2), (q0, q1, q2) = _TRUNC[kind]["e4"], _TRUNC[kind]["e6"]
    det = p1 * q2 - p2 * q1
    if det == 0:
        raise DegenerateStencilError(f"no eighth-order member for kind {kind!r}")
    msq = (-p0 * q2 + p2 * q0) / det
    a2 = (-p1 * q0 + p0 * q1) / det
    return msq, a2


def eighth_order_params(kind: Literal["node", "staggered"]) -> tuple[float, Fraction]:
    """Positive ``m`` and ``a2`` for which the kind's stencil pair is eighth order."""
    msq, a2 = eighth_order_params_exact(kind)
    return math.sqrt(msq), a2


# ---------------------------------------------------------------------------
# moment-matching oracle
# ---------------------------------------------------------------------------


def imvl_moments(m: float, eps1: float | None = None, eps2: float | None = None, n: int = 4) -> np.ndarray:
    """Normalized integral moments ``e~_k`` for k < n, in units of ``h**k``.

    With ``eps1 = eps2 = m`` this gives ``[1, 0, m^2/12, 0]``.
    """
    e1 = m if eps1 is None else eps1
    e2 = m if eps2 is None else eps2
    return np.array(
        [2.0 * (e2 ** (k + 1) - (-e1) ** (k + 1)) / ((e1 + e2) * math.factorial(k + 2)) for k in range(n)]
    )


def moment_match_oracle(
    offsets: Sequence[Number],
    target_moments: Sequence[float],
    deriv_shift: int = 0,
    pinned: dict | None = None,
    rtol: float = 1e-10,
) -> np.ndarray:
    """Solve the Taylor moment system for stencil weights.

    The stencil ``sum_j c_j f(x + offsets[j] h)`` (times ``1/h`` when
    ``deriv_shift`` is 1) is made to reproduce
    ``sum_k target_moments[k] h^k f^(k + deriv_shift)`` through the last
    supplied moment.  Rows for the derivative orders below ``deriv_shift``
    are set to zero.  ``pinned`` fixes chosen weights (keyed by offset) when
    the moment system alone leaves free parameters.

    Overdetermined but consistent systems are solved in the least-squares
    sense; a nonzero residual raises :class:`DegenerateStencilError`.
    """
    offs = np.array([float(o) for o in offsets])
    if len(set(offs.tolist())) != len(offs):
        raise DegenerateStencilError("stencil offsets must be distinct")
    K = len(target_moments)
    rows, rhs = [], []
    for j in range(K + deriv_shift):
        rows.append(offs**j / math.factorial(j))
        rhs.append(0.0 if j < deriv_shift else float(target_moments[j - deriv_shift]))
    for off, val in (pinned or {}).items():
        row = np.zeros(len(offs))
        hit = np.flatnonzero(np.isclose(offs, float(off)))
        if hit.size != 1:
            raise DegenerateStencilError(f"pinned offset {off} is not in the stencil")
        row[hit[0]] = 1.0
        rows.append(row)
        rhs.append(float(val))
    M, r = np.array(rows), np.array(rhs)
    coef, _, rank, _ = np.linalg.lstsq(M, r, rcond=None)
    if rank < len(offs):
        raise DegenerateStencilError(f"moment matrix has rank {rank} < {len(offs)} unknowns")
    resid = np.max(np.abs(M @ coef - r))
    if resid > rtol * max(1.0, np.max(np.abs(r))):
        raise DegenerateStencilError(f"moment system inconsistent (residual {resid:.3e})")
    return coef


# ---------------------------------------------------------------------------
# stability
# ---------------------------------------------------------------------------


def stability_diagnostics(a: MassStencil, d: NodeDerivStencil | None = None) -> StabilityReport:
    a0, a1, a2 = (float(v) for v in (a.a0, a.a1, a.a2))
    R_a = a0 - 2 * abs(a1) - 2 * abs(a2)
    R_b = abs(a0) + 2 * abs(a1) + 2 * abs(a2)
    R_d = float("nan")
    if d is not None:
        d1, d2 = float(d.d1), float(d.d2)
        R_d = 4 * d1**2 + 4 * d2**2 + 8 * abs(d1 * d2)
    return StabilityReport(R_a, R_b, R_d)


# ---------------------------------------------------------------------------
# scheme parameters and presets
# ---------------------------------------------------------------------------

Closure = Literal["periodic", "hos1d", "hos2d"]


@dataclass(frozen=True)
class SchemeParams:
    """The four tunable parameters of one scheme family member.

    ``msq_stag``/``msq_node`` optionally carry ``m**2`` exactly; when set they
    take precedence over the float ``m`` values for coefficient generation.
    """

    m_stag: float
    a2_stag: Number
    m_node: float
    a2_node: Number
    msq_stag: Number | None = None
    msq_node: Number | None = None
    name: str | None = None
    closure: Closure = "periodic"

    def __post_init__(self):
        vals = [self.m_stag, self.a2_stag, self.m_node, self.a2_node]
        if not all(math.isfinite(float(v)) for v in vals):
            raise SchemeValidationError(f"scheme parameters must be finite, got {vals}")
        for kind, stencil in (("staggered", self.mass_stag), ("node", self.mass_node)):
            margin = stability_diagnostics(stencil).R_a
            if not margin > 0:
                raise SchemeValidationError(
                    f"stability criterion a0 - 2|a1| - 2|a2| > 0 fails for the {kind} mass stencil "
                    f"(margin {margin:.6g})"
                )

    @property
    def mass_stag(self) -> MassStencil:
        return interior_mass_coeffs(self.m_stag, self.a2_stag, msq=self.msq_stag)

    @property
    def mass_node(self) -> MassStencil:
        return interior_mass_coeffs(self.m_node, self.a2_node, msq=self.msq_node)

    @property
    def delta(self) -> StaggeredDerivStencil:
        return staggered_derivative_coeffs(self.m_stag, msq=self.msq_stag)

    @property
    def node_deriv(self) -> NodeDerivStencil:
        return node_derivative_coeffs(self.m_node, msq=self.msq_node)

    @property
    def boundary(self) -> BoundaryStencils:
        return boundary_stencils(self.m_stag, msq=self.msq_stag)

    @property
    def node_boundary(self) -> BoundaryStencils:
        return boundary_stencils(self.m_node, msq=self.msq_node)

    def truncation(self) -> dict[str, TruncationCoeffs]:
        return {
            "staggered": truncation_coeffs_staggered(self.m_stag, self.a2_stag, msq=self.msq_stag),
            "node": truncation_coeffs_node(self.m_node, self.a2_node, msq=self.msq_node),
        }

    def order(self) -> int:
        return min(classify_order(tc) for tc in self.truncation().values())

    def stability_margin(self) -> dict[str, float]:
        return {
            "staggered": stability_diagnostics(self.mass_stag).R_a,
            "node": stability_diagnostics(self.mass_node).R_a,
        }


def _preset(name, msq_stag, a2_stag, msq_node, a2_node, closure="periodic") -> SchemeParams:
    return SchemeParams(
        m_stag=math.sqrt(msq_stag),
        a2_stag=Fraction(a2_stag),
        m_node=math.sqrt(msq_node),
        a2_node=Fraction(a2_node),
        msq_stag=Fraction(msq_stag),
        msq_node=Fraction(msq_node),
        name=name,
        closure=closure,
    )


_MSQ8_NODE, _A28_NODE = eighth_order_params_exact("node")
_MSQ8_STAG, _A28_STAG = eighth_order_params_exact("staggered")

PRESETS: dict[str, SchemeParams] = {
    "HOS1": _preset("HOS1", Fraction(1, 2), 0, Fraction(1, 2), 0),
    "HOS2": _preset("HOS2", 2, 0, 2, 0),
    "HOS3": _preset("HOS3", Fraction(11, 4), Fraction(7, 1440), Fraction(11, 4), Fraction(7, 1440)),
    "HOS4": _preset("HOS4", _MSQ8_STAG, _A28_STAG, _MSQ8_NODE, _A28_NODE),
    "HOS1-D": _preset("HOS1-D", Fraction(1, 2), 0, Fraction(1, 2), 0, closure="hos1d"),
    "HOS2-D": _preset("HOS2-D", 2, 0, 2, 0, closure="hos2d"),
}

THEORETICAL_ORDER = {"HOS1": 4, "HOS2": 4, "HOS3": 6, "HOS4": 8, "HOS1-D": 4, "HOS2-D": 4}


def get_scheme(spec: str | SchemeParams | dict) -> SchemeParams:
    """Resolve a preset name, explicit parameter mapping, or pass-through."""
    if isinstance(spec, SchemeParams):
        return spec
    if isinstance(spec, str):
        key = spec.upper()
        if key not in PRESETS:
            raise SchemeValidationError(f"unknown scheme preset {spec!r}; choose from {sorted(PRESETS)}")
        return PRESETS[key]
    missing = {"m_stag", "a2_stag", "m_node", "a2_node"} - set(spec)
    if missing:
        raise SchemeValidationError(f"explicit scheme is missing {sorted(missing)}")
    return SchemeParams(
        m_stag=float(spec["m_stag"]),
        a2_stag=float(spec["a2_stag"]),
        m_node=float(spec["m_node"]),
        a2_node=float(spec["a2_node"]),
        closure=spec.get("closure", "periodic"),
        name=spec.get("name"),
    )


def sixth_order_scheme(m_node: float, m_stag: float) -> SchemeParams:
    """Two-parameter sixth-order subfamily used by the parameter sweep."""
    return SchemeParams(
        m_stag=m_stag,
        a2_stag=sixth_order_a2("staggered", m_stag),
        m_node=m_node,
        a2_node=sixth_order_a2("node", m_node),
        name=f"sixth(m_node={m_node:.6g},m_stag={m_stag:.6g})",
    )
