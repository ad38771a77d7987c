"""Block-centered grids and dense realizations of the IMVL operators.

Index conventions
-----------------
Nodes are ``x_i = x_left + i h``; faces are ``x_{i+1/2}``.  Grid functions
are plain numpy arrays:

* periodic node field: length ``J``, entry ``k`` is node ``k`` (node ``J``
  is node ``0``);
* Dirichlet node field: length ``J + 1``, nodes ``0..J``;
* face field (both modes): length ``J``, entry ``k`` is face ``k + 1/2``.

Under Dirichlet closures node-targeted operators only produce rows for the
interior nodes ``1..J-1``; face-targeted operators produce all ``J`` rows.
Rows whose interior stencil would leave the grid get the one-sided boundary
rows (first and last target only, mirrored on the right).
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Literal

import numpy as np

from .coefficients import (
    BoundaryStencils,
    MassStencil,
    NodeDerivStencil,
    StaggeredDerivStencil,
    boundary_coeffs_hos1d,
    boundary_coeffs_hos2d,
)

Location = Literal["node", "face"]
Closure = Literal["periodic", "hos1d", "hos2d"]
CLOSURES = ("periodic", "hos1d", "hos2d")


class GridOpError(ValueError):
    pass


class MassSolveError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class Grid:
    x_left: float
    x_right: float
    J: int

    def __post_init__(self):
        if int(self.J) != self.J or self.J < 1:
            raise GridOpError(f"J must be a positive integer, got {self.J}")
        if not self.x_right > self.x_left:
            raise GridOpError("x_right must exceed x_left")

    @property
    def h(self) -> float:
        return (self.x_right - self.x_left) / self.J

    @property
    def length(self) -> float:
        return self.x_right - self.x_left

    @cached_property
    def nodes(self) -> np.ndarray:
        """All nodes ``x_0..x_J``."""
        return self.x_left + self.h * np.arange(self.J + 1)

    @cached_property
    def faces(self) -> np.ndarray:
        return self.x_left + self.h * (np.arange(self.J) + 0.5)

    def node_points(self, periodic: bool) -> np.ndarray:
        return self.nodes[: self.J] if periodic else self.nodes

    def n_nodes(self, periodic: bool) -> int:
        return self.J if periodic else self.J + 1


@dataclass(frozen=True)
class OperatorMatrix:
    """Dense matrix of one operator plus where it maps from and to."""

    matrix: np.ndarray
    closure: str
    source: Location
    target: Location

    def __matmul__(self, other):
        return self.matrix @ other

    def apply(self, f: np.ndarray) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if f.shape[0] != self.matrix.shape[1]:
            raise GridOpError(
                f"field of length {f.shape[0]} does not fit a {self.source}->{self.target} "
                f"operator expecting {self.matrix.shape[1]} values ({self.closure})"
            )
        return self.matrix @ f


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------


def _positions(J: int, loc: Location, closure: str, role: str) -> list[Fraction]:
    """Grid positions (in units of h from x_left) of sources or targets."""
    if loc == "face":
        return [Fraction(2 * k + 1, 2) for k in range(J)]
    if closure == "periodic":
        return [Fraction(k) for k in range(J)]
    if role == "source":
        return [Fraction(k) for k in range(J + 1)]
    return [Fraction(k) for k in range(1, J)]


def _assemble(
    J: int,
    stencil: dict,
    source: Location,
    target: Location,
    closure: str,
    scale: float = 1.0,
    left_row: dict | None = None,
    parity: int = 1,
) -> np.ndarray:
    """Dense matrix for ``target_t = scale * sum_o stencil[o] * source(t + o)``.

    ``left_row`` (offsets relative to the target) replaces the interior
    stencil at the first target; its mirror image, multiplied by ``parity``,
    is used at the last target.
    """
    src = _positions(J, source, closure, "source")
    tgt = _positions(J, target, closure, "target")
    index = {p: j for j, p in enumerate(src)}
    M = np.zeros((len(tgt), len(src)))
    coeffs = {Fraction(o): float(c) for o, c in stencil.items() if c != 0}
    for r, t in enumerate(tgt):
        if closure == "periodic":
            for o, c in coeffs.items():
                M[r, index[(t + o) % J]] += c
            continue
        if all((t + o) in index for o in coeffs):
            for o, c in coeffs.items():
                M[r, index[t + o]] += c
            continue
        if left_row is None or r not in (0, len(tgt) - 1):
            raise GridOpError(
                f"{source}->{target} stencil leaves the grid at position {t} and the "
                f"{closure} closure defines no boundary row there"
            )
        sign = 1.0 if r == 0 else float(parity)
        for o, c in left_row.items():
            p = t + Fraction(o) if r == 0 else t - Fraction(o)
            if p not in index:
                raise GridOpError(f"boundary row reaches outside the grid at {p}; J={J} too small")
            M[r, index[p]] += sign * float(c)
    return scale * M


def _check_len(f: np.ndarray, n: int, what: str) -> None:
    if f.shape[0] != n:
        raise GridOpError(f"{what}: expected {n} values, got {f.shape[0]}")


def mass_matrix(
    a: MassStencil,
    J: int,
    location: Location = "node",
    closure: Closure = "periodic",
    boundary_l: tuple | None = None,
) -> OperatorMatrix:
    """Matrix of A(m, a2) acting on a node or face field.

    Dirichlet face rows at 1/2 and J-1/2 use ``boundary_l``; node rows only
    cover interior nodes and never need a closure for three-point masses.
    """
    if J < 5:
        raise GridOpError(f"mass stencil needs at least 5 points, got J={J}")
    left = None
    if closure != "periodic" and location == "face":
        if boundary_l is None:
            raise GridOpError("Dirichlet face mass needs boundary row l")
        left = dict(zip((0, 1, 2, 3), boundary_l))
    M = _assemble(J, a.stencil(), location, location, closure, left_row=left, parity=1)
    return OperatorMatrix(M, closure, location, location)


def delta_matrix(
    b: StaggeredDerivStencil,
    grid: Grid,
    direction: Literal["face->node", "node->face"],
    closure: Closure = "periodic",
    boundary_g: tuple | None = None,
) -> OperatorMatrix:
    """Matrix of the staggered difference delta(m) (includes 1/h)."""
    source, target = ("face", "node") if direction == "face->node" else ("node", "face")
    left = None
    if closure == "hos2d":
        if boundary_g is None:
            raise GridOpError("hos2d closure needs boundary row g")
        left = {Fraction(2 * j - 1, 2): boundary_g[j] for j in range(5)}
    M = _assemble(grid.J, b.stencil(), source, target, closure, 1.0 / grid.h, left_row=left, parity=-1)
    return OperatorMatrix(M, closure, source, target)


def node_deriv_matrix(
    d: NodeDerivStencil,
    grid: Grid,
    closure: Closure = "periodic",
    boundary_k: tuple | None = None,
) -> OperatorMatrix:
    """Matrix of the collocated derivative H(m) (includes 1/h)."""
    left = None
    if closure == "hos1d":
        if boundary_k is None:
            raise GridOpError("hos1d closure needs boundary row k")
        left = dict(zip((-1, 0, 1, 2, 3), boundary_k))
    M = _assemble(grid.J, d.stencil(), "node", "node", closure, 1.0 / grid.h, left_row=left, parity=-1)
    return OperatorMatrix(M, closure, "node", "node")


# ---------------------------------------------------------------------------
# application helpers
# ---------------------------------------------------------------------------


def _boundary_for(closure: str, which: str, m=None, msq=None):
    if closure == "periodic":
        return None
    if which == "l":
        return boundary_coeffs_hos1d(m, msq=msq)[0]
    if which == "k" and closure == "hos1d":
        return boundary_coeffs_hos1d(m, msq=msq)[1]
    if which == "g" and closure == "hos2d":
        return boundary_coeffs_hos2d(m, msq=msq)
    return None


def apply_mass(
    a: MassStencil,
    f: np.ndarray,
    closure: Closure = "periodic",
    location: Location = "node",
    boundary: BoundaryStencils | None = None,
) -> np.ndarray:
    """Apply A to a field.  Dirichlet node input has J+1 entries."""
    f = np.asarray(f, dtype=float)
    J = f.shape[0] - 1 if (closure != "periodic" and location == "node") else f.shape[0]
    l = boundary.l if boundary is not None else None
    return mass_matrix(a, J, location, closure, boundary_l=l).apply(f)


def apply_delta(
    b: StaggeredDerivStencil,
    f: np.ndarray,
    grid: Grid,
    direction: Literal["face->node", "node->face"],
    closure: Closure = "periodic",
    boundary: BoundaryStencils | None = None,
) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    g = boundary.g if boundary is not None else None
    return delta_matrix(b, grid, direction, closure, boundary_g=g).apply(f)


def apply_node_deriv(
    d: NodeDerivStencil,
    f: np.ndarray,
    grid: Grid,
    closure: Closure = "periodic",
    boundary: BoundaryStencils | None = None,
) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    k = boundary.k if boundary is not None else None
    return node_deriv_matrix(d, grid, closure, boundary_k=k).apply(f)


def solve_mass(
    a: MassStencil | OperatorMatrix,
    rhs: np.ndarray,
    closure: Closure = "periodic",
    location: Location = "node",
    boundary: BoundaryStencils | None = None,
) -> np.ndarray:
    """Invert A (square realizations only: periodic fields, Dirichlet faces)."""
    rhs = np.asarray(rhs, dtype=float)
    if isinstance(a, OperatorMatrix):
        op = a
    else:
        if closure != "periodic" and location == "node":
            raise GridOpError("the Dirichlet node mass operator is not square; solve on faces only")
        op = mass_matrix(a, rhs.shape[0], location, closure, boundary_l=boundary.l if boundary else None)
    M = op.matrix
    if M.shape[0] != M.shape[1]:
        raise GridOpError("solve_mass needs a square operator")
    try:
        f = np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError as exc:
        raise MassSolveError(f"mass operator is singular under the {op.closure} closure") from exc
    resid = np.max(np.abs(M @ f - rhs), initial=0.0)
    if resid > 1e-10 * max(1.0, np.max(np.abs(rhs), initial=0.0)):
        raise MassSolveError(f"mass operator is ill-conditioned under the {op.closure} closure (residual {resid:.2e})")
    return f


# ---------------------------------------------------------------------------
# inner products and norms
# ---------------------------------------------------------------------------


def cell_inner(P: np.ndarray, Q: np.ndarray, h: float) -> float:
    """<P, Q> = sum_i h P_i Q_i over the node entries given."""
    P, Q = np.asarray(P, dtype=float), np.asarray(Q, dtype=float)
    _check_len(Q, P.shape[0], "cell_inner")
    return float(h * np.dot(P, Q))


def face_inner(U: np.ndarray, V: np.ndarray, h: float) -> float:
    U, V = np.asarray(U, dtype=float), np.asarray(V, dtype=float)
    _check_len(V, U.shape[0], "face_inner")
    return float(h * np.dot(U, V))


def l2_norm(f: np.ndarray, h: float) -> float:
    f = np.asarray(f, dtype=float)
    return float(np.sqrt(h * np.dot(f, f)))


def max_norm(f: np.ndarray) -> float:
    return float(np.max(np.abs(np.asarray(f, dtype=float)), initial=0.0))
