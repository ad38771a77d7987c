"""Fully discrete transport-adsorption solver.

Each time step solves the coupled system for ``(C^{n+1}, Z^{n+1})`` with a
monolithic Newton iteration:

* node balance  ``A(C + Phi)^{n+1} - A(C + Phi)^n + dt [delta Z + conv - A f] = 0``
* flux relation ``delta C^{n+1} + A (Z / D)^{n+1} = 0``

``conv`` is ``A A*^{-1} H (u C)``.  The Euler stepper evaluates it at level
n (backward Euler in diffusion, explicit convection); Crank-Nicolson averages
the flux and convection over both levels and by default samples the source
at the half step (``cn_source="average"`` averages the two levels instead).  Under Dirichlet closures
``A = A*`` is required and ``conv = H^(u C)`` with one-sided boundary rows.

The node residual is multiplied through by ``dt`` so that its magnitude is
that of a concentration; the Newton tolerance applies to the max norm of the
stacked residual, relative to ``max(1, |U|_inf)``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Literal, Sequence

import numpy as np

from .coefficients import SchemeParams, get_scheme
from .grid_ops import (
    Grid,
    OperatorMatrix,
    delta_matrix,
    l2_norm,
    mass_matrix,
    max_norm,
    node_deriv_matrix,
)
from .isotherms import Isotherm

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    pass


class NewtonError(SolverError):
    def __init__(self, msg: str, history: Sequence[float] = ()):
        super().__init__(msg)
        self.history = list(history)


class SingularJacobianError(SolverError):
    pass


class StepFailure(SolverError):
    def __init__(self, step: int, t: float, cause: Exception):
        super().__init__(f"step {step} (t={t:.6g}) failed: {cause}")
        self.step, self.t, self.cause = step, t, cause


# ---------------------------------------------------------------------------
# problem description
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Periodic:
    pass


@dataclass(frozen=True)
class Dirichlet:
    left: Callable[[float], float]
    right: Callable[[float], float]


@dataclass(frozen=True)
class DirichletInletZeroFluxOutlet:
    """Fixed inlet concentration; outlet node copies its interior neighbour."""

    c_in: float


Boundary = Periodic | Dirichlet | DirichletInletZeroFluxOutlet


def _as_field(fn, x, *args) -> np.ndarray:
    return np.broadcast_to(np.asarray(fn(x, *args), dtype=float), x.shape).copy()


@dataclass
class Problem:
    grid: Grid
    velocity: Callable
    diffusion: Callable
    source: Callable
    isotherm: Isotherm
    boundary: Boundary
    initial: Callable
    exact_c: Callable | None = None
    exact_z: Callable | None = None
    name: str = "custom"

    def __post_init__(self):
        Dface = _as_field(self.diffusion, self.grid.faces)
        if not np.all(np.isfinite(Dface)) or np.min(Dface) <= 0:
            raise ValueError(f"diffusion must be positive on the faces (min {np.min(Dface):.3g})")
        c0 = _as_field(self.initial, self.grid.node_points(self.periodic))
        if np.min(c0) < 0:
            raise ValueError("initial concentration must be nonnegative")

    @property
    def periodic(self) -> bool:
        return isinstance(self.boundary, Periodic)

    @property
    def D_bounds(self) -> tuple[float, float]:
        D = _as_field(self.diffusion, self.grid.faces)
        return float(D.min()), float(D.max())


@dataclass(frozen=True)
class SolverConfig:
    scheme: SchemeParams | str
    stepper: Literal["euler", "cn"] = "euler"
    dt: float = 1e-3
    newton_tol: float = 1e-12
    newton_max_iters: int = 50
    cn_source: Literal["midpoint", "average"] = "midpoint"

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.newton_tol > 0 or self.newton_max_iters < 1:
            raise ValueError("Newton tolerance and iteration cap must be positive")
        if self.stepper not in ("euler", "cn"):
            raise ValueError(f"unknown stepper {self.stepper!r}")
        if self.cn_source not in ("midpoint", "average"):
            raise ValueError(f"unknown cn_source {self.cn_source!r}")
        object.__setattr__(self, "scheme", get_scheme(self.scheme))


@dataclass
class StepState:
    C: np.ndarray
    Z: np.ndarray
    Phi: np.ndarray
    t: float
    newton_iters: int = 0
    residual: float = 0.0


@dataclass
class MassLedgerRow:
    t: float
    mass_c: float
    mass_phi: float
    source: float
    eps_mass: float


@dataclass
class ErrorReport:
    eps_c_2: float
    eps_c_inf: float
    eps_z_2: float
    eps_z_inf: float

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.eps_c_2, self.eps_c_inf, self.eps_z_2, self.eps_z_inf)


@dataclass
class RunResult:
    problem: Problem
    config: SolverConfig
    initial: StepState
    final: StepState
    times: np.ndarray
    newton_iters: np.ndarray
    snapshots: dict[float, StepState] = field(default_factory=dict)
    ledger: list[MassLedgerRow] | None = None
    errors: ErrorReport | None = None

    def ledger_at(self, t: float, tol: float = 1e-9) -> MassLedgerRow:
        if self.ledger is None:
            raise SolverError("mass ledger exists only for periodic runs")
        for row in self.ledger:
            if abs(row.t - t) <= tol * max(1.0, abs(t)):
                return row
        raise KeyError(f"no ledger row at t={t}")


# ---------------------------------------------------------------------------
# Newton
# ---------------------------------------------------------------------------


_ROUNDOFF = 4 * np.finfo(float).eps


@dataclass
class NewtonResult:
    x: np.ndarray
    iterations: int  # steps needed to meet the tolerance
    history: list[float]
    polish_steps: int = 0


def newton_solve(
    residual_fn: Callable[[np.ndarray], np.ndarray],
    jacobian_fn: Callable[[np.ndarray], np.ndarray],
    guess: np.ndarray,
    tol: float = 1e-12,
    max_iters: int = 50,
    scale: Callable[[np.ndarray], float] | None = None,
    blocks: Sequence[tuple[str, slice]] = (),
    polish: bool = True,
) -> NewtonResult:
    """Plain Newton iteration with a dense direct solve.

    Converged when ``|F(x)|_inf <= tol * scale(x)`` (``scale`` defaults to 1).
    With ``polish`` the iteration continues past ``tol`` while the residual
    is above the round-off floor and still dropping tenfold per step; this
    keeps the per-step conservation defect (the sum of the node residuals)
    at round-off instead of at ``tol``.  Polishing steps are reported
    separately and not counted in ``iterations``.
    ``blocks`` names row ranges of the Jacobian for singularity diagnostics.
    """
    x = np.array(guess, dtype=float)
    sc = scale or (lambda _x: 1.0)
    F = residual_fn(x)
    hist = [max_norm(F)]
    it = 0
    met = 0 if hist[0] <= tol * sc(x) else None

    def done() -> bool:
        s = sc(x)
        if hist[-1] > tol * s:
            return False
        if not polish or it >= max_iters or hist[-1] <= _ROUNDOFF * s:
            return True
        return len(hist) > 1 and hist[-1] > 0.1 * hist[-2]

    while not done():
        if it >= max_iters:
            raise NewtonError(f"Newton did not converge in {max_iters} iterations (|F|={hist[-1]:.3e})", hist)
        Jm = jacobian_fn(x)
        try:
            dx = np.linalg.solve(Jm, -F)
        except np.linalg.LinAlgError as exc:
            raise SingularJacobianError(_singular_block(Jm, blocks)) from exc
        if not np.all(np.isfinite(dx)):
            raise SingularJacobianError(_singular_block(Jm, blocks))
        x_new = x + dx
        F_new = residual_fn(x_new)
        r_new = max_norm(F_new)
        if not math.isfinite(r_new):
            raise NewtonError("Newton iterate produced a non-finite residual", hist + [r_new])
        if hist[-1] <= tol * sc(x) and r_new >= hist[-1]:
            # polishing step hit the round-off floor; keep the better iterate
            break
        x, F = x_new, F_new
        it += 1
        hist.append(r_new)
        if met is None and r_new <= tol * sc(x):
            met = it
    return NewtonResult(x, met, hist, it - met)


def _singular_block(Jm: np.ndarray, blocks) -> str:
    for name, rows in blocks:
        sub = Jm[rows]
        if np.linalg.matrix_rank(sub) < sub.shape[0]:
            return f"singular Jacobian: rows of the {name} block are rank deficient"
    return "singular Jacobian"


# ---------------------------------------------------------------------------
# discretization
# ---------------------------------------------------------------------------


@dataclass
class Discretization:
    """Operator matrices and sampled coefficients for one (problem, scheme)."""

    problem: Problem
    scheme: SchemeParams
    closure: str
    A_node: OperatorMatrix  # node mass, rows = equation nodes
    A_face: OperatorMatrix
    delta_fn: OperatorMatrix  # faces -> equation nodes
    delta_nf: OperatorMatrix  # nodes -> faces
    conv: np.ndarray  # acts on u*C (all nodes)
    u: np.ndarray
    inv_D: np.ndarray
    D_face: np.ndarray
    xs: np.ndarray
    free: np.ndarray  # indices of unknown node values

    @property
    def n_free(self) -> int:
        return self.free.size


def _closure_for(problem: Problem, scheme: SchemeParams, variant: str | None) -> str:
    if problem.periodic:
        if variant not in (None, "periodic"):
            raise SolverError(f"closure {variant!r} requested for a periodic problem")
        return "periodic"
    closure = variant or (scheme.closure if scheme.closure != "periodic" else None)
    if closure not in ("hos1d", "hos2d"):
        raise SolverError("Dirichlet problems need the hos1d or hos2d closure (schemes HOS1-D / HOS2-D)")
    return closure


def discretize(problem: Problem, scheme: SchemeParams | str, variant: str | None = None) -> Discretization:
    scheme = get_scheme(scheme)
    closure = _closure_for(problem, scheme, variant)
    g = problem.grid
    periodic = closure == "periodic"
    xs = g.node_points(periodic)
    a, a_star = scheme.mass_stag, scheme.mass_node
    if not periodic and a.a != a_star.a:
        raise SolverError("Dirichlet closures require identical staggered and node mass stencils")
    bnd = scheme.boundary
    A_node = mass_matrix(a, g.J, "node", closure)
    A_face = mass_matrix(a, g.J, "face", closure, boundary_l=bnd.l)
    dfn = delta_matrix(scheme.delta, g, "face->node", closure, boundary_g=bnd.g if closure == "hos2d" else None)
    dnf = delta_matrix(scheme.delta, g, "node->face", closure, boundary_g=bnd.g if closure == "hos2d" else None)
    kbnd = scheme.node_boundary.k if closure == "hos1d" else None
    H = node_deriv_matrix(scheme.node_deriv, g, closure, boundary_k=kbnd)
    if periodic:
        A_star = mass_matrix(a_star, g.J, "node", closure)
        conv = A_node.matrix @ np.linalg.solve(A_star.matrix, H.matrix)
        free = np.arange(g.J)
    else:
        conv = H.matrix
        last = g.J + 1 if isinstance(problem.boundary, DirichletInletZeroFluxOutlet) else g.J
        free = np.arange(1, last)
    D_face = _as_field(problem.diffusion, g.faces)
    return Discretization(
        problem=problem,
        scheme=scheme,
        closure=closure,
        A_node=A_node,
        A_face=A_face,
        delta_fn=dfn,
        delta_nf=dnf,
        conv=conv,
        u=_as_field(problem.velocity, xs),
        inv_D=1.0 / D_face,
        D_face=D_face,
        xs=xs,
        free=free,
    )


def _boundary_values(problem: Problem, t: float) -> dict[int, float]:
    b, J = problem.boundary, problem.grid.J
    if isinstance(b, Dirichlet):
        return {0: float(b.left(t)), J: float(b.right(t))}
    if isinstance(b, DirichletInletZeroFluxOutlet):
        return {0: float(b.c_in)}
    return {}


def flux_recover(C: np.ndarray, problem: Problem, scheme: SchemeParams | str, disc: Discretization | None = None) -> np.ndarray:
    """Face flux Z solving ``delta C + A (Z/D) = 0`` for a given node field."""
    disc = disc or discretize(problem, scheme)
    rhs = -disc.delta_nf.apply(np.asarray(C, dtype=float))
    try:
        w = np.linalg.solve(disc.A_face.matrix, rhs)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"face mass operator singular under the {disc.closure} closure") from exc
    return disc.D_face * w


def initial_state(problem: Problem, scheme: SchemeParams | str, disc: Discretization | None = None) -> StepState:
    disc = disc or discretize(problem, scheme)
    C = _as_field(problem.initial, disc.xs)
    Z = flux_recover(C, problem, disc.scheme, disc)
    return StepState(C=C, Z=Z, Phi=problem.isotherm.phi(C), t=0.0)


def _cn_source(problem: Problem, xs: np.ndarray, t0: float, dt: float, how: str) -> np.ndarray:
    if how == "midpoint":
        return _as_field(problem.source, xs, t0 + 0.5 * dt)
    return 0.5 * (_as_field(problem.source, xs, t0) + _as_field(problem.source, xs, t0 + dt))


def _step(
    state: StepState,
    disc: Discretization,
    config: SolverConfig,
    dt: float,
    stepper: str,
) -> StepState:
    problem = disc.problem
    iso = problem.isotherm
    J = problem.grid.J
    t1 = state.t + dt
    Cn, Zn = state.C, state.Z
    Phin = iso.phi(Cn)
    An, Af, Dfn, Dnf, K = disc.A_node.matrix, disc.A_face.matrix, disc.delta_fn.matrix, disc.delta_nf.matrix, disc.conv
    u, invD, free = disc.u, disc.inv_D, disc.free
    zero_flux = isinstance(problem.boundary, DirichletInletZeroFluxOutlet)

    f1 = _as_field(problem.source, disc.xs, t1)
    base = An @ (Cn + Phin)
    if stepper == "euler":
        explicit = dt * (K @ (u * Cn) - An @ f1)
        half = 1.0
    else:
        fh = _cn_source(problem, disc.xs, state.t, dt, config.cn_source)
        explicit = dt * (0.5 * (Dfn @ Zn) + 0.5 * (K @ (u * Cn)) - An @ fh)
        half = 0.5

    C_full = Cn.copy()
    for i, v in _boundary_values(problem, t1).items():
        C_full[i] = v
    nf = free.size
    n_eq = An.shape[0]
    extra = 1 if zero_flux else 0

    def unpack(U):
        C = C_full.copy()
        C[free] = U[:nf]
        return C, U[nf:]

    def residual(U):
        C, Z = unpack(U)
        r1 = An @ (C + iso.phi(C)) - base + half * dt * (Dfn @ Z) + explicit
        if stepper == "cn":
            r1 = r1 + 0.5 * dt * (K @ (u * C))
        r2 = Dnf @ C + Af @ (Z * invD)
        parts = [r1, r2]
        if zero_flux:
            parts.append(np.array([C[J] - C[J - 1]]))
        return np.concatenate(parts)

    def jacobian(U):
        C, _ = unpack(U)
        Jm = np.zeros((n_eq + J + extra, nf + J))
        dpsi = 1.0 + iso.dphi(C[free])
        Jm[:n_eq, :nf] = An[:, free] * dpsi
        if stepper == "cn":
            Jm[:n_eq, :nf] += 0.5 * dt * K[:, free] * u[free]
        Jm[:n_eq, nf:] = half * dt * Dfn
        Jm[n_eq : n_eq + J, :nf] = Dnf[:, free]
        Jm[n_eq : n_eq + J, nf:] = Af * invD
        if zero_flux:
            Jm[-1, nf - 1] = 1.0
            Jm[-1, nf - 2] = -1.0
        return Jm

    guess = np.concatenate([C_full[free], Zn])
    res = newton_solve(
        residual,
        jacobian,
        guess,
        tol=config.newton_tol,
        max_iters=config.newton_max_iters,
        scale=lambda U: max(1.0, float(np.max(np.abs(U)))),
        blocks=(("node balance (A, delta)", slice(0, n_eq)), ("flux relation (delta, A/D)", slice(n_eq, n_eq + J))),
    )
    C, Z = unpack(res.x)
    return StepState(C=C, Z=Z.copy(), Phi=iso.phi(C), t=t1, newton_iters=res.iterations, residual=res.history[-1])


def _require(problem: Problem, periodic: bool):
    if problem.periodic != periodic:
        kind = "periodic" if periodic else "Dirichlet"
        raise SolverError(f"this stepper needs a {kind} problem")


def step_euler_periodic(state: StepState, problem: Problem, config: SolverConfig, disc: Discretization | None = None, dt: float | None = None) -> StepState:
    _require(problem, True)
    disc = disc or discretize(problem, config.scheme)
    return _step(state, disc, config, dt or config.dt, "euler")


def step_cn_periodic(state: StepState, problem: Problem, config: SolverConfig, disc: Discretization | None = None, dt: float | None = None) -> StepState:
    _require(problem, True)
    disc = disc or discretize(problem, config.scheme)
    return _step(state, disc, config, dt or config.dt, "cn")


def step_euler_dirichlet(
    state: StepState,
    problem: Problem,
    config: SolverConfig,
    variant: Literal["hos1d", "hos2d"] | None = None,
    disc: Discretization | None = None,
    dt: float | None = None,
) -> StepState:
    _require(problem, False)
    disc = disc or discretize(problem, config.scheme, variant)
    return _step(state, disc, config, dt or config.dt, "euler")


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------


def time_points(T: float, dt: float, report_times: Sequence[float] = ()) -> np.ndarray:
    """Step end times: multiples of dt, shortened to land exactly on T and on
    every report time."""
    n = max(1, math.ceil(T / dt - 1e-9))
    pts = [k * dt for k in range(1, n)] + [T]
    snap = 1e-9 * dt
    for r in report_times:
        if not 0 < r <= T:
            continue
        near = [i for i, p in enumerate(pts) if abs(p - r) <= snap]
        if near:
            pts[near[0]] = r
        else:
            pts.append(r)
    return np.array(sorted(set(pts)))


def compute_errors(state: StepState, problem: Problem) -> ErrorReport:
    if problem.exact_c is None or problem.exact_z is None:
        raise SolverError("problem has no exact solution")
    g = problem.grid
    xs = g.node_points(problem.periodic)
    ec = state.C - _as_field(problem.exact_c, xs, state.t)
    if not problem.periodic:
        ec = ec[1:-1]
    ez = state.Z - _as_field(problem.exact_z, g.faces, state.t)
    return ErrorReport(l2_norm(ec, g.h), max_norm(ec), l2_norm(ez, g.h), max_norm(ez))


def run(
    problem: Problem,
    config: SolverConfig,
    T: float,
    report_times: Sequence[float] = (),
    variant: str | None = None,
    keep_all: bool = False,
) -> RunResult:
    """Integrate from ``C^0 = c0(x_i)`` to time T."""
    if not T > 0:
        raise ValueError("T must be positive")
    if config.stepper == "cn" and not problem.periodic:
        raise SolverError("Crank-Nicolson is only provided for periodic problems")
    disc = discretize(problem, config.scheme, variant)
    state = initial_state(problem, config.scheme, disc)
    init = state
    g = problem.grid
    periodic = problem.periodic
    ledger = [] if periodic else None
    if periodic:
        m0 = g.h * float(np.sum(state.C) + np.sum(state.Phi))
        src = 0.0
    pts = time_points(T, config.dt, report_times)
    want = {float(r) for r in report_times}
    snaps: dict[float, StepState] = {}
    iters = np.zeros(pts.size, dtype=int)
    t_prev = 0.0
    for n, t1 in enumerate(pts):
        dt = float(t1 - t_prev)
        try:
            new = _step(state, disc, config, dt, config.stepper)
        except SolverError as exc:
            raise StepFailure(n + 1, float(t1), exc) from exc
        new.t = float(t1)
        if periodic:
            if config.stepper == "cn":
                f1 = _cn_source(problem, disc.xs, state.t, dt, config.cn_source)
            else:
                f1 = _as_field(problem.source, disc.xs, new.t)
            src += dt * g.h * float(np.sum(f1))
            mc, mp = g.h * float(np.sum(new.C)), g.h * float(np.sum(new.Phi))
            ledger.append(MassLedgerRow(new.t, mc, mp, src, abs(mc + mp - m0 - src)))
        iters[n] = new.newton_iters
        if keep_all or new.t in want:
            snaps[new.t] = new
        state, t_prev = new, float(t1)
    snaps[state.t] = state
    result = RunResult(problem, config, init, state, pts, iters, snaps, ledger)
    if problem.exact_c is not None and problem.exact_z is not None:
        result.errors = compute_errors(state, problem)
    log.debug("run %s J=%d T=%g steps=%d newton(max)=%d", problem.name, g.J, T, pts.size, iters.max(initial=0))
    return result
