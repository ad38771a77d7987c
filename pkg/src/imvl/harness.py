"""Verification experiments: convergence tables, mass reports, parameter
sweeps and breakthrough curves.

Studies fan independent runs out over a process pool when ``workers > 1``.
Jobs are rebuilt from case ids inside the workers (cases hold closures that
do not pickle) and results are reassembled in submission order, so output
does not depend on scheduling.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .cases import CASE_IDS, ManufacturedCase, builtin_case, pde_residual  # noqa: F401
from .coefficients import SchemeParams, get_scheme, sixth_order_scheme, SchemeValidationError
from .solver import (
    ErrorReport,
    MassLedgerRow,
    RunResult,
    SolverConfig,
    SolverError,
    compute_errors,
    run,
)


class HarnessError(RuntimeError):
    pass


def resolve_dt(rule: str | float, h: float) -> float:
    """Time step from a symbolic rule: ``"h3"``, ``"h4"`` or a number."""
    if isinstance(rule, (int, float)):
        dt = float(rule)
    else:
        key = str(rule).strip().lower().replace("^", "")
        if key == "h3":
            dt = h**3
        elif key == "h4":
            dt = h**4
        else:
            try:
                dt = float(key.removeprefix("fixed:"))
            except ValueError:
                raise HarnessError(f"unknown dt rule {rule!r}; use h3, h4 or a number") from None
    if not dt > 0:
        raise HarnessError(f"dt must be positive, got {dt}")
    return dt


def _as_case(case: str | ManufacturedCase) -> ManufacturedCase:
    return builtin_case(case) if isinstance(case, str) else case


def error_norms(result: RunResult, exact: ManufacturedCase | None = None) -> tuple[float, float, float, float]:
    """(eps_c2, eps_cinf, eps_z2, eps_zinf) of the final state of a run."""
    problem = result.problem
    if exact is not None:
        problem = exact.problem(problem.grid.J)
    try:
        return compute_errors(result.final, problem).as_tuple()
    except SolverError as exc:
        raise HarnessError(f"no exact solution available for {problem.name}") from exc


def rate(e1: float, e2: float, h1: float, h2: float) -> float:
    return math.log(e1 / e2) / math.log(h1 / h2)


# ---------------------------------------------------------------------------
# job fan-out
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Job:
    case_id: str
    case_kwargs: tuple
    J: int
    scheme: SchemeParams
    stepper: str
    dt: float
    T: float
    report_times: tuple = ()
    variant: str | None = None
    keep_all: bool = False


@dataclass
class _Outcome:
    errors: ErrorReport | None = None
    ledger: list[MassLedgerRow] | None = None
    newton_max: int = 0
    newton_total: int = 0
    steps: int = 0
    series: tuple | None = None
    failure: str | None = None


def _execute(job: _Job, case: ManufacturedCase | None = None) -> _Outcome:
    case = case or builtin_case(job.case_id, **dict(job.case_kwargs))
    try:
        res = run(
            case.problem(job.J),
            SolverConfig(job.scheme, job.stepper, job.dt),
            job.T,
            report_times=job.report_times,
            variant=job.variant,
            keep_all=job.keep_all,
        )
    except SolverError as exc:
        return _Outcome(failure=str(exc))
    out = _Outcome(
        errors=res.errors,
        ledger=res.ledger,
        newton_max=int(res.newton_iters.max(initial=0)),
        newton_total=int(res.newton_iters.sum()),
        steps=int(res.times.size),
    )
    if job.keep_all:
        ts = [0.0] + sorted(res.snapshots)
        out.series = (np.array(ts), np.array([res.initial.C[-1]] + [res.snapshots[t].C[-1] for t in ts[1:]]))
    return out


def _fan_out(jobs: Sequence[_Job], case: ManufacturedCase, workers: int) -> list[_Outcome]:
    workers = min(workers or 1, len(jobs), os.cpu_count() or 1)
    if workers <= 1 or case.id not in CASE_IDS:
        return [_execute(j, case) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_execute, jobs))


# ---------------------------------------------------------------------------
# convergence
# ---------------------------------------------------------------------------


@dataclass
class ConvergenceRow:
    J: int
    h: float
    dt: float
    errors: ErrorReport
    rates: tuple[float, float, float, float] | None = None
    newton_max: int = 0

    def as_list(self) -> list:
        """Columns in table order: J, c_inf, rate, c_2, rate, z_inf, rate, z_2, rate."""
        e = self.errors
        r = self.rates or (float("nan"),) * 4
        return [self.J, e.eps_c_inf, r[1], e.eps_c_2, r[0], e.eps_z_inf, r[3], e.eps_z_2, r[2]]


@dataclass
class ConvergenceTable:
    case_id: str
    scheme: str
    stepper: str
    dt_rule: str
    rows: list[ConvergenceRow] = field(default_factory=list)

    COLUMNS = ("J", "eps_c_inf", "rate_c_inf", "eps_c_2", "rate_c_2", "eps_z_inf", "rate_z_inf", "eps_z_2", "rate_z_2")

    @property
    def finest_rates(self) -> dict[str, float]:
        r = self.rows[-1].rates
        if r is None:
            raise HarnessError("need at least two rows for a rate")
        return dict(zip(("c_2", "c_inf", "z_2", "z_inf"), r))


def convergence_study(
    case: str | ManufacturedCase,
    preset: str | SchemeParams,
    J_list: Sequence[int],
    dt_rule: str | float = "h4",
    stepper: str = "euler",
    T: float | None = None,
    variant: str | None = None,
    workers: int = 1,
) -> ConvergenceTable:
    case = _as_case(case)
    scheme = get_scheme(preset)
    J_list = [int(j) for j in J_list]
    if any(b <= a for a, b in zip(J_list, J_list[1:])):
        raise HarnessError("J_list must be strictly increasing")
    T = case.T if T is None else T
    jobs = []
    for J in J_list:
        h = case.grid(J).h
        jobs.append(_Job(case.id, tuple(case.kwargs.items()), J, scheme, stepper, resolve_dt(dt_rule, h), T, variant=variant))
    outs = _fan_out(jobs, case, workers)
    table = ConvergenceTable(case.id, scheme.name or "custom", stepper, str(dt_rule))
    for job, out in zip(jobs, outs):
        if out.failure:
            raise HarnessError(f"J={job.J}: {out.failure}")
        if out.errors is None:
            raise HarnessError(f"case {case.id} has no exact solution")
        row = ConvergenceRow(job.J, case.grid(job.J).h, job.dt, out.errors, newton_max=out.newton_max)
        if table.rows:
            prev = table.rows[-1]
            row.rates = tuple(rate(a, b, prev.h, row.h) for a, b in zip(prev.errors.as_tuple(), row.errors.as_tuple()))
        table.rows.append(row)
    return table


# ---------------------------------------------------------------------------
# mass
# ---------------------------------------------------------------------------


def mass_report(result: RunResult, times: Iterable[float] | None = None) -> list[MassLedgerRow]:
    if not result.problem.periodic or result.ledger is None:
        raise HarnessError("mass reports are only supported for periodic runs")
    if times is None:
        return list(result.ledger)
    return [result.ledger_at(t) for t in times]


def mass_study(
    case: str | ManufacturedCase,
    preset: str | SchemeParams,
    J: int,
    dt: float,
    times: Sequence[float] = (0.2, 0.4, 0.6, 0.8),
    stepper: str = "euler",
) -> list[MassLedgerRow]:
    case = _as_case(case)
    res = run(case.problem(J), SolverConfig(get_scheme(preset), stepper, dt), max(times), report_times=times)
    return mass_report(res, times)


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


@dataclass
class SweepSurface:
    case_id: str
    m_node: np.ndarray
    m_stag: np.ndarray
    eps_c2: np.ndarray  # shape (len(m_node), len(m_stag)); nan for missing cells
    eps_z2: np.ndarray
    failures: dict = field(default_factory=dict)
    newton_max: int = 0

    def argmin(self, which: str = "c2") -> tuple[float, float]:
        arr = self.eps_c2 if which == "c2" else self.eps_z2
        if np.all(np.isnan(arr)):
            raise HarnessError("sweep produced no valid cells")
        i, j = np.unravel_index(np.nanargmin(arr), arr.shape)
        return float(self.m_node[i]), float(self.m_stag[j])

    @property
    def spacing(self) -> tuple[float, float]:
        return float(np.max(np.diff(self.m_node), initial=0)), float(np.max(np.diff(self.m_stag), initial=0))

    def long_rows(self) -> list[tuple[float, float, float, float]]:
        return [
            (float(a), float(b), float(self.eps_c2[i, j]), float(self.eps_z2[i, j]))
            for i, a in enumerate(self.m_node)
            for j, b in enumerate(self.m_stag)
        ]


def _axis(rng, spacing: float) -> np.ndarray:
    if np.ndim(rng) == 1 and len(rng) != 2:
        return np.asarray(rng, dtype=float)
    lo, hi = map(float, rng)
    n = max(2, int(math.ceil((hi - lo) / spacing - 1e-9)) + 1)
    return np.linspace(lo, hi, n)


def parameter_sweep(
    case: str | ManufacturedCase,
    m_node_range,
    m_stag_range,
    grid_density: float = 0.05,
    J: int = 20,
    dt_rule: str | float = "h3",
    stepper: str = "cn",
    T: float | None = None,
    workers: int = 1,
) -> SweepSurface:
    """Errors over a grid of (m_node, m_stag) with both a2 values tied to m by
    the sixth-order constraints.

    Ranges are ``(lo, hi)`` pairs sampled at spacing at most ``grid_density``,
    or explicit value arrays.  Unstable parameter pairs and failed runs
    become NaN cells and are listed in ``failures``.
    """
    case = _as_case(case)
    mn, ms = _axis(m_node_range, grid_density), _axis(m_stag_range, grid_density)
    T = case.T if T is None else T
    dt = resolve_dt(dt_rule, case.grid(J).h)
    ec = np.full((mn.size, ms.size), np.nan)
    ez = np.full_like(ec, np.nan)
    failures = {}
    jobs, where = [], []
    for i, a in enumerate(mn):
        for j, b in enumerate(ms):
            try:
                scheme = sixth_order_scheme(float(a), float(b))
            except SchemeValidationError as exc:
                failures[(float(a), float(b))] = str(exc)
                continue
            jobs.append(_Job(case.id, tuple(case.kwargs.items()), J, scheme, stepper, dt, T))
            where.append((i, j))
    outs = _fan_out(jobs, case, workers)
    for (i, j), out in zip(where, outs):
        if out.failure or out.errors is None:
            failures[(float(mn[i]), float(ms[j]))] = out.failure or "no errors"
            continue
        ec[i, j], ez[i, j] = out.errors.eps_c_2, out.errors.eps_z_2
    nmax = max((o.newton_max for o in outs), default=0)
    return SweepSurface(case.id, mn, ms, ec, ez, failures, nmax)


# ---------------------------------------------------------------------------
# breakthrough
# ---------------------------------------------------------------------------


@dataclass
class BreakthroughCurve:
    length: float
    variant: str
    t: np.ndarray
    c_rel: np.ndarray
    newton_max: int = 0

    def crossing_time(self, level: float) -> float:
        """First time C/C0 reaches ``level`` (linear interpolation); inf if never."""
        idx = np.nonzero(self.c_rel >= level)[0]
        if idx.size == 0:
            return math.inf
        k = int(idx[0])
        if k == 0:
            return float(self.t[0])
        t0, t1, c0, c1 = self.t[k - 1], self.t[k], self.c_rel[k - 1], self.c_rel[k]
        return float(t0 + (level - c0) * (t1 - t0) / (c1 - c0))


def breakthrough(
    lengths: Sequence[float] = (5.0, 10.0, 15.0),
    variant: str = "hos1d",
    resolution: float = 0.5,
    dt: float = 1.0,
    horizon: float = 1800.0,
    workers: int = 1,
) -> list[BreakthroughCurve]:
    """Outlet C/C0 time series of the lead column for each length."""
    if variant not in ("hos1d", "hos2d"):
        raise HarnessError(f"breakthrough variant must be hos1d or hos2d, got {variant!r}")
    scheme = get_scheme("HOS1-D" if variant == "hos1d" else "HOS2-D")
    jobs = []
    for L in lengths:
        J = int(round(L / resolution))
        if not math.isclose(J * resolution, L):
            raise HarnessError(f"column length {L} is not a multiple of the resolution {resolution}")
        jobs.append(_Job("ex6", (("length", float(L)), ("T", float(horizon))), J, scheme, "euler", dt, horizon, variant=variant, keep_all=True))
    case = builtin_case("ex6", length=lengths[0], T=horizon)
    if workers > 1:
        outs = _fan_out(jobs, case, workers)
    else:
        outs = [_execute(j, builtin_case("ex6", **dict(j.case_kwargs))) for j in jobs]
    c_in = case.params["c_in"]
    curves = []
    for L, out in zip(lengths, outs):
        if out.failure:
            raise HarnessError(f"column {L} m: {out.failure}")
        t, c = out.series
        curves.append(BreakthroughCurve(float(L), variant, t, c / c_in, out.newton_max))
    return curves
