"""Static SVG renderings of breakthrough, sweep and convergence CSVs.

Output is deterministic: a fixed SVG hash salt and no date metadata.
"""
from __future__ import annotations

import csv
import io
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

SVG_RC = {"svg.hashsalt": "imvl", "svg.fonttype": "none"}


class PlotInputError(ValueError):
    pass


def read_table(path: str | Path, numeric: tuple[str, ...]) -> list[dict]:
    """Read a CSV into dicts, converting ``numeric`` columns to float.

    Raises PlotInputError naming the offending row (1-based, header = row 1).
    """
    text = Path(path).read_text()
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        raise PlotInputError(f"{path}: empty CSV")
    missing = [c for c in numeric if c not in reader.fieldnames]
    if missing:
        raise PlotInputError(f"{path}: missing columns {missing}")
    rows = []
    for n, raw in enumerate(reader, start=2):
        row = dict(raw)
        for col in numeric:
            try:
                row[col] = float(raw[col])
            except (TypeError, ValueError):
                raise PlotInputError(f"{path}: row {n}: column {col!r} is not a number ({raw[col]!r})") from None
        rows.append(row)
    if not rows:
        raise PlotInputError(f"{path}: no data rows")
    return rows


def detect_kind(path: str | Path) -> str:
    with open(path, newline="") as fh:
        header = next(csv.reader(fh), None)
    if not header:
        raise PlotInputError(f"{path}: empty CSV")
    cols = set(header)
    if {"t_days", "length_m", "variant", "c_rel"} <= cols:
        return "breakthrough"
    if {"m_node", "m_stag", "eps_c2", "eps_z2"} <= cols:
        return "sweep"
    if {"J", "eps_c_2", "eps_z_2"} <= cols:
        return "convergence"
    raise PlotInputError(f"{path}: cannot tell what kind of table this is from columns {header}")


def _save(fig, out: Path) -> Path:
    out = Path(out)
    tmp = out.with_name(out.name + ".tmp")
    with plt.rc_context(SVG_RC):
        fig.savefig(tmp, format="svg", metadata={"Date": None})
    plt.close(fig)
    tmp.replace(out)
    return out


def plot_breakthrough(path, out) -> Path:
    rows = read_table(path, ("t_days", "length_m", "c_rel"))
    variants = sorted({r["variant"] for r in rows})
    fig, axes = plt.subplots(1, len(variants), figsize=(5 * len(variants), 3.8), squeeze=False, sharey=True)
    for ax, v in zip(axes[0], variants):
        for L in sorted({r["length_m"] for r in rows if r["variant"] == v}):
            sel = [r for r in rows if r["variant"] == v and r["length_m"] == L]
            ax.plot([r["t_days"] for r in sel], [r["c_rel"] for r in sel], label=f"{L:g} m")
        ax.set_title(v.upper())
        ax.set_xlabel("time (days)")
        ax.legend()
    axes[0][0].set_ylabel("C / C0 at outlet")
    fig.tight_layout()
    return _save(fig, out)


def plot_sweep(path, out) -> Path:
    rows = read_table(path, ("m_node", "m_stag", "eps_c2", "eps_z2"))
    mn = np.unique([r["m_node"] for r in rows])
    ms = np.unique([r["m_stag"] for r in rows])
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    for ax, key in zip(axes, ("eps_c2", "eps_z2")):
        grid = np.full((mn.size, ms.size), np.nan)
        for r in rows:
            i, j = np.searchsorted(mn, r["m_node"]), np.searchsorted(ms, r["m_stag"])
            v = r[key]
            grid[i, j] = math.log10(v) if v > 0 and math.isfinite(v) else np.nan
        im = ax.pcolormesh(ms, mn, grid, shading="nearest")
        fig.colorbar(im, ax=ax, label=f"log10 {key}")
        if np.any(np.isfinite(grid)):
            i, j = np.unravel_index(np.nanargmin(grid), grid.shape)
            ax.plot(ms[j], mn[i], "r*", markersize=12)
        ax.set_xlabel("m_stag")
        ax.set_ylabel("m_node")
        ax.set_title(key)
    fig.tight_layout()
    return _save(fig, out)


def plot_convergence(path, out) -> Path:
    cols = ("J", "eps_c_inf", "eps_c_2", "eps_z_inf", "eps_z_2")
    rows = read_table(path, cols)
    fig, ax = plt.subplots(figsize=(5, 4))
    J = [r["J"] for r in rows]
    for col in cols[1:]:
        ax.loglog(J, [r[col] for r in rows], "o-", label=col)
    ax.set_xlabel("J")
    ax.set_ylabel("error")
    ax.legend()
    fig.tight_layout()
    return _save(fig, out)


PLOTTERS = {"breakthrough": plot_breakthrough, "sweep": plot_sweep, "convergence": plot_convergence}


def plot_csv(path, out, kind: str = "auto") -> Path:
    if not Path(path).exists():
        raise PlotInputError(f"{path}: no such file")
    if kind == "auto":
        kind = detect_kind(path)
    if kind not in PLOTTERS:
        raise PlotInputError(f"unknown plot kind {kind!r}")
    return PLOTTERS[kind](path, out)
