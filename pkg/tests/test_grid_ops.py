from __future__ import annotations

import math
from fractions import Fraction as F

import numpy as np
import pytest

from imvl.coefficients import PRESETS
from imvl.grid_ops import (
    Grid,
    GridOpError,
    MassSolveError,
    apply_delta,
    apply_mass,
    apply_node_deriv,
    cell_inner,
    delta_matrix,
    face_inner,
    l2_norm,
    mass_matrix,
    max_norm,
    node_deriv_matrix,
    solve_mass,
)
from imvl.coefficients import MassStencil


def test_grid_geometry():
    g = Grid(0.0, 2.0, 8)
    assert g.h == 0.25
    assert g.nodes.size == 9 and g.nodes[-1] == 2.0
    assert np.allclose(g.faces, np.arange(8) * 0.25 + 0.125)
    assert g.node_points(True).size == 8
    assert g.node_points(False).size == 9


def test_periodic_matrices_are_circulant():
    s = PRESETS["HOS3"]
    g = Grid(0.0, 1.0, 12)
    A = mass_matrix(s.mass_node, 12).matrix
    for r in range(12):
        assert np.allclose(np.roll(A[0], r), A[r])
    assert np.allclose(A, A.T)
    H = node_deriv_matrix(s.node_deriv, g).matrix
    assert np.allclose(H, -H.T)


def test_delta_directions_are_negative_transposes():
    for s in PRESETS.values():
        if s.closure != "periodic":
            continue
        g = Grid(0.0, 3.0, 15)
        fn = delta_matrix(s.delta, g, "face->node").matrix
        nf = delta_matrix(s.delta, g, "node->face").matrix
        assert np.allclose(fn, -nf.T, atol=1e-13)


def test_exact_on_polynomials_dirichlet():
    # one-sided rows are fourth order: exact on cubics
    g = Grid(0.0, 1.0, 10)
    x = g.nodes
    w = 1 + 2 * x - 3 * x**2 + x**3
    dw = 2 - 6 * x + 3 * x**2
    for name in ("HOS1-D", "HOS2-D"):
        s = PRESETS[name]
        b = s.boundary
        A_face = mass_matrix(s.mass_stag, 10, "face", name.lower().replace("-", ""), boundary_l=b.l).matrix
        closure = s.closure
        lhs = A_face @ (2 - 6 * g.faces + 3 * g.faces**2)
        rhs = apply_delta(s.delta, w, g, "node->face", closure, boundary=b)
        assert np.allclose(lhs, rhs, atol=1e-12), name
    s = PRESETS["HOS1-D"]
    Hw = apply_node_deriv(s.node_deriv, w, g, "hos1d", boundary=s.node_boundary)
    Adw = mass_matrix(s.mass_node, 10, "node", "hos1d").matrix @ dw
    assert np.allclose(Hw, Adw, atol=1e-12)


def test_hos1d_boundary_rows_in_matrix():
    g = Grid(0.0, 1.0, 10)
    s = PRESETS["HOS1-D"]
    A = mass_matrix(s.mass_stag, 10, "face", "hos1d", boundary_l=s.boundary.l).matrix
    assert np.allclose(A[0, :4], np.array([26, -5, 4, -1]) / 24)
    assert np.allclose(A[-1, -4:], np.array([-1, 4, -5, 26]) / 24)
    assert np.allclose(A[1, :3], np.array([1, 22, 1]) / 24)
    H = node_deriv_matrix(s.node_deriv, g, "hos1d", boundary_k=s.node_boundary.k).matrix
    assert H.shape == (9, 11)
    assert np.allclose(H[0, :5] * 16 * g.h, [-5, -10, 20, -6, 1])
    assert np.allclose(H[-1, -5:] * 16 * g.h, [-1, 6, -20, 10, 5])
    assert H[0, 0] == pytest.approx(-5 / (16 * g.h))


def test_hos2d_boundary_rows_in_matrix():
    g = Grid(0.0, 1.0, 10)
    s = PRESETS["HOS2-D"]
    nf = delta_matrix(s.delta, g, "node->face", "hos2d", boundary_g=s.boundary.g).matrix
    assert np.allclose(nf[0, :5] * 8 * g.h, [-10, 15, -9, 5, -1])
    assert np.allclose(nf[-1, -5:] * 8 * g.h, [1, -5, 9, -15, 10])
    fn = delta_matrix(s.delta, g, "face->node", "hos2d", boundary_g=s.boundary.g).matrix
    assert fn.shape == (9, 10)
    assert np.allclose(fn[0, :5] * 8 * g.h, [-10, 15, -9, 5, -1])


def test_missing_closure_is_an_error():
    g = Grid(0.0, 1.0, 10)
    s = PRESETS["HOS2"]
    with pytest.raises(GridOpError, match="closure"):
        delta_matrix(s.delta, g, "node->face", "hos1d")
    with pytest.raises(GridOpError):
        mass_matrix(s.mass_stag, 10, "face", "hos1d")
    with pytest.raises(GridOpError):
        mass_matrix(s.mass_stag, 4)


def test_apply_shape_checks():
    g = Grid(0.0, 1.0, 10)
    s = PRESETS["HOS1"]
    with pytest.raises(GridOpError, match="does not fit"):
        apply_delta(s.delta, np.ones(11), g, "face->node")
    with pytest.raises(GridOpError):
        cell_inner(np.ones(3), np.ones(4), 0.1)


def test_solve_mass_roundtrip_and_errors():
    s = PRESETS["HOS4"]
    rng = np.random.default_rng(1)
    f = rng.normal(size=16)
    rhs = apply_mass(s.mass_node, f)
    assert np.allclose(solve_mass(s.mass_node, rhs), f, atol=1e-13)
    # symbol 1/2 + cos(2 theta)/2 vanishes at theta = pi/2, i.e. the mode cos(pi k / 2) on J=8
    bad = MassStencil((0.25, 0.0, 0.5, 0.0, 0.25))
    with pytest.raises(MassSolveError):
        solve_mass(bad, np.cos(np.pi * np.arange(8) / 2))
    with pytest.raises(GridOpError):
        solve_mass(s.mass_node, np.ones(11), closure="hos1d", location="node")


def test_inner_products_and_norms():
    h = 0.5
    P, Q = np.array([1.0, 2.0, 3.0]), np.array([1.0, 0.0, -1.0])
    assert cell_inner(P, Q, h) == pytest.approx(-1.0)
    assert face_inner(P, P, h) == pytest.approx(7.0)
    # a constant offset kappa over length L has l2 norm kappa sqrt(L)
    g = Grid(0.0, 3.0, 30)
    assert l2_norm(np.full(30, 0.2), g.h) == pytest.approx(0.2 * math.sqrt(3.0))
    assert max_norm(np.array([0.5, -2.0])) == 2.0
    assert max_norm(np.array([])) == 0.0


def test_exact_fraction_stencils_assemble_to_floats():
    s = PRESETS["HOS1"]
    assert isinstance(s.mass_node.a[1], F)
    A = mass_matrix(s.mass_node, 6).matrix
    assert A.dtype == float
    assert A[0, 0] == pytest.approx(22 / 24)
