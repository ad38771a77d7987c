from __future__ import annotations

import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from imvl.coefficients import (
    PRESETS,
    THEORETICAL_ORDER,
    DegenerateStencilError,
    SchemeParams,
    SchemeValidationError,
    boundary_coeffs_hos1d,
    boundary_coeffs_hos2d,
    boundary_stencils,
    classify_order,
    eighth_order_params,
    eighth_order_params_exact,
    get_scheme,
    imvl_moments,
    interior_mass_coeffs,
    moment_match_oracle,
    node_derivative_coeffs,
    sixth_order_a2,
    sixth_order_scheme,
    stability_diagnostics,
    staggered_derivative_coeffs,
    truncation_coeffs_node,
    truncation_coeffs_staggered,
)


def taylor_defect(mass, offs_a, deriv, offs_d, k):
    """Coefficient of h^k w^(k+1) in sum a_p w'(p h) - (1/h) sum d_q w(q h), exactly."""
    left = sum(a * F(p) ** k for a, p in zip(mass, offs_a)) / math.factorial(k)
    right = sum(d * F(q) ** (k + 1) for d, q in zip(deriv, offs_d)) / math.factorial(k + 1)
    return left - right


# -- goldens -----------------------------------------------------------------

MASS_GOLDEN = {
    "HOS1": ((F(1, 24), F(22, 24)), (F(1, 24), F(22, 24))),
    "HOS2": ((F(1, 6), F(4, 6)), (F(1, 6), F(4, 6))),
}


def test_hos1_hos2_mass_weights():
    for name, (stag, node) in MASS_GOLDEN.items():
        s = PRESETS[name]
        assert s.mass_stag.a == (0, stag[0], stag[1], stag[0], 0)
        assert s.mass_node.a == (0, node[0], node[1], node[0], 0)


def test_hos1_derivatives():
    s = PRESETS["HOS1"]
    assert (s.delta.b1, s.delta.b2) == (1, 0)
    assert s.node_deriv.full == (F(1, 16), F(-10, 16), 0, F(10, 16), F(-1, 16))


def test_hos2_derivatives():
    s = PRESETS["HOS2"]
    assert (s.delta.b1, s.delta.b2) == (F(5, 8), F(1, 8))
    assert (s.node_deriv.d1, s.node_deriv.d2) == (F(1, 2), 0)


def test_hos3_golden():
    s = PRESETS["HOS3"]
    golden = (F(7, 1440), F(151, 720), F(137, 240), F(151, 720), F(7, 1440))
    assert s.mass_stag.a == golden
    assert s.mass_node.a == golden
    assert (s.delta.b1, s.delta.b2) == (F(7, 16), F(3, 16))
    assert (s.node_deriv.d1, s.node_deriv.d2) == (F(14, 32), F(1, 32))


def test_hos4_golden():
    s = PRESETS["HOS4"]
    assert s.msq_stag == F(243, 119) and s.a2_stag == F(183, 76160)
    assert s.msq_node == F(24, 7) and s.a2_node == F(1, 70)
    assert s.mass_stag.a == (F(183, 76160), F(3057, 19040), F(3667, 5440), F(3057, 19040), F(183, 76160))
    assert s.mass_node.a == (F(1, 70), F(8, 35), F(18, 35), F(8, 35), F(1, 70))
    assert (s.delta.b1, s.delta.b2) == (F(1755, 2856), F(367, 2856))
    assert (s.node_deriv.d1, s.node_deriv.d2) == (F(32, 84), F(5, 84))
    assert s.m_stag == pytest.approx(9 * math.sqrt(3 / 119), abs=1e-15)
    assert s.m_node == pytest.approx(2 * math.sqrt(6 / 7), abs=1e-15)


def test_hos1d_boundary_rows():
    l, k = boundary_coeffs_hos1d(msq=F(1, 2))
    assert l == (F(26, 24), F(-5, 24), F(4, 24), F(-1, 24))
    assert k == (F(-5, 16), F(-10, 16), F(20, 16), F(-6, 16), F(1, 16))


def test_hos2d_boundary_rows():
    l, _ = boundary_coeffs_hos1d(msq=F(2))
    assert l == (F(8, 6), F(-5, 6), F(4, 6), F(-1, 6))
    g = boundary_coeffs_hos2d(msq=F(2))
    assert g == (F(-10, 8), F(15, 8), F(-9, 8), F(5, 8), F(-1, 8))


def test_float_path_matches_exact():
    for name, s in PRESETS.items():
        ex = interior_mass_coeffs(msq=s.msq_stag, a2=s.a2_stag).as_array()
        fl = interior_mass_coeffs(s.m_stag, float(s.a2_stag)).as_array()
        assert np.allclose(ex, fl, rtol=0, atol=1e-12), name
        bex = boundary_stencils(msq=s.msq_stag)
        bfl = boundary_stencils(s.m_stag)
        for row_e, row_f in ((bex.l, bfl.l), (bex.k, bfl.k), (bex.g, bfl.g)):
            assert np.allclose([float(v) for v in row_e], row_f, rtol=0, atol=1e-12)


# -- consistency properties ---------------------------------------------------

msq_st = st.fractions(min_value=F(1, 10), max_value=F(4), max_denominator=1000)
a2_st = st.fractions(min_value=F(-1, 50), max_value=F(1, 20), max_denominator=1000)


@settings(max_examples=60, deadline=None)
@given(msq_st, a2_st)
def test_stencil_sums(msq, a2):
    assert sum(interior_mass_coeffs(msq=msq, a2=a2).a) == 1
    assert sum(node_derivative_coeffs(msq=msq).full) == 0
    assert sum(staggered_derivative_coeffs(msq=msq).full) == 0
    b = boundary_stencils(msq=msq)
    assert sum(b.l) == 1
    assert sum(b.k) == 0
    assert sum(b.g) == 0


@settings(max_examples=40, deadline=None)
@given(msq_st, a2_st)
def test_truncation_matches_direct_taylor(msq, a2):
    a = interior_mass_coeffs(msq=msq, a2=a2)
    d = node_derivative_coeffs(msq=msq)
    b = staggered_derivative_coeffs(msq=msq)
    node = [taylor_defect(a.a, a.offsets, d.full, d.offsets, k) for k in range(9)]
    stag = [taylor_defect(a.a, a.offsets, b.full, b.offsets, k) for k in range(9)]
    for vals in (node, stag):
        assert all(vals[k] == 0 for k in (0, 1, 2, 3, 5, 7))
    tn = truncation_coeffs_node(msq=msq, a2=a2)
    ts = truncation_coeffs_staggered(msq=msq, a2=a2)
    assert (tn.e4, tn.e6, tn.e8) == (node[4], node[6], node[8])
    assert (ts.e4, ts.e6, ts.e8) == (stag[4], stag[6], stag[8])


def test_boundary_rows_fourth_order():
    # l: sum l_r v(r + 1/2) matches the interior moments about face 1/2
    for msq in (F(1, 2), F(2), F(7, 3)):
        b = boundary_stencils(msq=msq)
        mom = [F(1), F(0), msq / 12, F(0)]
        for k in range(4):
            assert sum(c * F(o) ** k for c, o in zip(b.l, b.l_offsets)) / math.factorial(k) == mom[k]
            # k row about node 1 and g row about face 1/2 act on w and give w'
            assert sum(c * F(o) ** (k + 1) for c, o in zip(b.k, b.k_offsets)) / math.factorial(k + 1) == mom[k]
            assert sum(c * F(o) ** (k + 1) for c, o in zip(b.g, b.g_offsets)) / math.factorial(k + 1) == mom[k]


def test_orders_of_presets():
    for name, s in PRESETS.items():
        assert s.order() == THEORETICAL_ORDER[name]


def test_hos4_e8_values():
    tr = PRESETS["HOS4"].truncation()
    assert tr["node"].e4 == 0 and tr["node"].e6 == 0
    assert tr["staggered"].e4 == 0 and tr["staggered"].e6 == 0
    assert tr["node"].e8 == F(1, 44100)
    assert tr["staggered"].e8 == F(69049, 6141542400)


def test_sixth_order_a2_constraints():
    for m in (0.8, 1.3, 1.7):
        assert sixth_order_a2("node", m) == pytest.approx(m * m / 72 - 1 / 30, abs=1e-15)
        assert sixth_order_a2("staggered", m) == pytest.approx(m * m / 288 - 3 / 640, abs=1e-15)
    assert sixth_order_a2("node", msq=F(11, 4)) == F(11, 288) - F(1, 30)
    s = sixth_order_scheme(1.6, 1.3)
    assert s.order() >= 6


def test_eighth_order_params_zero_e4_e6():
    for kind, fn in (("node", truncation_coeffs_node), ("staggered", truncation_coeffs_staggered)):
        m, a2 = eighth_order_params(kind)
        tc = fn(m, float(a2))
        assert abs(tc.e4) <= 1e-14
        assert abs(tc.e6) <= 1e-14
        assert classify_order(tc) == 8
    assert eighth_order_params_exact("node") == (F(24, 7), F(1, 70))
    assert eighth_order_params_exact("staggered") == (F(243, 119), F(183, 76160))


# -- moment-matching oracle ---------------------------------------------------


def test_imvl_moments_symmetric():
    m = 1.3
    assert np.allclose(imvl_moments(m), [1, 0, m * m / 12, 0], atol=1e-15)


def test_oracle_equivalence_random():
    rng = np.random.default_rng(20240601)
    for _ in range(100):
        m = rng.uniform(0.3, 2.0)
        a2 = rng.uniform(-0.02, 0.05)
        mom = imvl_moments(m)
        a = interior_mass_coeffs(m, a2)
        mass = moment_match_oracle(a.offsets, mom, pinned={2: a2})
        assert np.max(np.abs(mass - a.as_array())) <= 1e-12
        # derivative stencils reproduce the mass moments, shifted by one derivative
        d = node_derivative_coeffs(m)
        dh = moment_match_oracle(d.offsets, mom, deriv_shift=1)
        assert np.max(np.abs(dh - np.array(d.full, dtype=float))) <= 1e-12
        b = staggered_derivative_coeffs(m)
        bo = moment_match_oracle(b.offsets, mom, deriv_shift=1)
        assert np.max(np.abs(bo - np.array(b.full, dtype=float))) <= 1e-12
        bnd = boundary_stencils(m)
        l = moment_match_oracle(bnd.l_offsets, mom)
        assert np.max(np.abs(l - np.array(bnd.l, dtype=float))) <= 1e-12
        k = moment_match_oracle(bnd.k_offsets, mom, deriv_shift=1)
        assert np.max(np.abs(k - np.array(bnd.k, dtype=float))) <= 1e-12
        g = moment_match_oracle(bnd.g_offsets, mom, deriv_shift=1)
        assert np.max(np.abs(g - np.array(bnd.g, dtype=float))) <= 1e-12


def test_oracle_rejects_bad_systems():
    with pytest.raises(DegenerateStencilError):
        moment_match_oracle((0, 1, 1), [1, 0, 0])
    with pytest.raises(DegenerateStencilError):
        moment_match_oracle((-2, -1, 0, 1, 2), imvl_moments(1.0))  # one free weight left
    with pytest.raises(DegenerateStencilError):
        moment_match_oracle((-1, 1), [1, 0, 1])  # inconsistent


# -- stability and scheme resolution -------------------------------------------


def test_stability_hos1():
    s = PRESETS["HOS1"]
    rep = stability_diagnostics(s.mass_node, s.node_deriv)
    assert rep.R_a == pytest.approx(20 / 24, abs=1e-15)
    assert rep.R_b == pytest.approx(1.0, abs=1e-15)
    d1, d2 = 10 / 16, -1 / 16
    assert rep.R_d == pytest.approx(4 * d1**2 + 4 * d2**2 + 8 * abs(d1 * d2), abs=1e-15)


def test_unstable_parameters_rejected():
    with pytest.raises(SchemeValidationError, match="stability"):
        SchemeParams(m_stag=3.0, a2_stag=0.0, m_node=1.0, a2_node=0.0)
    with pytest.raises(SchemeValidationError):
        sixth_order_scheme(2.0, 1.3)


def test_get_scheme_forms():
    assert get_scheme("hos3") is PRESETS["HOS3"]
    s = get_scheme({"m_stag": 1.0, "a2_stag": 0.0, "m_node": 1.2, "a2_node": 0.01, "name": "x"})
    assert s.name == "x" and s.closure == "periodic"
    assert get_scheme(s) is s
    with pytest.raises(SchemeValidationError):
        get_scheme("HOS9")
    with pytest.raises(SchemeValidationError, match="missing"):
        get_scheme({"m_stag": 1.0})
    with pytest.raises(SchemeValidationError):
        get_scheme({"m_stag": float("nan"), "a2_stag": 0, "m_node": 1, "a2_node": 0})
