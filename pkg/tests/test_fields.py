import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from polarlab.errors import InvalidConstantError, InvalidGridError
from polarlab.fields import (
    ComplexField1D,
    Constants,
    Grid1D,
    PolarPair,
    RealField1D,
    d1,
    d2,
    decompose,
    diff1,
    diff2,
    grow_mask,
    interior,
    node_mask,
    observed_order,
    polar_history,
    read_field_csv,
    recompose,
    residual_report,
    split_uw,
    vector_identity_residual,
    wrap_action,
    write_columns_csv,
    write_field_csv,
)

coef = st.floats(-3, 3, allow_nan=False)


# ------------------------------------------------------------- grid and types

def test_grid_spacing_and_nodes():
    g = Grid1D(-1.0, 1.0, 5)
    assert g.dx == 0.5
    np.testing.assert_array_equal(g.x, [-1, -0.5, 0, 0.5, 1])


@pytest.mark.parametrize("args", [(0, 1, 2), (0, 1, 0), (1, 1, 10), (2, 1, 10), (0, math.inf, 10), (0, 1, 3.5)])
def test_grid_rejects_bad_extent(args):
    with pytest.raises(InvalidGridError):
        Grid1D(*args)


def test_periodic_grid_leaves_out_the_wrap_node():
    g = Grid1D.periodic(0.0, 2 * math.pi, 64)
    assert g.period == pytest.approx(2 * math.pi, rel=1e-15)
    assert g.x[-1] == pytest.approx(2 * math.pi - g.dx)
    r = g.refined_periodic()
    assert r.n == 128 and r.dx == pytest.approx(g.dx / 2)


def test_refined_keeps_old_nodes():
    g = Grid1D(-2.0, 3.0, 11)
    np.testing.assert_allclose(g.refined().x[::2], g.x, rtol=0, atol=1e-15)


def test_fields_validate_length_and_finiteness():
    g = Grid1D(0, 1, 4)
    with pytest.raises(ValueError):
        RealField1D(g, [1.0, 2.0])
    with pytest.raises(ValueError):
        RealField1D(g, [0, 1, np.nan, 2])
    with pytest.raises(ValueError):
        ComplexField1D(g, [0, 1, np.inf, 2])
    f = RealField1D(g, [0, 1, 2, 3])
    with pytest.raises(ValueError):
        f.values[0] = 5.0  # stored read-only


@pytest.mark.parametrize("kw", [dict(hbar=0), dict(c=-1), dict(m=-1), dict(hbar=math.nan), dict(lam=0.0)])
def test_constants_validation(kw):
    with pytest.raises(InvalidConstantError):
        Constants(**kw)


def test_canonical_constants_multiply_to_h():
    k = Constants.canonical(p_lam=0.7, hbar=1.3)
    assert k.lam * k.p_lam == pytest.approx(k.h, rel=1e-15)
    assert k.h == pytest.approx(2 * math.pi * 1.3)


# ------------------------------------------------------------- stencils

@given(coef, coef, coef)
def test_diff1_exact_on_quadratics(a, b, c):
    g = Grid1D(-2.0, 3.0, 21)
    x = g.x
    scale = 1 + abs(a) + abs(b) + abs(c)
    np.testing.assert_allclose(diff1(a + b * x + c * x * x, g.dx), b + 2 * c * x, atol=1e-12 * scale * 25)


@given(coef, coef, coef)
def test_diff2_exact_on_quadratics(a, b, c):
    g = Grid1D(-2.0, 3.0, 21)
    x = g.x
    scale = 1 + abs(a) + abs(b) + abs(c)
    np.testing.assert_allclose(diff2(a + b * x + c * x * x, g.dx), 2 * c, atol=1e-10 * scale)


def test_constant_and_linear_give_zero():
    g = Grid1D(0, 1, 9)
    assert np.all(diff1(np.full(9, 4.0), g.dx) == 0)
    np.testing.assert_allclose(diff2(3 * g.x - 1, g.dx), 0, atol=1e-12)


def _sup_error(n, f, df, op):
    g = Grid1D(-3.0, 3.0, n)
    return np.max(np.abs(op(f(g.x), g.dx) - df(g.x)))


def test_diff1_order_two_on_sine():
    e = [_sup_error(n, np.sin, np.cos, diff1) for n in (101, 201)]
    assert e[0] / e[1] == pytest.approx(4, rel=0.05)


def test_diff2_order_two_on_gaussian():
    def f(x):
        return np.exp(-x * x)

    def f2(x):
        return (4 * x * x - 2) * np.exp(-x * x)

    e = [_sup_error(n, f, f2, diff2) for n in (101, 201)]
    assert observed_order(*e) > 1.9


def test_diff2_fourth_order_option():
    def f2(x):
        return -np.sin(x)

    e = [_sup_error(n, np.sin, f2, lambda v, dx: diff2(v, dx, order=4)) for n in (41, 81)]
    assert observed_order(*e) > 3.8
    with pytest.raises(ValueError):
        diff2(np.zeros(8), 0.1, order=3)


def test_stencils_need_three_nodes():
    with pytest.raises(InvalidGridError):
        diff1(np.zeros(2), 0.1)
    with pytest.raises(InvalidGridError):
        diff2(np.zeros(2), 0.1)


def test_field_wrappers_keep_kind():
    g = Grid1D(0, 1, 11)
    assert isinstance(d1(RealField1D(g, g.x ** 2)), RealField1D)
    assert isinstance(d2(ComplexField1D(g, 1j * g.x ** 2)), ComplexField1D)
    np.testing.assert_allclose(d2(ComplexField1D(g, 1j * g.x ** 2)).values, 2j, atol=1e-10)


# ------------------------------------------------------------- polar split

def test_decompose_constant_one():
    g = Grid1D(0, 1, 16)
    p = decompose(ComplexField1D(g, np.ones(16)), 1.0)
    assert np.all(p.R.values == 1) and np.all(p.S.values == 0) and not p.node_mask.any()


@given(st.floats(-2.5, 2.5), st.floats(0.1, 3.0))
def test_pure_phase_unwraps_to_a_line(k, hbar):
    g = Grid1D(-4.0, 4.0, 257)
    assert abs(k * g.dx) < math.pi
    p = decompose(ComplexField1D(g, np.exp(1j * k * g.x)), hbar)
    np.testing.assert_allclose(p.R.values, 1.0, atol=1e-15)
    offset = p.S.values - hbar * k * g.x
    assert np.ptp(offset) < 1e-11 * hbar
    assert wrap_action(offset[:1], hbar)[0] == pytest.approx(0.0, abs=1e-11)


@given(st.lists(coef, min_size=4, max_size=4), st.floats(0.2, 2.0))
def test_unwrap_matches_smooth_phase_up_to_2pi_multiple(cs, hbar):
    g = Grid1D(-1.0, 1.0, 401)
    S0 = hbar * (cs[0] + cs[1] * g.x + cs[2] * g.x ** 2 + cs[3] * np.sin(3 * g.x))
    p = decompose(ComplexField1D(g, (1.5 + np.cos(g.x)) * np.exp(1j * S0 / hbar)), hbar)
    shift = p.S.values - S0
    n = np.round(shift / (2 * math.pi * hbar))
    assert np.ptp(n) == 0
    np.testing.assert_allclose(shift, n * 2 * math.pi * hbar, atol=1e-10 * hbar)


@given(st.lists(st.floats(-2, 2), min_size=6, max_size=6), st.floats(0.3, 2.0))
def test_round_trip_is_identity(cs, hbar):
    g = Grid1D(-2.0, 2.0, 129)
    x = g.x
    psi = (1.2 + np.sin(cs[0] * x) * 0.5 + 0.1 * cs[1]) * np.exp(1j * (cs[2] * x + cs[3] * x ** 2 + cs[4]))
    psi = psi + 0.05 * cs[5]
    assert np.min(np.abs(psi)) > 1e-3
    back = recompose(decompose(ComplexField1D(g, psi), hbar), hbar).values
    assert np.max(np.abs(back - psi) / np.abs(psi)) <= 1e-12


def test_recompose_examples():
    g = Grid1D(0, 1, 8)
    one = PolarPair(RealField1D(g, np.ones(8)), RealField1D(g, np.zeros(8)), np.zeros(8, bool))
    np.testing.assert_array_equal(recompose(one, 1.0).values, 1.0)
    hbar = 0.7
    two = PolarPair(RealField1D(g, np.full(8, 2.0)), RealField1D(g, np.full(8, math.pi * hbar)), np.zeros(8, bool))
    np.testing.assert_allclose(recompose(two, hbar).values, -2.0, atol=1e-15)


def test_recompose_then_decompose_returns_S_mod_2pi_hbar():
    g = Grid1D(0, 1, 50)
    hbar = 1.1
    S = hbar * (7.0 + 3.0 * g.x)
    back = decompose(recompose(PolarPair(RealField1D(g, np.ones(50)), RealField1D(g, S), np.zeros(50, bool)),
                               hbar), hbar)
    np.testing.assert_allclose(wrap_action(back.S.values - S, hbar), 0, atol=1e-12)


def test_nodes_are_masked_and_interpolated():
    g = Grid1D(0, 1, 11)
    psi = np.exp(1j * 0.3 * np.arange(11))
    psi[4:7] = 0.0
    p = decompose(ComplexField1D(g, psi), 1.0)
    np.testing.assert_array_equal(p.node_mask, np.isin(np.arange(11), [4, 5, 6]))
    # fill lies on the segment between the neighbouring unmasked values
    assert np.all(np.diff(p.S.values[3:8]) == pytest.approx(np.diff(p.S.values[3:8]).mean()))
    assert p.S.mask is not None and p.S.mask[5]


def test_all_masked_field_has_empty_unmasked_region():
    g = Grid1D(0, 1, 5)
    p = decompose(ComplexField1D(g, np.zeros(5)), 1.0)
    assert p.node_mask.all() and not p.unmasked.any()
    report = residual_report("r", np.ones(5), g, mask=p.node_mask)
    assert report.max_norm == 0.0


def test_node_mask_threshold():
    R = np.array([1.0, 1e-11, 2e-10, 0.0])
    np.testing.assert_array_equal(node_mask(R), [False, True, False, True])
    np.testing.assert_array_equal(node_mask(R, threshold=0.5), [False, True, True, True])


def test_grow_mask_widens_by_stencil_reach():
    m = np.zeros(9, bool)
    m[4] = True
    np.testing.assert_array_equal(np.flatnonzero(grow_mask(m)), [3, 4, 5])
    np.testing.assert_array_equal(np.flatnonzero(grow_mask(m, 2)), [2, 3, 4, 5, 6])
    m[:] = False
    m[0] = True
    np.testing.assert_array_equal(np.flatnonzero(grow_mask(m)), [0, 1])  # no wrap-around


def test_split_uw_examples():
    g = Grid1D(0, 1, 6)
    hbar = 1.3
    a = split_uw(PolarPair(RealField1D(g, np.ones(6)), RealField1D(g, np.zeros(6)), np.zeros(6, bool)), hbar)
    assert np.all(a.U.values == 1) and np.all(a.W.values == 0)
    b = split_uw(PolarPair(RealField1D(g, np.ones(6)), RealField1D(g, np.full(6, 0.5 * math.pi * hbar)),
                           np.zeros(6, bool)), hbar)
    np.testing.assert_allclose(b.U.values, 0, atol=1e-15)
    np.testing.assert_allclose(b.W.values, 1, atol=1e-15)


amp = st.one_of(st.just(0.0), st.floats(1e-6, 5.0))


@given(st.lists(amp, min_size=12, max_size=12), st.lists(st.floats(-50, 50), min_size=12, max_size=12))
def test_split_uw_identity(R, S):
    g = Grid1D(0, 1, 12)
    out = split_uw(PolarPair(RealField1D(g, R), RealField1D(g, S), np.array(R) == 0), 1.0)
    assert out.amplitude_error <= 1e-14 * max(1.0, max(R) ** 2)
    assert out.phase_error <= 1e-12


def test_polar_history_unwraps_in_time():
    g = Grid1D.periodic(0, 2 * math.pi, 64)
    t = 0.3 * np.arange(40)
    snaps = np.exp(1j * (g.x[None, :] - 2.5 * t[:, None]))  # wraps many times in time
    R, S, mask = polar_history(snaps, g, 1.0)
    np.testing.assert_allclose(np.diff(S, axis=0), -0.75, atol=1e-12)
    assert not mask.any() and np.all(R == pytest.approx(1.0))


# ------------------------------------------------------------- reports

def test_interior_excludes_only_end_nodes():
    np.testing.assert_array_equal(interior(5), [False, True, True, True, False])
    np.testing.assert_array_equal(interior(5, [0, 0, 1, 0, 0]), [False, True, False, True, False])


def test_residual_report_norms():
    g = Grid1D(0, 4, 5)
    r = residual_report("r", [100.0, 1.0, -3.0, 2.0, 100.0], g, tolerance=2.5)
    assert r.max_norm == 3.0
    assert r.l2_norm == pytest.approx(math.sqrt(14.0))
    assert r.passed is False
    assert residual_report("r", np.zeros(5), g).passed is None


def test_observed_order_and_floor():
    assert observed_order(4e-4, 1e-4) == pytest.approx(2.0)
    assert observed_order(1e-15, 2e-16, floor=1e-12) == math.inf
    assert observed_order(0.0, 1e-3) == -math.inf
    assert observed_order(8.0, 1.0, ratio=2.0) == pytest.approx(3.0)


def test_vector_identity_examples():
    g = Grid1D(-1, 1, 41)
    assert vector_identity_residual(RealField1D(g, np.full(41, 2.5))).max_norm == 0.0
    quad = vector_identity_residual(RealField1D(g, g.x ** 2))
    # S dS = 2x^3 is cubic, so the centred d1 adds exactly dx^2 f'''/6 = 2 dx^2 in the interior
    np.testing.assert_allclose(quad.residual[1:-1], 2 * g.dx ** 2, rtol=1e-9)
    x = g.x
    terms = (6 * x ** 2, 4 * x ** 2, 2 * x ** 2)  # analytic d(S dS), (dS)^2, S d2S for S = x^2
    np.testing.assert_allclose(terms[0] - terms[1] - terms[2], 0.0, atol=1e-15)


def test_vector_identity_converges_on_sine():
    g = Grid1D(-math.pi, math.pi, 101)
    rep = vector_identity_residual(RealField1D(g, np.sin(g.x)), profile=np.sin)
    assert rep.max_norm > 0 and rep.order >= 1.8


# ------------------------------------------------------------- CSV

def test_field_csv_round_trip(tmp_path):
    g = Grid1D(-1.0, 2.0, 7)
    f = RealField1D(g, np.sqrt(np.arange(7.0)))
    write_field_csv(tmp_path / "r.csv", f)
    assert (tmp_path / "r.csv").read_text().splitlines()[0] == "x,value"
    back = read_field_csv(tmp_path / "r.csv")
    np.testing.assert_array_equal(back.values, f.values)
    z = ComplexField1D(g, np.exp(1j * g.x / 3))
    write_field_csv(tmp_path / "z.csv", z)
    assert (tmp_path / "z.csv").read_text().splitlines()[0] == "x,re,im"
    np.testing.assert_array_equal(read_field_csv(tmp_path / "z.csv").values, z.values)


def test_columns_csv_header_order(tmp_path):
    write_columns_csv(tmp_path / "c.csv", {"t": [0.0, 1.0], "R": [1.0, 2.0], "S": [3.0, 4.0]})
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines == ["t,R,S", "0,1,3", "1,2,4"]


def test_unknown_csv_header(tmp_path):
    (tmp_path / "bad.csv").write_text("a,b\n0,1\n1,2\n2,3\n")
    with pytest.raises(ValueError):
        read_field_csv(tmp_path / "bad.csv")
