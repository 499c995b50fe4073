import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polarlab import relativistic as rel
from polarlab.errors import (
    ConfigurationError,
    DomainExitError,
    InvalidConstantError,
    UndefinedConstraintError,
)
from polarlab.fields import ComplexField1D, Constants, Grid1D, RealField1D, observed_order
from polarlab.schrodinger import WaveHistory

TWO_PI = 2 * math.pi
ONE = Constants()
MASSLESS = Constants(m=0.0)


def _ring(n, length=TWO_PI, x_min=0.0):
    return Grid1D.periodic(x_min, length, n)


# ------------------------------------------------------------- stability

def _leapfrog_radius(dx, dt, consts):
    """Spectral radius of the leapfrog companion matrix for the highest grid mode."""
    lam = (consts.c * dt) ** 2 * (4 / dx ** 2 + (consts.m * consts.c / consts.hbar) ** 2)
    return max(abs(np.linalg.eigvals(np.array([[2 - lam, -1.0], [1.0, 0.0]]))))


def test_cfl_rejects_fast_steps():
    with pytest.raises(ConfigurationError):
        rel.check_cfl(0.1, 0.11, ONE)
    with pytest.raises(ConfigurationError):
        rel.check_cfl(0.1, 0.0, ONE)
    with pytest.raises(ConfigurationError):
        rel.check_cfl(0.1, float("nan"), ONE)
    rel.check_cfl(0.1, 0.1, MASSLESS)


@pytest.mark.parametrize("m", [0.5, 3.0, 20.0])
def test_mass_tightens_the_step_bound(m):
    consts = Constants(m=m)
    dx = 0.1
    bound = 2 / math.sqrt(4 / dx ** 2 + m ** 2)
    rel.check_cfl(dx, bound, consts)
    with pytest.raises(ConfigurationError):
        rel.check_cfl(dx, bound * 1.001, consts)
    if bound < 0.9 * dx:
        with pytest.raises(ConfigurationError, match="mass term"):
            rel.check_cfl(dx, 0.9 * dx, consts)  # passes c dt <= dx but not the mass bound
    # independent check of the bound: the highest mode stays on the unit circle below it
    assert _leapfrog_radius(dx, bound * (1 - 1e-6), consts) <= 1 + 1e-9
    assert _leapfrog_radius(dx, bound * 1.01, consts) > 1.01


def test_solver_rejects_unstable_step():
    g = _ring(64)
    with pytest.raises(ConfigurationError):
        rel.solve_kg(ComplexField1D(g, np.ones(64)), 0.0, ONE, 1.01 * g.dx, 10)
    with pytest.raises(ConfigurationError):
        rel.solve_kg(ComplexField1D(g, np.ones(64)), 0.0, ONE, 0.5 * g.dx, 1)


# ------------------------------------------------------------- Klein-Gordon

def test_kg_plane_wave_phase_error():
    g = _ring(512)
    k = rel.periodic_plane_wave_k(g, 1)
    steps = math.ceil(1.0 / (0.5 * g.dx))
    dt = 1.0 / steps
    hist = rel.solve_kg(*rel.initial_plane_wave(g, k, ONE), ONE, dt, steps)
    exact = rel.kg_plane_wave(g.x, hist.times[-1], k, ONE)
    assert hist.times[-1] == pytest.approx(1.0)
    assert np.max(np.abs(np.angle(hist.snapshots[-1] / exact))) <= 1e-4


def test_kg_plane_wave_phase_converges():
    errs = []
    for n in (64, 128):
        g = _ring(n)
        k = rel.periodic_plane_wave_k(g, 2)
        steps = 2 * n
        hist = rel.solve_kg(*rel.initial_plane_wave(g, k, ONE), ONE, 1.0 / steps, steps, save_every=steps // 2)
        errs.append(np.max(np.abs(hist.snapshots[-1] - rel.kg_plane_wave(g.x, 1.0, k, ONE))))
    assert observed_order(*errs) > 1.8


@settings(max_examples=4)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0.0, 2.0))
def test_kg_discrete_energy_is_conserved(seed, m):
    consts = Constants(m=m)
    g = _ring(64)
    rng = np.random.default_rng(seed)
    coef = rng.standard_normal((4, 2)) @ np.array([1, 1j])
    phi0 = sum(c * np.exp(1j * (j + 1) * g.x) for j, c in enumerate(coef))
    dphi0 = 0.3 * np.roll(phi0, 3)
    dt = 0.5 * g.dx
    hist = rel.solve_kg(ComplexField1D(g, phi0), ComplexField1D(g, dphi0), consts, dt, 10000)
    e = rel.kg_energy(hist, consts)
    assert np.max(np.abs(e - e[0])) / abs(e[0]) <= 1e-8


def test_massless_pulse_splits_exactly():
    g = _ring(256)
    pulse = rel.gaussian_pulse(g.x, math.pi, 0.3)
    steps = 32
    hist = rel.solve_kg(ComplexField1D(g, pulse), 0.0, MASSLESS, g.dx, steps)
    expected = 0.5 * (np.roll(pulse, steps) + np.roll(pulse, -steps))
    assert np.max(np.abs(hist.snapshots[-1] - expected)) <= 1e-12


def test_history_needs_three_levels():
    g = _ring(8)
    with pytest.raises(ValueError):
        rel.SecondOrderHistory(g, 0.1, np.zeros((2, 8), complex))
    with pytest.raises(ValueError):
        rel.damping(ONE, "maxwell")


# ------------------------------------------------------------- polar split

def test_massless_light_cone_residuals_vanish():
    g = _ring(256)
    k = rel.periodic_plane_wave_k(g, 2)
    hist = WaveHistory.from_function(g, lambda x, t: np.exp(1j * k * (x - t)), 0.5 * g.dx, 4)
    for fn in (rel.kg_polar_residuals, rel.telegraph_polar_residuals):
        rep = fn(hist, MASSLESS, 2)
        assert rep.amplitude.max_norm <= 1e-9
        assert rep.phase.max_norm <= 1e-9
        assert rep.light_cone.max_norm <= 1e-9
        assert rep.phase_wave.max_norm <= 1e-9


def test_constant_field_has_zero_residuals():
    g = _ring(32)
    hist = WaveHistory.from_function(g, lambda x, t: np.full(x.shape, 0.7 + 0.2j), 0.1, 2)
    for fn in (rel.kg_polar_residuals, rel.telegraph_polar_residuals):
        rep = fn(hist, MASSLESS, 1)
        assert rep.amplitude.max_norm == 0 and rep.phase.max_norm == 0


def test_kg_plane_wave_amplitude_equation_is_the_dispersion_relation():
    consts = Constants(m=1.3, c=0.8, hbar=0.9)
    g = _ring(128)
    k = rel.periodic_plane_wave_k(g, 3)
    d = rel.PolarDerivatives.exact(g.n, R=1.0, S=0.0, S_x=consts.hbar * k,
                                   S_t=-consts.hbar * rel.kg_frequency(k, consts))
    rep = rel.kg_polar_residuals(d, consts, grid=g)
    assert rep.amplitude.max_norm <= 1e-12 and rep.dispersion.max_norm <= 1e-12
    off = rel.PolarDerivatives.exact(g.n, R=1.0, S_x=consts.hbar * k, S_t=-1.1 * consts.hbar * rel.kg_frequency(k, consts))
    assert rel.kg_polar_residuals(off, consts, grid=g).amplitude.max_norm > 1e-2
    with pytest.raises(ValueError):
        rel.kg_polar_residuals(d, consts)
    with pytest.raises(TypeError):
        rel.PolarDerivatives.exact(4, R_xxx=1.0)


def test_massless_profile_residuals_converge():
    # any f(x - ct) solves the massless equations; here R and S both vary
    def f(x, t):
        xi = x - t
        return (1.2 + 0.3 * np.cos(xi)) * np.exp(1j * 2.0 * np.sin(xi))

    errs = {"amp": [], "phase": [], "wave": []}
    for n in (64, 128):
        g = _ring(n)
        hist = WaveHistory.from_function(g, f, 0.5 * g.dx, 2)
        rep = rel.kg_polar_residuals(hist, MASSLESS, 1)
        errs["amp"].append(rep.amplitude.max_norm)
        errs["phase"].append(rep.phase.max_norm)
        errs["wave"].append(rep.phase_wave.max_norm)
        assert rep.light_cone.max_norm <= 1e-2
    for e in errs.values():
        assert observed_order(*e) > 1.8


# ------------------------------------------------------------- masses

def test_kg_plane_wave_mass_of_amplitude_vanishes():
    consts = Constants(m=0.7, c=1.4)
    g = _ring(64)
    for mode in (1, 3, 7):
        k = rel.periodic_plane_wave_k(g, mode)
        w = rel.kg_frequency(k, consts)
        R = RealField1D(g, np.ones(g.n))
        S = RealField1D(g, consts.hbar * k * g.x + 2.0)
        rep = rel.effective_masses(R, S, 0.0, -consts.hbar * w, consts, "kg", S_x=consts.hbar * k)
        assert np.max(np.abs(rep.M_R2.values)) <= 1e-10
        assert np.all(rep.M_S2.values == 0)


def test_light_cone_masses():
    g = Grid1D(0.5, 3.0, 64)
    S = RealField1D(g, 2.0 * g.x)
    rep = rel.effective_masses(RealField1D(g, np.exp(-g.x)), S, np.exp(-g.x), -2.0, MASSLESS, "telegraph", S_x=2.0)
    assert np.all(rep.M_R2.values == 0)
    assert rep.which == "telegraph"


def test_phase_mass_oracle_and_masking():
    consts = Constants(m=1.0, c=2.0, hbar=0.5)
    g = Grid1D(-1.0, 1.0, 21)
    R = RealField1D(g, 1.0 + g.x ** 2)
    S = RealField1D(g, g.x)
    R_t, S_t = 0.3, -0.8
    rep = rel.effective_masses(R, S, R_t, S_t, consts, R_x=2 * g.x, S_x=1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        expected = (2 * 0.25 / 4) * (R_t * S_t / 4 - 2 * g.x) / ((1 + g.x ** 2) * g.x)
    keep = ~rep.M_S2.mask
    assert rep.M_S2.mask[10] and not keep[10]
    np.testing.assert_allclose(rep.M_S2.values[keep], expected[keep], rtol=1e-13)
    assert np.any(rep.M_S2.values < 0)  # negative values are kept as they are
    with pytest.raises(ValueError):
        rel.effective_masses(R, S, R_t, S_t, consts, "dirac")


def test_mass_csv(tmp_path):
    g = Grid1D(0, 1, 5)
    rep = rel.effective_masses(RealField1D(g, np.ones(5)), RealField1D(g, 1 + g.x), 0.0, 1.0, ONE)
    rep.to_csv(tmp_path / "m.csv")
    cols = np.genfromtxt(tmp_path / "m.csv", delimiter=",", names=True)
    assert cols.dtype.names == ("x", "MR2", "MS2")


# ------------------------------------------------------------- telegraph

def _decay_error(consts, dt_target, n=32):
    g = _ring(n, 1.0)
    rate = consts.m * consts.c ** 2 / consts.hbar
    t_end = 1.0 / rate
    steps = 2 * max(1, round(t_end / dt_target / 2))
    h = rel.solve_telegraph(ComplexField1D(g, np.ones(g.n)), -rate, consts, t_end / steps, steps)
    return float(np.max(np.abs(h.snapshots[-1] - math.exp(-1.0)))) / math.exp(-1.0), h


@pytest.mark.parametrize("consts", [ONE, Constants(m=2.0, c=0.5, hbar=1.5)])
def test_decay_mode_solver_error_and_order(consts):
    # keep rate * dt fixed: leapfrog rounding grows like 1/(rate dt)^2 and
    # floors the error near 1e-9 once rate * dt drops below ~1e-4
    rate = consts.m * consts.c ** 2 / consts.hbar
    e1, h = _decay_error(consts, 1e-3 / rate)
    e2, _ = _decay_error(consts, 5e-4 / rate)
    assert e1 <= 1e-6
    assert observed_order(e1, e2) > 1.8
    U, W = rel.subfield_check(h, consts, "telegraph")
    assert U.max_norm <= 1e-8 and W.max_norm == 0


def test_decay_mode_split_residuals_vanish():
    consts = Constants(m=1.7, c=1.1, hbar=0.8)
    g = _ring(16, 1.0)
    rate = consts.m * consts.c ** 2 / consts.hbar
    for t in (0.1, 0.5, 2.0):
        R = math.exp(-rate * t)
        d = rel.PolarDerivatives.exact(g.n, R=R, R_t=-rate * R, R_tt=rate * rate * R)
        rep = rel.telegraph_polar_residuals(d, consts, grid=g)
        assert rep.amplitude.max_norm <= 1e-8 * max(1.0, rate ** 2)
        assert rep.phase.max_norm == 0
        # the same mode is not a Klein-Gordon solution
        assert rel.kg_polar_residuals(d, consts, grid=g).amplitude.max_norm > 1e-3 * R


def test_decay_mode_sampled_residual_converges():
    g = _ring(16, 1.0)
    errs = []
    for dt in (1e-2, 5e-3):
        h = WaveHistory.from_function(g, lambda x, t: rel.decay_mode(x, t, ONE), dt, 2, t0=0.5)
        errs.append(rel.telegraph_polar_residuals(h, ONE, 1).amplitude.max_norm)
    assert observed_order(*errs) > 1.8


def test_massless_telegraph_is_the_wave_equation():
    g = _ring(128)
    pulse = ComplexField1D(g, rel.gaussian_pulse(g.x, 3.0, 0.4))
    a = rel.solve_telegraph(pulse, 0.0, MASSLESS, 0.5 * g.dx, 40)
    b = rel.solve_kg(pulse, 0.0, MASSLESS, 0.5 * g.dx, 40)
    np.testing.assert_array_equal(a.snapshots, b.snapshots)


@settings(max_examples=10)
@given(st.integers(0, 2 ** 32 - 1), st.sampled_from(["kg", "telegraph"]))
def test_solver_output_satisfies_the_real_equations(seed, equation):
    g = _ring(48)
    rng = np.random.default_rng(seed)
    psi0 = rng.standard_normal(48) + 1j * rng.standard_normal(48)
    solve = rel.solve_kg if equation == "kg" else rel.solve_telegraph
    h = solve(ComplexField1D(g, psi0), 0.0, ONE, 0.5 * g.dx, 6)
    scale = np.max(np.abs(h.snapshots)) / (0.5 * g.dx) ** 2
    for rep in rel.subfield_check(h, ONE, equation):
        assert rep.max_norm <= 1e-12 * scale


def test_plane_wave_subfields_converge():
    errs = []
    for n in (64, 128):
        g = _ring(n)
        k = rel.periodic_plane_wave_k(g, 2)
        h = WaveHistory.from_function(g, lambda x, t: rel.kg_plane_wave(x, t, k, ONE), 0.5 * g.dx, 2)
        U, W = rel.subfield_check(h, ONE, "kg")
        errs.append(max(U.max_norm, W.max_norm))
    assert observed_order(*errs) > 1.8


# ------------------------------------------------------------- hyperbola

@pytest.mark.parametrize("v", [0.0, 0.3, 0.6, 0.9])
def test_boost_family_sits_on_the_hyperbola(v):
    consts = Constants(m=1.3, c=2.0)
    g = Grid1D(-5, 5, 101)
    s_t, s_x = rel.boost_rates(v * consts.c, consts)
    hyp = rel.hyperbola_constraint(np.full(g.n, s_t), np.full(g.n, s_x), consts, grid=g)
    assert np.max(np.abs(hyp.values - 1.0)) <= 1e-12


@given(st.floats(-0.95, 0.95), st.floats(-5, 5), st.floats(0.2, 3), st.floats(0.3, 3))
def test_boost_rates_match_the_phase(v, offset, m, c):
    consts = Constants(m=m, c=c)
    s_t, s_x = rel.boost_rates(v * c, consts)
    h = 1e-4
    x, t = 0.3, 0.7
    num_t = (rel.boost_phase(x, t + h, v * c, consts, offset) - rel.boost_phase(x, t - h, v * c, consts, offset)) / (2 * h)
    num_x = (rel.boost_phase(x + h, t, v * c, consts, offset) - rel.boost_phase(x - h, t, v * c, consts, offset)) / (2 * h)
    assert num_t == pytest.approx(s_t, rel=1e-7, abs=1e-7)
    assert num_x == pytest.approx(s_x, rel=1e-7, abs=1e-7)
    assert abs(rel.hyperbola_constraint(s_t, s_x, consts) - 1.0) <= 1e-12


def test_sampled_boost_phase_on_the_hyperbola():
    g = Grid1D(-5, 5, 101)
    for v in (0.0, 0.6):
        h = WaveHistory.from_function(g, lambda x, t: np.exp(1j * rel.boost_phase(x, t, v, ONE, 1.3)), 1e-3, 2, t0=0.7)
        d = rel.PolarDerivatives.from_history(h, 1.0, 1)
        assert np.max(np.abs(rel.hyperbola_constraint(d.S_t, d.S_x, ONE) - 1.0)[1:-1]) <= 1e-10


def test_hyperbola_edge_cases():
    with pytest.raises(UndefinedConstraintError):
        rel.hyperbola_constraint(1.0, 0.0, MASSLESS)
    # a static phase S = p x has S_t = 0 and falls below 1
    assert rel.hyperbola_constraint(0.0, 0.8, ONE) == pytest.approx(-0.64)
    with pytest.raises(ValueError):
        rel.boost_rates(1.0, ONE)


# ------------------------------------------------------------- static case

def test_static_exponential_matches_the_rest_energy():
    consts = Constants(m=1.2, c=0.9, hbar=0.8)
    g = Grid1D(0.0, 1.0, 201)
    mu = consts.m * consts.c / consts.hbar
    R, S, chk = rel.static_special_case(1.0, mu, 0.0, consts, g, stencil_order=4)
    np.testing.assert_allclose(R.values, np.exp(mu * g.x), rtol=1e-10)
    assert chk.max_norm <= 1e-10
    assert np.all(S.values == 0)


def test_static_first_integral_and_potential_order():
    consts = ONE
    g = Grid1D(0.0, 1.0, 201)
    errs = []
    for grid in (g, g.refined()):
        R, S, chk = rel.static_special_case(1.0, 0.2, 0.3, consts, grid)
        errs.append(chk.max_norm)
        assert chk.extra["R2_S_prime_drift"] <= 1e-12
        # S from the trapezoid rule: its stencil derivative recovers A/R^2 to second order
        s_x = np.gradient(S.values, grid.dx)
        assert np.max(np.abs(R.values ** 2 * s_x - 0.3)[1:-1]) <= 1e-5
    assert observed_order(*errs) > 1.8


def test_static_integration_reports_where_amplitude_vanishes():
    # A = 0: R = cosh x - 5 sinh x vanishes at artanh(0.2)
    g = Grid1D(0.0, 1.0, 101)
    with pytest.raises(DomainExitError) as info:
        rel.static_special_case(1.0, -5.0, 0.0, ONE, g)
    assert abs(info.value.x - math.atanh(0.2)) <= g.dx


def test_static_input_validation():
    g = Grid1D(0.0, 1.0, 11)
    with pytest.raises(ValueError):
        rel.static_special_case(0.0, 0.0, 0.1, ONE, g)
    with pytest.raises(ValueError):
        rel.static_special_case(1.0, 0.0, float("inf"), ONE, g)
    with pytest.raises(InvalidConstantError):
        rel.static_special_case(1.0, 0.0, 0.1, MASSLESS, g)
    with pytest.raises(ValueError):
        rel.static_special_case(1.0, 0.0, 0.1, ONE, g, substeps=0)
