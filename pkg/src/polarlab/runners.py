"""Operations available to scenario configs.

Each runner reads ``ctx.p``, reports every declared check through
``ctx.check`` and may dump fields with ``ctx.csv``.  Convergence checks use
one halving of (dx, dt) and report the observed order; families that are
exact up to rounding get order ``inf`` (fine-level residual below ``floor``).
"""
from __future__ import annotations

import math

import numpy as np

from . import canonical, dirac, relativistic as rel, schrodinger as sch
from .fields import (
    ComplexField1D,
    Constants,
    Grid1D,
    RealField1D,
    diff1,
    interior,
    observed_order,
    vector_identity_residual,
)
from .lab import CheckSpec, operation

TWO_PI = 2.0 * math.pi
PHYS = {"hbar": 1.0, "m": 1.0, "c": 1.0}


def _consts(p, **extra) -> Constants:
    return Constants(hbar=p["hbar"], m=p["m"], c=p.get("c", 1.0), **extra)


def _grid(p) -> Grid1D:
    return Grid1D(p["x_min"], p["x_max"], p["n"])


def _max(a, margin=1):
    a = np.abs(np.asarray(a))
    return float(np.nanmax(a[margin:len(a) - margin]))


def le(tol, equation, norm="max"):
    return CheckSpec(tol, "le", equation, norm)


def ge(tol, equation, norm="observed order"):
    return CheckSpec(tol, "ge", equation, norm)


# ------------------------------------------------------------ schrodinger-bohm

@operation(
    "separation_balance", "schrodinger-bohm",
    "separated phase S = 2mE/C + (C/4)x^2 and its balance S S''/m - S'^2/2m = E",
    dict(PHYS, E=1.0, C=2.0, x_min=-5.0, x_max=5.0, n=1024),
    {"balance_analytic": le(1e-12, "phase balance, exact derivatives"),
     "balance_stencil": le(1e-6, "phase balance, stencils"),
     "flux_analytic": le(1e-12, "divergence form of the phase balance, exact derivatives"),
     "flux_stencil": le(1e-4, "divergence form of the phase balance, stencils")},
)
def _separation(ctx):
    p = ctx.p
    grid = _grid(p)
    m, E, C = p["m"], p["E"], p["C"]
    S = sch.separation_solution(E, C, m, grid)
    s_x, s_xx = sch.separation_derivatives(C, grid)
    ctx.check("balance_analytic", np.max(np.abs(sch.phase_balance_residual(S, m, E, s_x, s_xx))))
    stencil = sch.phase_balance_residual(S, m, E)
    ctx.check("balance_stencil", _max(stencil))
    flux_exact = (s_x ** 2 + S.values * s_xx) / m - (3.0 * s_x ** 2 / (2.0 * m) + E)
    ctx.check("flux_analytic", np.max(np.abs(flux_exact)))
    flux = sch.phase_flux_residual(S, m, E)
    ctx.check("flux_stencil", _max(flux))
    ctx.csv("separation", {"x": grid.x, "S": S.values, "balance_stencil": stencil, "flux_stencil": flux})


def _order_profile(x):
    return np.sin(x) + 0.5 * np.cos(0.7 * x)


@operation(
    "spin_potential", "schrodinger-bohm",
    "spin potential V_S = -E - (C^2/8m) x^2 and spin force F = (C^2/4m) x for the separated phase",
    dict(PHYS, E=1.0, C=2.0, x_min=-5.0, x_max=5.0, n=1024, order_n=101, margin=2),
    {"VS_matches_paper": le(1e-6, "spin potential V_S = -S S''/m"),
     "force_matches_paper": le(1e-6, "spin force, both forms"),
     "force_forms_order": ge(1.8, "viscous force form vs -dV_S/dx")},
)
def _spin_potential(ctx):
    p = ctx.p
    grid = _grid(p)
    consts = _consts(p)
    m, E, C = p["m"], p["E"], p["C"]
    S = sch.separation_solution(E, C, m, grid)
    vs = sch.spin_potential(S, consts).values
    printed_v = -E - C * C / (8.0 * m) * grid.x ** 2
    ctx.check("VS_matches_paper", _max(vs - printed_v))
    direct, gradient = sch.spin_force(S, consts)
    printed_f = C * C / (4.0 * m) * grid.x
    margin = p["margin"]
    ctx.check("force_matches_paper", max(_max(direct.values - printed_f, margin),
                                         _max(gradient.values - printed_f, margin)))
    errs = []
    coarse = Grid1D(p["x_min"], p["x_max"], p["order_n"])
    for g in (coarse, coarse.refined()):
        a, b = sch.spin_force(RealField1D(g, _order_profile(g.x)), consts)
        errs.append(_max(a.values - b.values, margin))
    ctx.check("force_forms_order", observed_order(*errs))
    ctx.info["force_forms_gap"] = errs
    ctx.csv("spin_potential", {"x": grid.x, "VS": vs, "VS_printed": printed_v, "F_direct": direct.values,
                               "F_gradient": gradient.values, "F_printed": printed_f})


@operation(
    "scale_laws", "schrodinger-bohm",
    "scale invariance of V_Q under R -> beta R and quadratic scaling of V_S under S -> beta S",
    dict(PHYS, x_min=-5.0, x_max=5.0, n=33, betas=(0.5, 2.0, 3.7)),
    {"VQ_scale_invariance": le(1e-14, "V_Q(beta R) = V_Q(R)", "relative max"),
     "VS_quadratic_scaling": le(1e-14, "V_S(beta S) = beta^2 V_S(S)", "relative max")},
)
def _scale_laws(ctx):
    p = ctx.p
    grid = _grid(p)
    consts = _consts(p)
    x = grid.x
    R = RealField1D(grid, np.exp(-0.5 * x * x))
    S = RealField1D(grid, 1.0 + 0.5 * x * x)
    vq = sch.quantum_potential(R, consts).values
    vs = sch.spin_potential(S, consts).values
    worst_q = worst_s = 0.0
    for beta in p["betas"]:
        vq_b = sch.quantum_potential(RealField1D(grid, beta * R.values), consts).values
        vs_b = sch.spin_potential(RealField1D(grid, beta * S.values), consts).values
        q = _max(vq_b - vq) / _max(vq)
        s = _max(vs_b - beta * beta * vs) / _max(beta * beta * vs)
        ctx.info[f"beta={beta}"] = {"VQ": q, "VS": s}
        worst_q, worst_s = max(worst_q, q), max(worst_s, s)
    ctx.check("VQ_scale_invariance", worst_q)
    ctx.check("VS_quadratic_scaling", worst_s)


@operation(
    "madelung", "schrodinger-bohm",
    "real and imaginary parts of the Schrodinger equation after the polar split",
    dict(PHYS, family="free_packet", x_min=-6.0, x_max=6.0, n=201, dt=2e-3, steps=4,
         k=1.0, sigma0=0.8, x0=-0.5, omega=1.0, floor=1e-9),
    {"hj_order": ge(1.8, "quantum Hamilton-Jacobi equation"),
     "continuity_order": ge(1.8, "amplitude transport equation")},
)
def _madelung(ctx):
    """family: plane_wave or free_packet (analytic injection), harmonic (solver run)."""
    p = ctx.p
    consts = _consts(p)
    family = p["family"]
    coarse = _grid(p)
    hj, cont = [], []
    for g, dt in ((coarse, p["dt"]), (coarse.refined(), 0.5 * p["dt"])):
        steps = p["steps"] if g is coarse else 2 * p["steps"]
        if family == "plane_wave":
            k = p["k"]
            w = consts.hbar * k * k / (2.0 * consts.m)
            hist = sch.WaveHistory.from_function(g, lambda x, t: np.exp(1j * (k * x - w * t)), dt, steps)
            V = sch.PotentialSpec.free()
        elif family == "free_packet":
            hist = sch.WaveHistory.from_function(
                g, lambda x, t: sch.free_gaussian(x, t, consts, p["sigma0"], p["k"], p["x0"]), dt, steps)
            V = sch.PotentialSpec.free()
        elif family == "harmonic":
            V = sch.PotentialSpec.harmonic(p["omega"])
            psi0 = ComplexField1D(g, sch.harmonic_ground_state(g, consts, p["omega"]))
            hist = sch.solve_tdse(psi0, V, consts, dt, steps)
        else:
            raise ValueError(f"unknown family {family!r}")
        res = sch.madelung_residuals(hist, V, consts, len(hist) // 2)
        hj.append(res.hj.max_norm)
        cont.append(res.continuity.max_norm)
    floor = p["floor"]
    ctx.check("hj_order", observed_order(*hj, floor=floor))
    ctx.check("continuity_order", observed_order(*cont, floor=floor))
    ctx.info.update(hj=hj, continuity=cont)


@operation(
    "tdse_harmonic", "schrodinger-bohm",
    "Crank-Nicolson evolution of the harmonic ground state",
    dict(PHYS, omega=1.0, x_min=-8.0, x_max=8.0, n=1024, dt=1e-3, steps=100, norm_steps=1000),
    {"discrete_stationarity": le(1e-8, "|psi(t)| = |psi(0)| for the discrete eigenstate"),
     "continuum_order": ge(1.8, "|psi(t)| - |psi(0)| for the continuum Gaussian"),
     "norm_drift": le(1e-10, "sum |psi|^2 dx", "relative")},
)
def _tdse_harmonic(ctx):
    p = ctx.p
    consts = _consts(p)
    grid = _grid(p)
    V = sch.PotentialSpec.harmonic(p["omega"])
    _, disc = sch.discrete_ground_state(grid, V, consts)
    hist = sch.solve_tdse(ComplexField1D(grid, disc), V, consts, p["dt"], p["steps"])
    ctx.check("discrete_stationarity", np.max(np.abs(np.abs(hist.snapshots) - np.abs(disc))))
    devs = []
    for g in (grid, grid.refined()):
        psi0 = sch.harmonic_ground_state(g, consts, p["omega"])
        h = sch.solve_tdse(ComplexField1D(g, psi0), V, consts, p["dt"], p["steps"], save_every=p["steps"])
        devs.append(float(np.max(np.abs(np.abs(h.snapshots[-1]) - psi0))))
    ctx.check("continuum_order", observed_order(*devs))
    ctx.info["continuum_deviation"] = devs
    long = sch.solve_tdse(ComplexField1D(grid, sch.harmonic_ground_state(grid, consts, p["omega"])
                                         * np.exp(1j * np.sin(grid.x))),
                          V, consts, p["dt"], p["norm_steps"], save_every=p["norm_steps"] // 10)
    norms = long.norms()
    ctx.check("norm_drift", np.max(np.abs(norms - norms[0])) / norms[0])
    ctx.csv("final_state", {"x": grid.x, "re": hist.snapshots[-1].real, "im": hist.snapshots[-1].imag})


@operation(
    "tdse_free_gaussian", "schrodinger-bohm",
    "spreading of a free Gaussian packet",
    dict(PHYS, x_min=-12.0, x_max=12.0, n=2048, dt=1e-3, steps=500, sigma0=1.0),
    {"width_relative": le(1e-4, "sigma(t)^2 = sigma0^2 (1 + (hbar t / 2 m sigma0^2)^2)", "relative")},
)
def _tdse_free(ctx):
    p = ctx.p
    consts = _consts(p)
    grid = _grid(p)
    s0 = p["sigma0"]
    psi0 = sch.free_gaussian(grid.x, 0.0, consts, s0)
    hist = sch.solve_tdse(ComplexField1D(grid, psi0), sch.PotentialSpec.free(), consts, p["dt"], p["steps"],
                          save_every=p["steps"])
    t = p["dt"] * p["steps"]
    exact = s0 * math.sqrt(1.0 + (consts.hbar * t / (2.0 * consts.m * s0 * s0)) ** 2)
    ctx.check("width_relative", abs(sch.gaussian_width(hist.snapshots[-1], grid) - exact) / exact)


@operation(
    "vector_identity", "field-core",
    "vector identity d(S dS) = (dS)^2 + S d2S",
    dict(x_min=-math.pi, x_max=math.pi, n=65),
    {"identity_order": ge(1.8, "d(S S') - S'^2 - S S''")},
)
def _vector_identity(ctx):
    grid = _grid(ctx.p)
    rep = vector_identity_residual(RealField1D(grid, np.sin(grid.x)), profile=np.sin)
    ctx.check("identity_order", rep.order)


# ------------------------------------------------------------ canonical-dynamics

@operation(
    "canonical_reduced", "canonical-dynamics",
    "reduced Hamilton flow dR/dt = p_S/(lam m), dS/dt = p_lam p_S/m giving S - hR = const",
    dict(PHYS, p_S=1.0, p_lam=1.0, R0=0.0, S0=0.0, dt=1e-3, steps=10000, V_kind="zero"),
    {"hR_relation": le(1e-10, "S - S0 = h (R - R0)", "relative"),
     "slope_h": le(1e-10, "least-squares dS/dR = h", "relative"),
     "pS_drift": le(1e-12, "p_S conserved", "relative"),
     "pR_rate_linear_S": le(1e-10, "momentum rate of the amplitude for linear S")},
)
def _canonical(ctx):
    p = ctx.p
    consts = Constants.canonical(p["p_lam"], hbar=p["hbar"], m=p["m"])
    state = canonical.CanonicalState(p["R0"], p["S0"], 0.0, p["p_S"])
    traj = canonical.integrate_reduced(state, consts, p["V_kind"], p["dt"], p["steps"])
    h = consts.h
    dS, dR = traj.S[-1] - traj.S[0], traj.R[-1] - traj.R[0]
    ctx.check("hR_relation", abs(dS - h * dR) / abs(dS))
    ctx.check("slope_h", abs(traj.slope() - h) / h)
    ctx.check("pS_drift", np.max(np.abs(traj.p_S - traj.p_S[0])) / abs(traj.p_S[0]))
    g = Grid1D(-2.0, 2.0, 41)
    rate = canonical.p_r_rate_diagnostic(RealField1D(g, np.ones(g.n)), RealField1D(g, 0.7 * g.x), consts)
    ctx.check("pR_rate_linear_S", np.max(np.abs(rate.values[~rate.mask])))
    ctx.info["summary"] = traj.summary()
    traj.to_csv(ctx.artifact("trajectory.csv"))


@operation(
    "spin_split", "canonical-dynamics",
    "split with an S-dependent potential: Helmholtz amplitude and phase energy balance",
    dict(PHYS, k=1.0, p=0.7, x_min=0.0, x_max=6.0, n=101),
    {"helmholtz_order": ge(1.8, "R'' + (2 m E_S / hbar^2) R = 0"),
     "phase_energy": le(1e-10, "E_S - p_S^2/2m - V_T = 0 for linear S")},
)
def _spin_split(ctx):
    p = ctx.p
    consts = _consts(p)
    m, hbar, k, mom = consts.m, consts.hbar, p["k"], p["p"]
    E_S = hbar ** 2 * k * k / (2.0 * m)
    V = mom * mom / (2.0 * m) - E_S  # the sign that balances the phase energy
    errs = []
    coarse = _grid(p)
    for g in (coarse, coarse.refined()):
        helm, energy = canonical.spin_split_residuals(RealField1D(g, np.sin(k * g.x)), RealField1D(g, mom * g.x),
                                                      V, E_S, consts)
        errs.append(helm.max_norm)
        if g is coarse:
            ctx.check("phase_energy", energy.max_norm)
    ctx.check("helmholtz_order", observed_order(*errs))
    _, literal = canonical.spin_split_residuals(RealField1D(coarse, np.sin(k * coarse.x)),
                                                RealField1D(coarse, mom * coarse.x), -V, E_S, consts)
    ctx.info["phase_energy_with_V=E_S-p^2/2m"] = literal.max_norm


@operation(
    "dirac_canonical", "dirac-1d",
    "Dirac Hamilton flow dR/dt = p_S/(lam m), dS/dt = 2 p_S p_lam/m and H_S = p_S^2/m + m c^2",
    dict(PHYS, p_S=1.0, p_lam=1.0, dt=1e-3, steps=10000),
    {"slope_2h": le(1e-10, "dS/dR = 2h", "relative"),
     "HS_constant": le(1e-14, "H_S constant along the flow", "relative")},
)
def _dirac_canonical(ctx):
    p = ctx.p
    consts = Constants.canonical(p["p_lam"], hbar=p["hbar"], m=p["m"], c=p["c"])
    traj = dirac.dirac_canonical_flow(p["p_S"], consts, p["dt"], p["steps"])
    ctx.check("slope_2h", abs(traj.slope() - 2.0 * consts.h) / (2.0 * consts.h))
    H = dirac.dirac_hamiltonian_S(traj.p_S, consts)
    ctx.check("HS_constant", np.max(np.abs(H - H[0])) / abs(H[0]))


# ------------------------------------------------------------ dirac-1d

def _periodic(p) -> Grid1D:
    return Grid1D.periodic(p["x_min"], p["length"], p["n"])


@operation(
    "dirac_massless_packet", "dirac-1d",
    "massless transport: dR/dt = 0 and dS/dt = 0 along the chiral characteristics",
    dict(PHYS, m=0.0, x_min=-10.0, length=20.0, n=256, k=2.0, chirp=0.5, width=1.5, steps=4, floor=1e-9),
    {"DR_order": ge(1.8, "D+R = R_t + c R_x"),
     "DS_order": ge(1.8, "D+S = S_t + c S_x"),
     "solver_transport": le(1e-12, "D+-R and amplitude-weighted D+-S on the exact-shift solver run"),
     "chirality_norms": le(1e-12, "chi+ and chi- norms", "relative")},
)
def _dirac_massless(ctx):
    p = ctx.p
    consts = _consts(p)
    c = consts.c
    DR, DS = [], []
    coarse = _periodic(p)
    for g in (coarse, coarse.refined_periodic()):
        dt = 0.5 * g.dx / c
        steps = p["steps"] if g is coarse else 2 * p["steps"]
        t = dt * np.arange(steps + 1)
        chi_p = np.array([dirac.chiral_packet(g.x, tk, c, -2.0, p["width"], p["k"], p["chirp"]) for tk in t])
        hist = dirac.SpinorHistory.from_chiral(g, dt, chi_p, np.zeros_like(chi_p))
        rep = dirac.dirac_transport_residuals(hist, consts, steps // 2)
        DR.append(rep.raw["D+R"].max_norm)
        DS.append(rep.raw["D+S"].max_norm)
    ctx.check("DR_order", observed_order(*DR, floor=p["floor"]))
    ctx.check("DS_order", observed_order(*DS, floor=p["floor"]))
    ctx.info.update(DR=DR, DS=DS)
    g = coarse
    psi0 = dirac.SpinorField1D.from_chiral(g, dirac.chiral_packet(g.x, 0.0, c, -2.0, p["width"], p["k"]),
                                           0.5 * dirac.chiral_packet(g.x, 0.0, c, 3.0, p["width"], -p["k"], 0.0, -1))
    hist = dirac.solve_dirac(psi0, consts, g.dx / c, 40)
    rep = dirac.dirac_transport_residuals(hist, consts, 20)
    cp, cm = hist.chiral()
    # a phase carried by amplitude R has rounding error ~ eps max|psi| / R, so
    # D+-S is weighted by R / max R (the size of the error in psi itself)
    scale = max(np.max(np.abs(cp[20])), np.max(np.abs(cm[20])))
    worst = [rep.raw[f"D{s}R"].max_norm for s in "+-"]
    for s, chi in (("+", cp[20]), ("-", cm[20])):
        keep = interior(g.n, rep.masks[s])
        worst.append(float(np.max(np.abs(chi[keep]) / scale * np.abs(rep.raw[f"D{s}S"].residual[keep]))))
    ctx.check("solver_transport", max(worst))
    ctx.info.update(solver_DS_unweighted=max(rep.raw[f"D{s}S"].max_norm for s in "+-"))
    norms = [np.sum(np.abs(s) ** 2, axis=1) * g.dx for s in (cp, cm)]
    ctx.check("chirality_norms", max(float(np.max(np.abs(n - n[0])) / n[0]) for n in norms))
    hist.snapshot(len(hist) - 1).to_csv(ctx.artifact("spinor_final.csv"))


@operation(
    "dirac_rest_state", "dirac-1d",
    "rest eigenstate: dS/dt + beta m c^2 = 0 and d<R^2 S>/dt = -m c^2 <R^2>",
    dict(PHYS, x_min=0.0, length=TWO_PI, n=256, rate_steps=4, norm_steps=10000),
    {"phase_rate": le(1e-8, "dS/dt + beta m c^2 on the occupied component"),
     "spin_density_relative": le(1e-6, "d/dt sum R^2 S dx = -m c^2 sum beta R^2 dx", "relative"),
     "norm_drift": le(1e-12, "sum psi^dagger psi dx", "relative")},
)
def _dirac_rest(ctx):
    p = ctx.p
    consts = _consts(p)
    g = _periodic(p)
    psi0, _ = dirac.plane_wave_eigenspinor(g, 0.0, consts)
    dt = g.dx / consts.c
    hist = dirac.solve_dirac(psi0, consts, dt, p["rate_steps"])
    rep = dirac.dirac_transport_residuals(hist, consts, p["rate_steps"] // 2)
    ctx.check("phase_rate", rep.phase_rate["u"].max_norm)
    sd = dirac.dirac_spin_density_rate(hist, consts, p["rate_steps"] // 2)
    ctx.check("spin_density_relative", sd.relative_gap)
    ctx.info.update(rate=sd.rate, predicted=sd.predicted)
    long = dirac.solve_dirac(psi0, consts, dt, p["norm_steps"], save_every=p["norm_steps"] // 10)
    n = long.norms()
    ctx.check("norm_drift", np.max(np.abs(n - n[0])) / n[0])


@operation(
    "dirac_plane_wave", "dirac-1d",
    "positive-energy plane-wave eigenspinor acquires the phase exp(-iEt/hbar)",
    dict(PHYS, x_min=0.0, length=TWO_PI, n=256, p=1.0, t_end=1.0),
    {"amplitude_order": ge(1.8, "spinor error against the analytic eigenspinor"),
     "norm_drift": le(1e-12, "sum psi^dagger psi dx", "relative")},
)
def _dirac_plane(ctx):
    p = ctx.p
    consts = _consts(p)
    errs, drift = [], 0.0
    coarse = _periodic(p)
    for g in (coarse, coarse.refined_periodic()):
        psi0, E = dirac.plane_wave_eigenspinor(g, p["p"], consts)
        dt = g.dx / consts.c
        steps = max(2, round(p["t_end"] / dt))
        hist = dirac.solve_dirac(psi0, consts, dt, steps, save_every=steps)
        t = hist.times[-1]
        ph = np.exp(-1j * E * t / consts.hbar)
        errs.append(float(max(np.max(np.abs(hist.u[-1] - psi0.u * ph)), np.max(np.abs(hist.w[-1] - psi0.w * ph)))))
        n = hist.norms()
        drift = max(drift, float(np.max(np.abs(n - n[0])) / n[0]))
    ctx.check("amplitude_order", observed_order(*errs))
    ctx.check("norm_drift", drift)
    ctx.info["amplitude_error"] = errs


# ------------------------------------------------------------ relativistic-waves

@operation(
    "kg_plane_wave", "relativistic-waves",
    "Klein-Gordon split: amplitude equation reduces to E^2 = c^2 p^2 + m^2 c^4; M_R^2 vanishes",
    dict(PHYS, x_min=0.0, length=TWO_PI, n=512, mode=1, cfl=0.5, t_end=1.0, energy_steps=10000),
    {"phase_error": le(1e-4, "solver phase against exp(i(kx - wt))"),
     "energy_drift": le(1e-8, "discrete leapfrog energy", "relative"),
     "dispersion_residual": le(1e-6, "amplitude equation of the split, solver run"),
     "MR2_zero": le(1e-10, "M_R^2 = m^2 + S'^2/c^2 - S_t^2/c^4 on the analytic family"),
     "subfield_U": le(1e-9, "real part obeys the real equation"),
     "subfield_W": le(1e-9, "imaginary part obeys the real equation")},
)
def _kg_plane(ctx):
    p = ctx.p
    consts = _consts(p)
    g = _periodic(p)
    k = rel.periodic_plane_wave_k(g, p["mode"])
    steps = max(2, math.ceil(p["t_end"] * consts.c / (p["cfl"] * g.dx)))
    dt = p["t_end"] / steps
    phi0, dphi0 = rel.initial_plane_wave(g, k, consts)
    hist = rel.solve_kg(phi0, dphi0, consts, dt, steps)
    exact = rel.kg_plane_wave(g.x, hist.times[-1], k, consts)
    ctx.check("phase_error", np.max(np.abs(np.angle(hist.snapshots[-1] / exact))))
    rep = rel.kg_polar_residuals(hist, consts, len(hist) - 2)
    ctx.check("dispersion_residual", rep.amplitude.max_norm)
    ctx.info["dispersion_diagnostic"] = rep.dispersion.max_norm
    U, W = rel.subfield_check(hist, consts, "kg")
    ctx.check("subfield_U", U.max_norm)
    ctx.check("subfield_W", W.max_norm)
    ana = sch.WaveHistory.from_function(g, lambda x, t: rel.kg_plane_wave(x, t, k, consts), dt, 2)
    d = rel.PolarDerivatives.from_history(ana, consts.hbar, 1)
    masses = rel.effective_masses(RealField1D(g, d.R), RealField1D(g, d.S), d.R_t, d.S_t, consts, "kg")
    ctx.check("MR2_zero", _max(masses.M_R2.values))
    masses.to_csv(ctx.artifact("masses.csv"))
    # energy over energy_steps, in chunks so only two levels are carried
    energies = [float(rel.kg_energy(hist, consts)[0])]
    prev, cur = hist.snapshots[0], hist.snapshots[1]
    done, chunk = 1, 1000
    while done < p["energy_steps"]:
        n = min(chunk, p["energy_steps"] - done)
        h = rel.evolve_levels(prev, cur, g, consts, dt, max(n, 2), "kg")
        energies.append(float(rel.kg_energy(h, consts)[-1]))
        prev, cur = h.snapshots[-2], h.snapshots[-1]
        done += max(n, 2)
    e = np.array(energies)
    ctx.check("energy_drift", np.max(np.abs(e - e[0])) / abs(e[0]))


@operation(
    "massless_light_cone", "relativistic-waves",
    "massless fields: amplitude and phase both travel at c (S_t = -c S_x)",
    dict(PHYS, m=0.0, x_min=0.0, length=TWO_PI, n=256, mode=2, width=0.3),
    {"kg_amplitude": le(1e-9, "Klein-Gordon amplitude equation"),
     "kg_phase": le(1e-9, "Klein-Gordon phase equation"),
     "telegraph_amplitude": le(1e-9, "telegraph amplitude equation"),
     "telegraph_phase": le(1e-9, "telegraph phase equation"),
     "light_cone": le(1e-9, "|S_t| - c|S_x|"),
     "dalembert_split": le(1e-12, "pulse splits into left and right movers")},
)
def _massless(ctx):
    p = ctx.p
    consts = _consts(p)
    c = consts.c
    g = _periodic(p)
    k = rel.periodic_plane_wave_k(g, p["mode"])
    hist = sch.WaveHistory.from_function(g, lambda x, t: np.exp(1j * k * (x - c * t)), 0.5 * g.dx / c, 4)
    kg = rel.kg_polar_residuals(hist, consts, 2)
    tg = rel.telegraph_polar_residuals(hist, consts, 2)
    ctx.check("kg_amplitude", kg.amplitude.max_norm)
    ctx.check("kg_phase", kg.phase.max_norm)
    ctx.check("telegraph_amplitude", tg.amplitude.max_norm)
    ctx.check("telegraph_phase", tg.phase.max_norm)
    ctx.check("light_cone", kg.light_cone.max_norm)
    # at c dt = dx the massless leapfrog reproduces d'Alembert exactly on the grid
    x0 = g.x_min + 0.5 * g.period
    pulse = rel.gaussian_pulse(g.x, x0, p["width"])
    steps = g.n // 8
    h = rel.solve_kg(ComplexField1D(g, pulse), 0.0, consts, g.dx / c, steps)
    expected = 0.5 * (np.roll(pulse, steps) + np.roll(pulse, -steps))
    ctx.check("dalembert_split", np.max(np.abs(h.snapshots[-1] - expected)))
    ctx.csv("dalembert", {"x": g.x, "initial": pulse, "final": h.snapshots[-1].real})


@operation(
    "telegraph_decay", "relativistic-waves",
    "uniform decay mode exp(-m c^2 t/hbar) of the unified wave equation and its polar split",
    dict(PHYS, x_min=0.0, length=1.0, n=32, dt=1e-3, fd_dt=1e-2, times=(0.25, 0.5, 1.0)),
    {"decay_error": le(1e-6, "solver against exp(-m c^2 t/hbar) at t = hbar/mc^2", "relative"),
     "decay_order": ge(1.8, "solver error under dt halving"),
     "amplitude_residual": le(1e-8, "telegraph amplitude equation on the analytic mode"),
     "phase_residual": le(1e-8, "telegraph phase equation on the analytic mode"),
     "fd_residual_order": ge(1.8, "amplitude equation from sampled snapshots"),
     "subfield_U": le(1e-8, "real part obeys the real equation"),
     "subfield_W": le(1e-8, "imaginary part obeys the real equation")},
)
def _telegraph(ctx):
    p = ctx.p
    consts = _consts(p)
    g = _periodic(p)
    rate = consts.m * consts.c ** 2 / consts.hbar
    t_end = 1.0 / rate
    errs = []
    for dt in (p["dt"], 0.5 * p["dt"]):
        steps = 2 * max(1, round(t_end / dt / 2))
        h = rel.solve_telegraph(ComplexField1D(g, np.ones(g.n)), -rate, consts, t_end / steps, steps)
        errs.append(float(np.max(np.abs(h.snapshots[-1] - math.exp(-1.0)))) / math.exp(-1.0))
        if dt == p["dt"]:
            U, W = rel.subfield_check(h, consts, "telegraph")
            ctx.csv("decay", {"t": h.times, "psi": h.snapshots[:, 0].real, "exact": np.exp(-rate * h.times)})
    ctx.check("decay_error", errs[0])
    ctx.check("decay_order", observed_order(*errs))
    ctx.check("subfield_U", U.max_norm)
    ctx.check("subfield_W", W.max_norm)
    amp = phase = 0.0
    for t in p["times"]:
        R = math.exp(-rate * t)
        d = rel.PolarDerivatives.exact(g.n, R=R, R_t=-rate * R, R_tt=rate * rate * R)
        rep = rel.telegraph_polar_residuals(d, consts, grid=g)
        amp, phase = max(amp, rep.amplitude.max_norm), max(phase, rep.phase.max_norm)
    ctx.check("amplitude_residual", amp)
    ctx.check("phase_residual", phase)
    fd = []
    for dt in (p["fd_dt"], 0.5 * p["fd_dt"]):
        h = sch.WaveHistory.from_function(g, lambda x, t: rel.decay_mode(x, t, consts), dt, 2, t0=0.5 * t_end)
        fd.append(rel.telegraph_polar_residuals(h, consts, 1).amplitude.max_norm)
    ctx.check("fd_residual_order", observed_order(*fd))
    ctx.info.update(decay_error=errs, fd_residual=fd)


@operation(
    "hyperbola_boost", "relativistic-waves",
    "hyperbola S_t^2/(m^2 c^4) - S_x^2/(m^2 c^2) = 1 on boosted rest phases",
    dict(PHYS, velocities=(0.0, 0.3, 0.6, 0.9), offsets=(0.0, 1.3), x_min=-5.0, x_max=5.0, n=101, t=0.7,
         dt=1e-3, p_static=0.8),
    {"hyperbola_unit": le(1e-12, "constraint - 1, exact rates, every node"),
     "hyperbola_stencil": le(1e-10, "constraint - 1, rates from sampled phases")},
)
def _hyperbola(ctx):
    p = ctx.p
    consts = _consts(p)
    g = _grid(p)
    worst = worst_fd = 0.0
    for v in p["velocities"]:
        v = v * consts.c
        s_t, s_x = rel.boost_rates(v, consts)
        hyp = rel.hyperbola_constraint(np.full(g.n, s_t), np.full(g.n, s_x), consts, grid=g)
        worst = max(worst, float(np.max(np.abs(hyp.values - 1.0))))
        for off in p["offsets"]:
            h = sch.WaveHistory.from_function(
                g, lambda x, t: np.exp(1j * rel.boost_phase(x, t, v, consts, off) / consts.hbar), p["dt"], 2,
                t0=p["t"])
            d = rel.PolarDerivatives.from_history(h, consts.hbar, 1)
            worst_fd = max(worst_fd, _max(rel.hyperbola_constraint(d.S_t, d.S_x, consts) - 1.0))
    ctx.check("hyperbola_unit", worst)
    ctx.check("hyperbola_stencil", worst_fd)
    ps = p["p_static"]
    ctx.info["static_phase_constraint"] = float(rel.hyperbola_constraint(0.0, ps, consts))


@operation(
    "static_case", "relativistic-waves",
    "static amplitude and phase: S' = A/R^2 and V_Q = -m c^2/2 - A^2/(2 m R^4)",
    dict(PHYS, R0=1.0, R0_prime=0.2, A=0.3, x_min=0.0, x_max=1.0, n=201, substeps=4, exp_stencil_order=4),
    {"first_integral": le(1e-12, "R^2 S' = A"),
     "vq_order": ge(1.8, "V_Q + m c^2/2 + A^2/(2 m R^4)"),
     "vq_exponential": le(1e-10, "V_Q = -m c^2/2 for A = 0, R = exp(m c x/hbar)"),
     "S_prime_stencil": le(1e-5, "R^2 dS/dx - A from the integrated phase")},
)
def _static(ctx):
    p = ctx.p
    consts = _consts(p)
    grid = _grid(p)
    A = p["A"]
    errs = []
    for g in (grid, grid.refined()):
        R, S, chk = rel.static_special_case(p["R0"], p["R0_prime"], A, consts, g, p["substeps"])
        errs.append(chk.max_norm)
        if g is grid:
            ctx.check("first_integral", chk.extra["R2_S_prime_drift"])
            ctx.check("S_prime_stencil", _max(R.values ** 2 * diff1(S.values, g.dx) - A))
            ctx.csv("static", {"x": g.x, "R": R.values, "S": S.values, "VQ_residual": chk.residual})
    ctx.check("vq_order", observed_order(*errs))
    mu = consts.m * consts.c / consts.hbar
    _, _, chk = rel.static_special_case(1.0, mu, 0.0, consts, grid, p["substeps"], p["exp_stencil_order"])
    ctx.check("vq_exponential", chk.max_norm)
    ctx.info["vq_residual"] = errs
