"""Klein-Gordon and telegraph (damped Klein-Gordon) fields and their polar split.

    (1/c^2) psi_tt - psi_xx + gamma psi_t + (m c/hbar)^2 psi = 0

with gamma = 0 for Klein-Gordon and gamma = 2m/hbar for the telegraph
equation.  Solver grids are periodic (``Grid1D.periodic``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from . import kernels
from .errors import (
    ConfigurationError,
    DomainExitError,
    InvalidConstantError,
    SolverDivergedError,
    UndefinedConstraintError,
)
from .fields import (
    MASK_RATIO,
    ComplexField1D,
    Constants,
    Grid1D,
    RealField1D,
    diff1,
    diff2,
    residual_report,
    write_columns_csv,
)
from .schrodinger import WaveHistory, _mask_warnings, polar_slice

EQUATIONS = ("kg", "telegraph")


def _check_equation(equation):
    if equation not in EQUATIONS:
        raise ValueError(f"equation must be one of {EQUATIONS}, got {equation!r}")


def damping(consts: Constants, equation: str) -> float:
    """Coefficient of psi_t: 0 for Klein-Gordon, 2m/hbar for the telegraph equation."""
    _check_equation(equation)
    return 0.0 if equation == "kg" else 2.0 * consts.m / consts.hbar


@dataclass(frozen=True, eq=False)
class SecondOrderHistory(WaveHistory):
    """Uniformly spaced snapshots of a second-order-in-time field (>= 3 levels)."""

    def __post_init__(self):
        super().__post_init__()
        if len(self) < 3:
            raise ValueError("a second-order history needs at least 3 time levels")


def check_cfl(dx: float, dt: float, consts: Constants) -> None:
    """Reject steps the explicit three-level scheme cannot take.

    Besides dt <= dx/c the mass term tightens the leapfrog bound to
    c^2 dt^2 (4/dx^2 + (mc/hbar)^2) <= 4.
    """
    c = consts.c
    mu = consts.m * c / consts.hbar
    if not (math.isfinite(dt) and dt > 0):
        raise ConfigurationError(f"dt must be finite and > 0, got {dt!r}")
    if c * dt > dx * (1.0 + 1e-12):
        raise ConfigurationError(f"CFL violated: c dt = {c * dt!r} exceeds dx = {dx!r}")
    bound = 2.0 / (c * math.sqrt(4.0 / dx ** 2 + mu ** 2))
    if dt > bound * (1.0 + 1e-12):
        raise ConfigurationError(f"CFL violated: with the mass term dt must be <= {bound!r}, got {dt!r}")


def periodic_d2(u: np.ndarray, dx: float) -> np.ndarray:
    return (np.roll(u, -1, axis=-1) - 2.0 * u + np.roll(u, 1, axis=-1)) / dx ** 2


def _values(f, grid):
    if hasattr(f, "values"):
        return np.asarray(f.values, dtype=np.complex128)
    return np.broadcast_to(np.asarray(f, dtype=np.complex128), (grid.n,)).copy()


def _evolve(psi0, psi_dot0, consts, dt, n, equation, save_every):
    grid = psi0.grid
    dx = grid.dx
    check_cfl(dx, dt, consts)
    c = consts.c
    mu2 = (consts.m * c / consts.hbar) ** 2
    gamma = damping(consts, equation)
    u0 = _values(psi0, grid)
    v0 = _values(psi_dot0, grid)
    # Taylor start: u1 = u0 + dt u_t + dt^2/2 u_tt with u_tt taken from the equation
    acc0 = c * c * (periodic_d2(u0, dx) - gamma * v0 - mu2 * u0)
    u1 = u0 + dt * v0 + 0.5 * dt * dt * acc0
    return evolve_levels(u0, u1, grid, consts, dt, n, equation, save_every)


def evolve_levels(prev, cur, grid: Grid1D, consts: Constants, dt: float, n: int, equation: str = "kg",
                  save_every: int = 1) -> SecondOrderHistory:
    """Advance from two consecutive levels; ``prev`` is level 0 of the result."""
    check_cfl(grid.dx, dt, consts)
    if save_every < 1 or n // save_every < 2:
        raise ConfigurationError("a second-order history needs at least 3 saved levels (n // save_every >= 2)")
    c = consts.c
    a = 1.0 / (c * dt) ** 2
    b = 0.5 * damping(consts, equation) / dt
    mu2 = (consts.m * c / consts.hbar) ** 2
    try:
        snaps = kernels.wave_evolve(np.asarray(prev, dtype=np.complex128), np.asarray(cur, dtype=np.complex128),
                                    a, b, 1.0 / grid.dx ** 2, mu2, n, save_every)
    except FloatingPointError as exc:
        raise SolverDivergedError(exc.args[0] if exc.args else -1) from None
    return SecondOrderHistory(grid, dt * save_every, snaps)


def solve_kg(phi0, phi_dot0, consts: Constants, dt: float, n: int, save_every: int = 1) -> SecondOrderHistory:
    """Three-level leapfrog for the Klein-Gordon equation on a periodic grid."""
    return _evolve(phi0, phi_dot0, consts, dt, n, "kg", save_every)


def solve_telegraph(psi0, psi_dot0, consts: Constants, dt: float, n: int,
                    save_every: int = 1) -> SecondOrderHistory:
    """Leapfrog with the damping term centred as (psi+ - psi-)/2dt."""
    return _evolve(psi0, psi_dot0, consts, dt, n, "telegraph", save_every)


def kg_energy(history: WaveHistory, consts: Constants) -> np.ndarray:
    """Discrete leapfrog energy at the half levels n + 1/2.

    E = dx sum |u+ - u|^2 / (2 c^2 dt^2) + (1/2) Re conj(u+) K u, with
    K = -D2 + (mc/hbar)^2.  Exactly conserved by the Klein-Gordon scheme
    up to rounding; needs an unsubsampled history.
    """
    u = history.snapshots
    dx, dt, c = history.grid.dx, history.dt, consts.c
    mu2 = (consts.m * c / consts.hbar) ** 2
    Ku = -periodic_d2(u[:-1], dx) + mu2 * u[:-1]
    kinetic = np.sum(np.abs(u[1:] - u[:-1]) ** 2, axis=1) / (2.0 * c * c * dt * dt)
    potential = 0.5 * np.real(np.sum(np.conj(u[1:]) * Ku, axis=1))
    return dx * (kinetic + potential)


# ------------------------------------------------------------ polar split

@dataclass(frozen=True, eq=False)
class PolarDerivatives:
    """R, S and the derivatives entering the split equations at one time."""

    R: np.ndarray
    S: np.ndarray
    R_t: np.ndarray
    S_t: np.ndarray
    R_tt: np.ndarray
    S_tt: np.ndarray
    R_x: np.ndarray
    S_x: np.ndarray
    R_xx: np.ndarray
    S_xx: np.ndarray
    mask: np.ndarray

    @classmethod
    def from_history(cls, history: WaveHistory, hbar: float, t_index: int, threshold=None):
        """Centred differences in time, second-order stencils in space."""
        sl = polar_slice(history, hbar, t_index, threshold)
        dx = history.grid.dx
        return cls(sl.R, sl.S, sl.R_t, sl.S_t, sl.R_tt, sl.S_tt,
                   diff1(sl.R, dx), diff1(sl.S, dx), diff2(sl.R, dx), diff2(sl.S, dx), sl.mask)

    @classmethod
    def exact(cls, n: int, mask=None, **values):
        """Analytic values; missing derivatives default to zero."""
        names = ("R", "S", "R_t", "S_t", "R_tt", "S_tt", "R_x", "S_x", "R_xx", "S_xx")
        unknown = set(values) - set(names)
        if unknown:
            raise TypeError(f"unknown derivative names: {sorted(unknown)}")
        arrs = {k: np.broadcast_to(np.asarray(values.get(k, 0.0), dtype=float), (n,)).copy() for k in names}
        mask = np.zeros(n, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
        return cls(mask=mask, **arrs)


@dataclass(frozen=True, eq=False)
class PolarWaveReport:
    """Residuals of the amplitude and phase equations plus light-cone diagnostics.

    ``light_cone`` is |S_t| - c|S_x|, ``phase_wave`` is S_tt/c^2 - S_xx and
    ``dispersion`` is E^2 - c^2 p^2 - m^2 c^4 with E = -S_t, p = S_x.  The
    last three are diagnostics and carry no tolerance.
    """

    equation: str
    amplitude: object
    phase: object
    light_cone: object
    phase_wave: object
    dispersion: object
    mask: np.ndarray
    warnings: tuple = ()


def polar_wave_terms(d: PolarDerivatives, consts: Constants, equation: str):
    """Pointwise (amplitude, phase) imbalances of the split real/imaginary parts."""
    c, hbar, m = consts.c, consts.hbar, consts.m
    gamma = damping(consts, equation)
    amp = (d.R_tt / c ** 2 - d.R_xx + gamma * d.R_t
           + ((m * c / hbar) ** 2 + d.S_x ** 2 / hbar ** 2 - d.S_t ** 2 / (c * hbar) ** 2) * d.R)
    with np.errstate(divide="ignore", invalid="ignore"):
        coupling = 2.0 * (d.R_t * d.S_t / c ** 2 - d.R_x * d.S_x) / d.R
    phase = d.S_tt / c ** 2 - d.S_xx + gamma * d.S_t + coupling
    return amp, np.where(d.mask, np.nan, phase)


def polar_wave_residuals(source, consts: Constants, equation: str, t_index=None, grid=None,
                         tolerance=None) -> PolarWaveReport:
    """Split-equation residuals from a history (at ``t_index``) or from
    ready-made ``PolarDerivatives`` (then ``grid`` is required)."""
    _check_equation(equation)
    if isinstance(source, PolarDerivatives):
        if grid is None:
            raise ValueError("grid is required with precomputed derivatives")
        d = source
    else:
        grid = source.grid
        if t_index is None:
            t_index = len(source) // 2
        d = PolarDerivatives.from_history(source, consts.hbar, t_index)
    amp, phase = polar_wave_terms(d, consts, equation)
    c = consts.c
    warnings = _mask_warnings(d.mask)
    light = np.abs(d.S_t) - c * np.abs(d.S_x)
    wave = d.S_tt / c ** 2 - d.S_xx
    disp = d.S_t ** 2 - (c * d.S_x) ** 2 - (consts.m * c * c) ** 2
    name = "kg" if equation == "kg" else "telegraph"

    def rep(label, r, tol=None):
        return residual_report(f"{name}_{label}", r, grid, mask=d.mask, tolerance=tol, warnings=warnings)

    return PolarWaveReport(equation, rep("amplitude", amp, tolerance), rep("phase", phase, tolerance),
                           rep("light_cone", light), rep("phase_wave", wave), rep("dispersion", disp),
                           d.mask, warnings)


def kg_polar_residuals(source, consts: Constants, t_index=None, grid=None, tolerance=None) -> PolarWaveReport:
    return polar_wave_residuals(source, consts, "kg", t_index, grid, tolerance)


def telegraph_polar_residuals(source, consts: Constants, t_index=None, grid=None,
                              tolerance=None) -> PolarWaveReport:
    return polar_wave_residuals(source, consts, "telegraph", t_index, grid, tolerance)


# ------------------------------------------------------------ subfield masses

@dataclass(frozen=True, eq=False)
class MassReport:
    M_R2: RealField1D
    M_S2: RealField1D
    which: str = "kg"

    def to_csv(self, path) -> None:
        write_columns_csv(path, {"x": self.M_R2.grid.x, "MR2": self.M_R2.values, "MS2": self.M_S2.values})


def _arr(f):
    return np.asarray(f.values if hasattr(f, "values") else f, dtype=float)


def effective_masses(R: RealField1D, S: RealField1D, R_t, S_t, consts: Constants, which: str = "kg",
                     R_x=None, S_x=None, zero_tol: float = MASK_RATIO) -> MassReport:
    """Mass-squared fields of the amplitude and phase subfields.

    M_R^2 = m^2 + S_x^2/c^2 - S_t^2/c^4 and
    M_S^2 = (2 hbar^2/c^2) (R_t S_t/(c^2 R S) - R_x S_x/(R S)).
    Both equations share the same expressions.  Spatial derivatives default
    to stencils.  M_S^2 is masked (value 0) where R or S vanishes; negative
    values are kept.
    """
    _check_equation(which)
    grid = R.grid
    c, hbar, m = consts.c, consts.hbar, consts.m
    r, s = _arr(R), _arr(S)
    r_t = np.broadcast_to(_arr(R_t), r.shape)
    s_t = np.broadcast_to(_arr(S_t), r.shape)
    r_x = diff1(r, grid.dx) if R_x is None else np.broadcast_to(_arr(R_x), r.shape)
    s_x = diff1(s, grid.dx) if S_x is None else np.broadcast_to(_arr(S_x), r.shape)
    mr2 = m * m + s_x ** 2 / c ** 2 - s_t ** 2 / c ** 4
    tiny = np.finfo(float).tiny
    mask = ((np.abs(r) <= zero_tol * max(np.max(np.abs(r)), tiny))
            | (np.abs(s) <= zero_tol * max(np.max(np.abs(s)), tiny)))
    ms2 = np.zeros_like(r)
    good = ~mask
    ms2[good] = (2.0 * hbar ** 2 / c ** 2) * (r_t[good] * s_t[good] / c ** 2 - r_x[good] * s_x[good]) / (
        r[good] * s[good])
    return MassReport(RealField1D(grid, mr2), RealField1D(grid, ms2, mask), which)


# ------------------------------------------------------------ hyperbola

def hyperbola_constraint(S_dot, S_prime, consts: Constants, grid: Grid1D | None = None):
    """S_t^2/(m^2 c^4) - S_x^2/(m^2 c^2); equals 1 when R obeys the undistorted telegraph equation."""
    if consts.m == 0:
        raise UndefinedConstraintError("the hyperbola constraint divides by m and is undefined for m = 0")
    for f in (S_dot, S_prime):
        if grid is None and hasattr(f, "grid"):
            grid = f.grid
    m, c = consts.m, consts.c
    sd, sp = _arr(S_dot), _arr(S_prime)
    value = sd ** 2 / (m * m * c ** 4) - sp ** 2 / (m * m * c * c)
    if grid is None:
        return value
    return RealField1D(grid, np.broadcast_to(value, (grid.n,)))


def _lorentz(v, c):
    if not abs(v) < c:
        raise ValueError(f"|v| must be below c = {c}, got {v}")
    return 1.0 / math.sqrt(1.0 - (v / c) ** 2)


def boost_phase(x, t, v: float, consts: Constants, offset: float = 0.0):
    """Phase of a boosted rest mode: -gamma m c^2 (t - v x/c^2) + offset."""
    c = consts.c
    g = _lorentz(v, c)
    return -g * consts.m * c * c * (t - v * np.asarray(x) / (c * c)) + offset


def boost_rates(v: float, consts: Constants):
    """(S_t, S_x) of ``boost_phase``."""
    c = consts.c
    g = _lorentz(v, c)
    return -g * consts.m * c * c, g * consts.m * v


# ------------------------------------------------------------ static case

def _static_rhs(mu2, a2_over_hbar2):
    def f(r, rp):
        return rp, mu2 * r + a2_over_hbar2 / r ** 3
    return f


def static_special_case(R0: float, R0_prime: float, A: float, consts: Constants, grid: Grid1D,
                        substeps: int = 4, stencil_order: int = 2, tolerance=None):
    """Time-independent amplitude and phase.

    Integrates hbar^2 c^2 R'' = m^2 c^4 R + c^2 A^2 / R^3 from x_min with RK4
    (``substeps`` per grid interval), sets S' = A/R^2, S by the cumulative
    trapezoid rule (S(x_min) = 0), and checks the quantum potential against
    -m c^2/2 - A^2/(2 m R^4).  Returns ``(R, S, V_Q_check)``; the check's
    ``extra`` holds the drift of R^2 S' from A.
    """
    if not (math.isfinite(R0) and R0 > 0):
        raise ValueError(f"R0 must be finite and > 0, got {R0}")
    if not (math.isfinite(A) and math.isfinite(R0_prime)):
        raise ValueError("A and R0_prime must be finite")
    if consts.m == 0:
        raise InvalidConstantError("the quantum potential needs m > 0")
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    hbar, m, c = consts.hbar, consts.m, consts.c
    f = _static_rhs((m * c / hbar) ** 2, (A / hbar) ** 2)
    x = grid.x
    h = grid.dx / substeps
    R = np.empty(grid.n)
    R[0] = R0
    r, rp = float(R0), float(R0_prime)
    for i in range(1, grid.n):
        for j in range(substeps):
            k1r, k1p = f(r, rp)
            k2r, k2p = f(r + 0.5 * h * k1r, rp + 0.5 * h * k1p)
            k3r, k3p = f(r + 0.5 * h * k2r, rp + 0.5 * h * k2p)
            k4r, k4p = f(r + h * k3r, rp + h * k3p)
            r_new = r + h / 6.0 * (k1r + 2.0 * k2r + 2.0 * k3r + k4r)
            rp = rp + h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
            if not r_new > 0:
                raise DomainExitError(x[i - 1] + (j + 1) * h)
            if not (math.isfinite(r_new) and math.isfinite(rp)):
                raise SolverDivergedError(i, f"amplitude overflow near x = {x[i]:.6g}")
            r = r_new
        R[i] = r
    S_prime = A / R ** 2
    S = cumulative_trapezoid(S_prime, x, initial=0.0)
    vq = -(hbar ** 2) / (2.0 * m) * diff2(R, grid.dx, order=stencil_order) / R
    target = -0.5 * m * c * c - A * A / (2.0 * m * R ** 4)
    drift = float(np.max(np.abs(R ** 2 * S_prime - A)))
    check = residual_report("static_quantum_potential", vq - target, grid, tolerance=tolerance,
                            extra={"R2_S_prime_drift": drift, "A": A})
    return RealField1D(grid, R), RealField1D(grid, S), check


# ------------------------------------------------------------ subfields

def real_wave_residual(history: WaveHistory, consts: Constants, equation: str, part: str = "real",
                       t_index=None) -> np.ndarray:
    """Centred-difference residual of the real equation for U = Re psi or W = Im psi."""
    if t_index is None:
        t_index = len(history) // 2
    if not 1 <= t_index <= len(history) - 2:
        raise IndexError(f"t_index must lie in [1, {len(history) - 2}]")
    snaps = history.snapshots[t_index - 1:t_index + 2]
    u = snaps.real if part == "real" else snaps.imag
    dt, dx, c = history.dt, history.grid.dx, consts.c
    mu2 = (consts.m * c / consts.hbar) ** 2
    gamma = damping(consts, equation)
    u_tt = (u[2] - 2.0 * u[1] + u[0]) / dt ** 2
    u_t = (u[2] - u[0]) / (2.0 * dt)
    return u_tt / c ** 2 - periodic_d2(u[1], dx) + gamma * u_t + mu2 * u[1]


def subfield_check(history: WaveHistory, consts: Constants, equation: str = "kg", t_index=None,
                   tolerance=None):
    """Residuals of the real governing equation on U = Re psi and W = Im psi.

    Returns ``(U_report, W_report)``.  Space is treated as periodic.
    """
    _check_equation(equation)
    grid = history.grid
    out = []
    for label, part in (("U", "real"), ("W", "imag")):
        r = real_wave_residual(history, consts, equation, part, t_index)
        out.append(residual_report(f"{equation}_subfield_{label}", r, grid, tolerance=tolerance))
    return tuple(out)


# ------------------------------------------------------------ families

def kg_frequency(k: float, consts: Constants) -> float:
    c = consts.c
    return math.sqrt((c * k) ** 2 + (consts.m * c * c / consts.hbar) ** 2)


def kg_plane_wave(x, t, k: float, consts: Constants):
    """exp(i(kx - omega t)) with omega^2 = c^2 k^2 + m^2 c^4/hbar^2."""
    return np.exp(1j * (k * np.asarray(x) - kg_frequency(k, consts) * t))


def decay_mode(x, t, consts: Constants):
    """Spatially uniform exp(-m c^2 t/hbar), a telegraph solution."""
    return np.full(np.shape(x), math.exp(-consts.m * consts.c ** 2 * t / consts.hbar), dtype=np.complex128)


def gaussian_pulse(x, x0: float = 0.0, width: float = 1.0):
    return np.exp(-0.5 * ((np.asarray(x) - x0) / width) ** 2)


def periodic_plane_wave_k(grid: Grid1D, mode: int = 1) -> float:
    """Wavenumber of the given Fourier mode on the periodic grid."""
    return 2.0 * math.pi * mode / grid.period


def initial_plane_wave(grid: Grid1D, k: float, consts: Constants):
    """(phi0, phi_dot0) fields of ``kg_plane_wave`` at t = 0."""
    phi0 = kg_plane_wave(grid.x, 0.0, k, consts)
    return ComplexField1D(grid, phi0), ComplexField1D(grid, -1j * kg_frequency(k, consts) * phi0)
