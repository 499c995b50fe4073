"""Time-dependent Schrodinger solver and the amplitude/phase quantities built on it.

Sign conventions throughout: E = -dS/dt and p = dS/dx.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

from . import kernels
from .errors import InvalidConstantError, SolverDivergedError
from .fields import (
    ComplexField1D,
    Constants,
    Grid1D,
    RealField1D,
    ResidualReport,
    diff1,
    diff2,
    grow_mask,
    node_mask,
    polar_history,
    residual_report,
)

UNTRUSTED_MASK_FRACTION = 0.2


@dataclass(frozen=True, eq=False)
class PotentialSpec:
    kind: str = "free"
    omega: float | None = None
    table: RealField1D | None = None

    def __post_init__(self):
        if self.kind not in ("free", "harmonic", "tabulated"):
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.kind == "harmonic" and not (self.omega is not None and self.omega > 0):
            raise InvalidConstantError("harmonic potential needs omega > 0")
        if self.kind == "tabulated" and self.table is None:
            raise ValueError("tabulated potential needs a table")

    @classmethod
    def free(cls):
        return cls("free")

    @classmethod
    def harmonic(cls, omega: float):
        return cls("harmonic", omega=omega)

    @classmethod
    def tabulated(cls, table: RealField1D):
        return cls("tabulated", table=table)

    def evaluate(self, grid: Grid1D, m: float) -> np.ndarray:
        if self.kind == "free":
            return np.zeros(grid.n)
        if self.kind == "harmonic":
            return 0.5 * m * self.omega ** 2 * grid.x ** 2
        if self.table.grid != grid:
            raise ValueError("tabulated potential lives on a different grid")
        return np.array(self.table.values)


@dataclass(frozen=True, eq=False)
class WaveHistory:
    """Complex snapshots at t0, t0 + dt, ... on one grid."""

    grid: Grid1D
    dt: float
    snapshots: np.ndarray
    t0: float = 0.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("history time step must be > 0")
        snaps = np.array(self.snapshots, dtype=np.complex128)
        if snaps.ndim != 2 or snaps.shape[1] != self.grid.n:
            raise ValueError("snapshots must have shape (levels, grid.n)")
        snaps.setflags(write=False)
        object.__setattr__(self, "snapshots", snaps)

    @classmethod
    def from_function(cls, grid: Grid1D, func, dt: float, n_steps: int, t0: float = 0.0):
        """Sample ``func(x, t)`` at ``n_steps + 1`` uniformly spaced times."""
        x = grid.x
        snaps = np.array([func(x, t0 + k * dt) for k in range(n_steps + 1)], dtype=np.complex128)
        return cls(grid, dt, snaps, t0)

    def __len__(self):
        return self.snapshots.shape[0]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self))

    def snapshot(self, k: int) -> ComplexField1D:
        return ComplexField1D(self.grid, self.snapshots[k])

    def norms(self) -> np.ndarray:
        return np.sum(np.abs(self.snapshots) ** 2, axis=1) * self.grid.dx


def solve_tdse(psi0: ComplexField1D, V: PotentialSpec, consts: Constants, dt: float,
               n_steps: int, save_every: int = 1) -> WaveHistory:
    """Crank-Nicolson evolution with homogeneous Dirichlet boundaries.

    The two boundary nodes are held at zero; the norm is tracked, not forced.
    """
    if not dt > 0:
        raise ValueError("dt must be > 0")
    if consts.m == 0:
        raise InvalidConstantError("the Schrodinger equation needs m > 0")
    grid = psi0.grid
    hbar, m = consts.hbar, consts.m
    kin = hbar * hbar / (2.0 * m * grid.dx ** 2)
    v = V.evaluate(grid, m)
    factor = 1j * dt / (2.0 * hbar)
    with np.errstate(over="ignore", invalid="ignore"):  # inf coefficients surface as a diverged step
        diag_a = 1.0 + factor * (2.0 * kin + v[1:-1])
        off_a = factor * (-kin)
    try:
        inner = kernels.cn_evolve(psi0.values[1:-1], diag_a, off_a, n_steps, save_every)
    except FloatingPointError as exc:
        raise SolverDivergedError(exc.args[0] if exc.args else -1) from None
    snaps = np.zeros((inner.shape[0], grid.n), dtype=np.complex128)
    snaps[:, 1:-1] = inner
    return WaveHistory(grid, dt * save_every, snaps)


def _check_index(hist, t_index):
    if not 1 <= t_index <= len(hist) - 2:
        raise IndexError(f"t_index must lie in [1, {len(hist) - 2}] for centred differences")


@dataclass(frozen=True, eq=False)
class PolarSlice:
    """R, S and their centred time derivatives at one history level."""

    R: np.ndarray
    S: np.ndarray
    R_t: np.ndarray
    S_t: np.ndarray
    R_tt: np.ndarray
    S_tt: np.ndarray
    mask: np.ndarray


def polar_slice(hist: WaveHistory, hbar: float, t_index: int, threshold=None) -> PolarSlice:
    _check_index(hist, t_index)
    R, S, mask = polar_history(hist.snapshots[t_index - 1:t_index + 2], hist.grid, hbar, threshold)
    dt = hist.dt
    return PolarSlice(
        R=R[1], S=S[1],
        R_t=(R[2] - R[0]) / (2.0 * dt), S_t=(S[2] - S[0]) / (2.0 * dt),
        R_tt=(R[2] - 2.0 * R[1] + R[0]) / dt ** 2, S_tt=(S[2] - 2.0 * S[1] + S[0]) / dt ** 2,
        mask=grow_mask(mask.any(axis=0)),
    )


def _mask_warnings(mask):
    frac = float(np.mean(mask))
    if frac > UNTRUSTED_MASK_FRACTION:
        return (f"untrusted region: {frac:.1%} of nodes are amplitude nodes",)
    return ()


@dataclass(frozen=True, eq=False)
class MadelungResiduals:
    hj: ResidualReport  # phase (Hamilton-Jacobi) equation
    continuity: ResidualReport  # amplitude transport equation
    mask: np.ndarray
    warnings: tuple = ()

    @property
    def untrusted(self) -> bool:
        return bool(self.warnings)


def madelung_terms(R, S, R_t, S_t, v, dx, consts):
    """Pointwise imbalance of the real and imaginary parts of the split equation."""
    hbar, m = consts.hbar, consts.m
    R_x, S_x = diff1(R, dx), diff1(S, dx)
    with np.errstate(divide="ignore", invalid="ignore"):
        curv = diff2(R, dx) / R
    hj = S_t + S_x ** 2 / (2.0 * m) + v - hbar ** 2 / (2.0 * m) * curv
    cont = R_t + (R * diff2(S, dx) + 2.0 * R_x * S_x) / (2.0 * m)
    return hj, cont


def madelung_residuals(hist: WaveHistory, V: PotentialSpec, consts: Constants,
                       t_index: int) -> MadelungResiduals:
    """Evaluate both split equations on the decomposed snapshot ``t_index``.

    dS/dt and dR/dt come from centred differences of the neighbouring
    snapshots after per-node temporal unwrapping of S.
    """
    grid = hist.grid
    sl = polar_slice(hist, consts.hbar, t_index)
    hj, cont = madelung_terms(sl.R, sl.S, sl.R_t, sl.S_t, V.evaluate(grid, consts.m), grid.dx, consts)
    warnings = _mask_warnings(sl.mask)
    return MadelungResiduals(
        residual_report("hamilton_jacobi", np.where(sl.mask, np.nan, hj), grid, mask=sl.mask, warnings=warnings),
        residual_report("continuity", np.where(sl.mask, np.nan, cont), grid, mask=sl.mask, warnings=warnings),
        sl.mask,
        warnings,
    )


def quantum_potential(R: RealField1D, consts: Constants) -> RealField1D:
    """-(hbar^2/2m) R''/R; amplitude nodes are flagged and hold 0."""
    r = R.values
    mask = node_mask(r)
    vq = np.zeros(R.grid.n)
    good = ~mask
    vq[good] = (-(consts.hbar ** 2) / (2.0 * consts.m) * diff2(r, R.grid.dx))[good] / r[good]
    return RealField1D(R.grid, vq, mask)


def spin_potential(S: RealField1D, consts: Constants) -> RealField1D:
    """-S S''/m, the curvature-of-phase potential."""
    return RealField1D(S.grid, -S.values * diff2(S.values, S.grid.dx) / consts.m)


def spin_force(S: RealField1D, consts: Constants):
    """The force two ways: S v'' + S'' v with v = S'/m, and -d/dx of the potential."""
    dx = S.grid.dx
    s = S.values
    v = diff1(s, dx) / consts.m
    direct = s * diff2(v, dx) + diff2(s, dx) * v
    gradient = -diff1(spin_potential(S, consts).values, dx)
    return RealField1D(S.grid, direct), RealField1D(S.grid, gradient)


def separation_solution(E: float, C: float, m: float, grid: Grid1D) -> RealField1D:
    """S(x) = 2mE/C + (C/4) x^2, the quadratic phase with constant curvature balance."""
    if C == 0:
        raise InvalidConstantError("separation constant C must be non-zero")
    return RealField1D(grid, 2.0 * m * E / C + 0.25 * C * grid.x ** 2)


def separation_derivatives(C: float, grid: Grid1D):
    """Exact S' = Cx/2 and S'' = C/2 of ``separation_solution``."""
    return 0.5 * C * grid.x, np.full(grid.n, 0.5 * C)


def phase_balance_residual(S: RealField1D, m: float, E: float, S_x=None, S_xx=None) -> np.ndarray:
    """S S''/m - S'^2/2m - E, with stencils unless derivatives are supplied."""
    s = S.values
    S_x = diff1(s, S.grid.dx) if S_x is None else S_x
    S_xx = diff2(s, S.grid.dx) if S_xx is None else S_xx
    return s * S_xx / m - S_x ** 2 / (2.0 * m) - E


def phase_flux_residual(S: RealField1D, m: float, E: float, p=None) -> np.ndarray:
    """d/dx(S S'/m) - (3p^2/2m + E), the divergence form of the phase balance."""
    dx = S.grid.dx
    s = S.values
    p = diff1(s, dx) if p is None else p
    return diff1(s * diff1(s, dx) / m, dx) - (3.0 * p ** 2 / (2.0 * m) + E)


def stationary_r_residual(R: RealField1D, V: PotentialSpec, E: float, consts: Constants,
                          tolerance: float | None = None) -> ResidualReport:
    """-(hbar^2/2m) R'' + V R + E R: R as an eigenfunction with total energy -E."""
    grid = R.grid
    r = R.values
    res = (-(consts.hbar ** 2) / (2.0 * consts.m) * diff2(r, grid.dx)
           + V.evaluate(grid, consts.m) * r + E * r)
    return residual_report("stationary_amplitude", res, grid, tolerance=tolerance)


@dataclass(frozen=True, eq=False)
class SpinDensityReport:
    rate: float  # d/dt of sum R^2 S dx
    expectation: float  # sum R^2 S dx at t_index
    balance: ResidualReport  # multiplied-and-added split equations
    conservation: ResidualReport  # imbalance of the conserved-density form
    warnings: tuple = ()


def phase_expectation(hist: WaveHistory, consts: Constants) -> np.ndarray:
    """sum R^2 S dx at every level, with S unwrapped continuously from level 0."""
    R, S, _ = polar_history(hist.snapshots, hist.grid, consts.hbar)
    return np.sum(R * R * S, axis=1) * hist.grid.dx


def spin_density_rate(hist: WaveHistory, consts: Constants, t_index: int,
                      V: PotentialSpec | None = None) -> SpinDensityReport:
    _check_index(hist, t_index)
    V = V or PotentialSpec.free()
    grid = hist.grid
    dx, m, hbar = grid.dx, consts.m, consts.hbar
    R_all, S_all, mask_all = polar_history(hist.snapshots[: t_index + 2], grid, hbar)
    R_all, S_all = R_all[t_index - 1:], S_all[t_index - 1:]
    mask = grow_mask(mask_all[t_index - 1:].any(axis=0))
    dens = R_all * R_all * S_all
    totals = np.sum(dens, axis=1) * dx
    rate = (totals[2] - totals[0]) / (2.0 * hist.dt)
    dens_t = (dens[2] - dens[0]) / (2.0 * hist.dt)
    R, S = R_all[1], S_all[1]
    R_x, S_x = diff1(R, dx), diff1(S, dx)
    S_xx = diff2(S, dx)
    v = V.evaluate(grid, m)
    balance = (dens_t + R * R * S_x ** 2 / (2.0 * m) + R * R * v
               - hbar ** 2 / (2.0 * m) * R * diff2(R, dx)
               + R * R * S * S_xx / m + 2.0 * R * S * R_x * S_x / m)
    conservation = dens_t + 2.0 * R * S * S_x * R_x / m + R * R * S_x ** 2 / m
    warnings = _mask_warnings(mask)
    return SpinDensityReport(
        rate=float(rate),
        expectation=float(totals[1]),
        balance=residual_report("spin_density_balance", balance, grid, mask=mask, warnings=warnings),
        conservation=residual_report("spin_density_conservation", conservation, grid, mask=mask,
                                     warnings=warnings),
        warnings=warnings,
    )


def hp_energy(p, E: float, m: float):
    """p^2/2m + p^2/m + E."""
    return 1.5 * np.square(p) / m + E


def hp_hamilton_jacobi_residual(p: float, E: float, m: float, times: np.ndarray, x: float = 0.0) -> np.ndarray:
    """dS/dt + 3p^2/2m + E along S = p x - H_p t, dS/dt by centred differences."""
    times = np.asarray(times, dtype=float)
    S = p * x - hp_energy(p, E, m) * times
    S_t = np.gradient(S, times)
    return S_t + 1.5 * p * p / m + E


def harmonic_ground_state(grid: Grid1D, consts: Constants, omega: float) -> np.ndarray:
    """Normalised exp(-m omega x^2 / 2 hbar)."""
    a = consts.m * omega / consts.hbar
    return (a / math.pi) ** 0.25 * np.exp(-0.5 * a * grid.x ** 2)


def free_gaussian(x, t, consts: Constants, sigma0: float = 1.0, k: float = 0.0, x0: float = 0.0):
    """Analytic free packet with initial width sigma0 and mean wavenumber k."""
    hbar, m = consts.hbar, consts.m
    alpha = 1.0 + 1j * hbar * t / (2.0 * m * sigma0 ** 2)
    xi = np.asarray(x) - x0 - hbar * k * t / m
    return ((2.0 * math.pi * sigma0 ** 2) ** -0.25 / np.sqrt(alpha)
            * np.exp(-xi ** 2 / (4.0 * sigma0 ** 2 * alpha) + 1j * k * (np.asarray(x) - x0)
                     - 1j * hbar * k * k * t / (2.0 * m)))


def gaussian_width(psi: np.ndarray, grid: Grid1D) -> float:
    """Standard deviation of |psi|^2 as a position distribution."""
    rho = np.abs(psi) ** 2
    x = grid.x
    norm = rho.sum()
    mean = (x * rho).sum() / norm
    return float(math.sqrt(((x - mean) ** 2 * rho).sum() / norm))


def discrete_ground_state(grid: Grid1D, V: PotentialSpec, consts: Constants):
    """Lowest eigenpair of the Dirichlet finite-difference Hamiltonian.

    Returns ``(energy, psi)`` with psi normalised to sum |psi|^2 dx = 1 and
    positive at the centre.  This is the state the Crank-Nicolson solver
    keeps exactly stationary.
    """
    kin = consts.hbar ** 2 / (2.0 * consts.m * grid.dx ** 2)
    v = V.evaluate(grid, consts.m)[1:-1]
    w, vec = eigh_tridiagonal(2.0 * kin + v, np.full(grid.n - 3, -kin),
                              select="i", select_range=(0, 0))
    psi = np.zeros(grid.n)
    psi[1:-1] = vec[:, 0]
    psi *= np.sign(psi[grid.n // 2]) / math.sqrt(grid.dx)
    return float(w[0]), psi
