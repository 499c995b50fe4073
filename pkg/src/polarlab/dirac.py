"""1+1 dimensional Dirac equation with a two-component spinor.

    i hbar d_t psi = -i hbar c alpha d_x psi + beta m c^2 psi

with alpha = [[0, 1], [1, 0]] and beta = diag(1, -1).  In the eigenbasis of
alpha, chi+ = (u + w)/sqrt 2 moves right and chi- = (u - w)/sqrt 2 moves
left at speed c; the mass term couples them.  Grids are used periodically.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import kernels
from .canonical import CanonicalTrajectory, require_quantum_scales
from .errors import ConfigurationError
from .fields import (
    MASK_RATIO,
    Constants,
    Grid1D,
    diff1,
    grow_mask,
    polar_history,
    residual_report,
    write_columns_csv,
)

_SQRT_HALF = math.sqrt(0.5)


@dataclass(frozen=True, eq=False)
class DiracMatrices:
    alpha: np.ndarray = field(default_factory=lambda: np.array([[0.0, 1.0], [1.0, 0.0]]))
    beta: np.ndarray = field(default_factory=lambda: np.diag([1.0, -1.0]))

    def __post_init__(self):
        a, b = np.asarray(self.alpha, float), np.asarray(self.beta, float)
        eye = np.eye(2)
        if a.shape != (2, 2) or b.shape != (2, 2):
            raise ValueError("Dirac matrices must be 2x2")
        if not np.allclose(a, a.T) or not np.allclose(b, np.diag(np.diag(b))):
            raise ValueError("alpha must be symmetric and beta diagonal")
        if not (np.allclose(a @ a, eye) and np.allclose(b @ b, eye) and np.allclose(a @ b + b @ a, 0.0)):
            raise ValueError("need alpha^2 = beta^2 = I and alpha beta + beta alpha = 0")


@dataclass(frozen=True, eq=False)
class SpinorField1D:
    grid: Grid1D
    u: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        for name in ("u", "w"):
            arr = np.array(getattr(self, name), dtype=np.complex128)
            if arr.shape != (self.grid.n,):
                raise ValueError(f"component {name} needs {self.grid.n} values")
            if not np.isfinite(arr).all():
                raise ValueError("spinor values must be finite")
            object.__setattr__(self, name, arr)

    @classmethod
    def from_chiral(cls, grid: Grid1D, chi_p, chi_m) -> SpinorField1D:
        chi_p, chi_m = np.asarray(chi_p), np.asarray(chi_m)
        return cls(grid, _SQRT_HALF * (chi_p + chi_m), _SQRT_HALF * (chi_p - chi_m))

    def chiral(self):
        return _SQRT_HALF * (self.u + self.w), _SQRT_HALF * (self.u - self.w)

    def norm(self) -> float:
        return float(np.sum(np.abs(self.u) ** 2 + np.abs(self.w) ** 2) * self.grid.dx)

    def to_csv(self, path) -> None:
        write_columns_csv(path, {"x": self.grid.x, "re_u": self.u.real, "im_u": self.u.imag,
                                 "re_w": self.w.real, "im_w": self.w.imag})


@dataclass(frozen=True, eq=False)
class SpinorHistory:
    grid: Grid1D
    dt: float
    u: np.ndarray  # (levels, n)
    w: np.ndarray
    t0: float = 0.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("history time step must be > 0")
        if self.u.shape != self.w.shape or self.u.ndim != 2 or self.u.shape[1] != self.grid.n:
            raise ValueError("component stacks must both have shape (levels, grid.n)")

    @classmethod
    def from_chiral(cls, grid, dt, chi_p, chi_m, t0=0.0):
        chi_p, chi_m = np.asarray(chi_p), np.asarray(chi_m)
        return cls(grid, dt, _SQRT_HALF * (chi_p + chi_m), _SQRT_HALF * (chi_p - chi_m), t0)

    @classmethod
    def from_function(cls, grid, func, dt, n_steps, t0=0.0):
        """``func(x, t)`` returns ``(u, w)``."""
        pairs = [func(grid.x, t0 + k * dt) for k in range(n_steps + 1)]
        u = np.array([np.broadcast_to(p[0], grid.x.shape) for p in pairs], dtype=np.complex128)
        w = np.array([np.broadcast_to(p[1], grid.x.shape) for p in pairs], dtype=np.complex128)
        return cls(grid, dt, u, w, t0)

    def __len__(self):
        return self.u.shape[0]

    @property
    def times(self):
        return self.t0 + self.dt * np.arange(len(self))

    def chiral(self):
        return _SQRT_HALF * (self.u + self.w), _SQRT_HALF * (self.u - self.w)

    def snapshot(self, k) -> SpinorField1D:
        return SpinorField1D(self.grid, self.u[k], self.w[k])

    def norms(self) -> np.ndarray:
        return np.sum(np.abs(self.u) ** 2 + np.abs(self.w) ** 2, axis=1) * self.grid.dx


def unit_pair(theta: float):
    """(cos theta, sin theta) as doubles with cos^2 + sin^2 as close to 1 as
    the step allows.

    Any bias in cos^2 + sin^2 - 1 compounds into a steady norm drift over
    long runs.  Candidates are the pair with the larger component re-solved
    from the smaller (moves it by at most an ulp) and pairs with sin
    re-solved from cos, which can sit much closer to the unit circle but
    shift the angle by up to eps/theta.  Those are only taken when the shift
    stays below 1e-3 theta^3, far under the splitting error of a step.
    """
    c0, s0 = math.cos(theta), math.sin(theta)
    one = Fraction(1)

    def residual(pair):
        return abs(Fraction(pair[0]) ** 2 + Fraction(pair[1]) ** 2 - one)

    def near(x):
        return (math.nextafter(x, -math.inf), x, math.nextafter(x, math.inf))

    swap = abs(s0) > abs(c0)
    small, big = (c0, s0) if swap else (s0, c0)
    target = one - Fraction(small) ** 2
    big = min(near(math.copysign(math.sqrt(float(target)), big)),
              key=lambda b: (abs(Fraction(b) ** 2 - target), abs(b - big)))
    best = (small, big) if swap else (big, small)
    budget = 1e-3 * abs(theta) ** 3
    angle = math.atan2(s0, c0)
    for c in near(c0):
        if abs(c) > 1.0:
            continue
        s_guess = math.copysign(math.sqrt(float(one - Fraction(c) ** 2)), s0)
        for s in near(s_guess):
            if abs(math.atan2(s, c) - angle) <= budget and residual((c, s)) < residual(best):
                best = (c, s)
    return best


def solve_dirac(psi0: SpinorField1D, consts: Constants, dt: float, n: int,
                save_every: int = 1) -> SpinorHistory:
    """Strang splitting of exact chiral advection and exact mass rotation.

    Advection is a one-node shift per step, so ``dt`` must equal dx/c.
    """
    grid = psi0.grid
    if not math.isclose(consts.c * dt, grid.dx, rel_tol=1e-12):
        raise ConfigurationError(
            f"exact advection needs dt = dx/c = {grid.dx / consts.c!r}, got dt = {dt!r}")
    theta = consts.m * consts.c ** 2 * (0.5 * dt) / consts.hbar
    chi_p, chi_m = psi0.chiral()
    out_p, out_m = kernels.dirac_evolve(chi_p, chi_m, *unit_pair(theta), n, save_every)
    return SpinorHistory.from_chiral(grid, dt * save_every, out_p, out_m)


def _spinor_threshold(*stacks):
    return MASK_RATIO * max(float(np.max(np.abs(s))) for s in stacks)


@dataclass(frozen=True, eq=False)
class DiracTransportReport:
    """Advective derivatives of each chiral amplitude and phase.

    ``raw`` holds D+-R = R_t +- c R_x and D+-S = S_t +- c S_x (zero for a
    massless field).  ``coupled`` subtracts the mass coupling to the other
    chirality, so those vanish for any solution.  ``phase_rate`` holds
    S_t + beta_jj m c^2 for the u and w components on occupied nodes.
    ``masks`` holds the excluded nodes of each chirality.
    """

    raw: dict
    coupled: dict
    phase_rate: dict
    massless: bool
    masks: dict


def dirac_transport_residuals(history: SpinorHistory, consts: Constants, t_index: int) -> DiracTransportReport:
    if not 1 <= t_index <= len(history) - 2:
        raise IndexError(f"t_index must lie in [1, {len(history) - 2}]")
    grid, dt = history.grid, history.dt
    c, hbar = consts.c, consts.hbar
    mc2 = consts.m * c * c
    lo, hi = t_index - 1, t_index + 2
    cp, cm = history.chiral()
    thr = _spinor_threshold(cp[lo:hi], cm[lo:hi])
    polar = {}
    for key, stack in (("+", cp[lo:hi]), ("-", cm[lo:hi])):
        R, S, mask = polar_history(stack, grid, hbar, thr)
        polar[key] = dict(R=R[1], S=S[1], R_t=(R[2] - R[0]) / (2 * dt), S_t=(S[2] - S[0]) / (2 * dt),
                          mask=grow_mask(mask.any(axis=0)))
    raw, coupled = {}, {}
    for key, sign, other in (("+", 1.0, "-"), ("-", -1.0, "+")):
        p, q = polar[key], polar[other]
        D_R = p["R_t"] + sign * c * diff1(p["R"], grid.dx)
        D_S = p["S_t"] + sign * c * diff1(p["S"], grid.dx)
        delta = (q["S"] - p["S"]) / hbar
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(p["mask"], 0.0, q["R"] / p["R"])
        mask = p["mask"]
        raw[f"D{key}R"] = residual_report(f"D{key}R", D_R, grid, mask=mask)
        raw[f"D{key}S"] = residual_report(f"D{key}S", D_S, grid, mask=mask)
        coupled[f"D{key}R"] = residual_report(
            f"coupled D{key}R", D_R - (mc2 / hbar) * q["R"] * np.sin(delta), grid, mask=mask)
        coupled[f"D{key}S"] = residual_report(
            f"coupled D{key}S", D_S + mc2 * ratio * np.cos(delta), grid, mask=mask)
    phase_rate = {}
    for name, stack, beta in (("u", history.u[lo:hi], 1.0), ("w", history.w[lo:hi], -1.0)):
        R, S, mask = polar_history(stack, grid, hbar, thr)
        rate = (S[2] - S[0]) / (2 * dt) + beta * mc2
        phase_rate[name] = residual_report(f"phase_rate_{name}", rate, grid, mask=mask.any(axis=0))
    return DiracTransportReport(raw, coupled, phase_rate, consts.m == 0,
                                {k: v["mask"] for k, v in polar.items()})


@dataclass(frozen=True)
class DiracSpinDensityReport:
    rate: float  # d/dt sum_j R_j^2 S_j dx
    predicted: float  # -m c^2 sum_j beta_jj R_j^2 dx
    gap: float
    relative_gap: float


def dirac_spin_density_rate(history: SpinorHistory, consts: Constants, t_index: int = 1) -> DiracSpinDensityReport:
    """Compare the rate of sum_j R_j^2 S_j dx with -m c^2 sum_j beta_jj R_j^2 dx.

    S_j is unwrapped in time from level 0 so the density is absolute.
    """
    if not 1 <= t_index <= len(history) - 2:
        raise IndexError(f"t_index must lie in [1, {len(history) - 2}]")
    grid = history.grid
    stop = t_index + 2
    thr = _spinor_threshold(history.u[:stop], history.w[:stop])
    totals = np.zeros(3)
    weight = 0.0
    for stack, beta in ((history.u[:stop], 1.0), (history.w[:stop], -1.0)):
        R, S, _ = polar_history(stack, grid, consts.hbar, thr)
        totals += np.sum(R[-3:] ** 2 * S[-3:], axis=1) * grid.dx
        weight += beta * np.sum(R[-2] ** 2) * grid.dx
    rate = (totals[2] - totals[0]) / (2.0 * history.dt)
    predicted = -consts.m * consts.c ** 2 * weight
    gap = rate - predicted
    scale = max(abs(predicted), abs(rate))
    return DiracSpinDensityReport(float(rate), float(predicted), float(gap),
                                  float(abs(gap) / scale) if scale > 0 else 0.0)


def dirac_hamiltonian_S(p_S, consts: Constants, beta: float = 1.0):
    """p_S^2/m + beta m c^2."""
    return np.square(p_S) / consts.m + beta * consts.m * consts.c ** 2


def dirac_canonical_flow(p_S: float, consts: Constants, dt: float, n: int,
                         R0: float = 0.0, S0: float = 0.0) -> CanonicalTrajectory:
    """dR/dt = p_S/(lam m), dS/dt = 2 p_S p_lam / m with p_S held constant."""
    require_quantum_scales(consts)
    if not dt > 0:
        raise ValueError("dt must be > 0")
    rate_R = p_S / (consts.lam * consts.m)
    rate_S = 2.0 * p_S * consts.p_lam / consts.m
    R = np.empty(n + 1)
    S = np.empty(n + 1)
    R[0], S[0] = R0, S0
    for k in range(n):
        R[k + 1] = R[k] + dt * rate_R
        S[k + 1] = S[k] + dt * rate_S
    return CanonicalTrajectory(dt * np.arange(n + 1), R, S, np.zeros(n + 1), np.full(n + 1, p_S), dt)


# ------------------------------------------------------------ initial states

def plane_wave_eigenspinor(grid: Grid1D, p: float, consts: Constants, sign: int = 1):
    """Plane wave of momentum p on the positive (sign=+1) or negative energy branch.

    Returns ``(spinor, energy)``.
    """
    mc2 = consts.m * consts.c ** 2
    E = sign * math.hypot(p * consts.c, mc2)
    vec = np.array([E + mc2, p * consts.c], dtype=float)
    if np.allclose(vec, 0.0):  # p = 0 on the negative branch
        vec = np.array([0.0, 1.0])
    vec /= np.linalg.norm(vec)
    phase = np.exp(1j * p * grid.x / consts.hbar)
    return SpinorField1D(grid, vec[0] * phase, vec[1] * phase), E


def chiral_packet(x, t, c, x0=0.0, width=1.0, k=0.0, chirp=0.0, direction=1):
    """Gaussian packet moving at speed c in ``direction``; phase k xi + chirp sin(xi)."""
    xi = x - x0 - direction * c * t
    return np.exp(-(xi / width) ** 2) * np.exp(1j * (k * xi + chirp * np.sin(xi)))


__all__ = [
    "DiracMatrices", "SpinorField1D", "unit_pair", "SpinorHistory", "solve_dirac", "dirac_transport_residuals",
    "DiracTransportReport", "dirac_spin_density_rate", "DiracSpinDensityReport", "dirac_canonical_flow",
    "dirac_hamiltonian_S", "plane_wave_eigenspinor", "chiral_packet",
]
