"""Hamilton flows with amplitude and phase as generalised coordinates.

The amplitude is rescaled by a length ``lam`` and the phase by a momentum
``p_lam``; with lam * p_lam = h the reduced flow ties the two together as
S - h R = const.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidConstantError, UnsupportedSystemError
from .fields import Constants, RealField1D, diff1, diff2, residual_report, write_columns_csv

V_KINDS = ("zero", "V_of_R")


@dataclass(frozen=True)
class CanonicalState:
    R: float
    S: float
    p_R: float
    p_S: float
    t: float = 0.0


@dataclass(frozen=True, eq=False)
class CanonicalTrajectory:
    t: np.ndarray
    R: np.ndarray
    S: np.ndarray
    p_R: np.ndarray
    p_S: np.ndarray
    dt: float

    def __post_init__(self):
        if len(self.t) > 1 and not np.all(np.diff(self.t) > 0):
            raise ValueError("trajectory times must increase strictly")

    def __len__(self):
        return len(self.t)

    def __getitem__(self, k) -> CanonicalState:
        return CanonicalState(float(self.R[k]), float(self.S[k]), float(self.p_R[k]),
                              float(self.p_S[k]), float(self.t[k]))

    def slope(self) -> float:
        """Least-squares dS/dR over the whole trajectory."""
        dR = self.R - self.R.mean()
        return float(np.dot(dR, self.S - self.S.mean()) / np.dot(dR, dR))

    def summary(self) -> dict:
        p0 = self.p_S[0]
        drift = float(np.max(np.abs(self.p_S - p0)) / abs(p0)) if p0 != 0 else float(np.max(np.abs(self.p_S)))
        moving = self.R[-1] != self.R[0]
        return {
            "steps": len(self) - 1,
            "dt": self.dt,
            "slope_dS_dR": self.slope() if moving else None,
            "p_S_relative_drift": drift,
            "delta_R": float(self.R[-1] - self.R[0]),
            "delta_S": float(self.S[-1] - self.S[0]),
        }

    def to_csv(self, path) -> None:
        write_columns_csv(path, {"t": self.t, "R": self.R, "S": self.S, "pR": self.p_R, "pS": self.p_S})


def require_quantum_scales(consts: Constants, rtol: float = 1e-12) -> None:
    if consts.lam is None or consts.p_lam is None:
        raise InvalidConstantError("canonical flows need both lam and p_lam")
    if abs(consts.lam * consts.p_lam - consts.h) > rtol * consts.h:
        raise InvalidConstantError(
            f"lam * p_lam = {consts.lam * consts.p_lam!r} but must equal h = {consts.h!r}")


def integrate_reduced(state0: CanonicalState, consts: Constants, V_kind: str = "zero",
                      dt: float = 1e-3, n: int = 1000) -> CanonicalTrajectory:
    """Symplectic Euler on dR/dt = p_S/(lam m), dS/dt = p_lam p_S/m, dp_S/dt = -p_lam dV/dS.

    Only potentials independent of S are closed systems here, so the
    momentum kick is identically zero.  p_R is carried along unchanged; its
    rate depends on field profiles (see ``p_r_rate_diagnostic``).
    """
    if V_kind not in V_KINDS:
        raise UnsupportedSystemError(
            f"V_kind {V_kind!r} is not a closed reduced system; supported: {V_KINDS}")
    if not dt > 0:
        raise ValueError("dt must be > 0")
    require_quantum_scales(consts)
    lam, p_lam, m = consts.lam, consts.p_lam, consts.m
    R = np.empty(n + 1)
    S = np.empty(n + 1)
    pS = np.empty(n + 1)
    R[0], S[0], pS[0] = state0.R, state0.S, state0.p_S
    dV_dS = 0.0
    for k in range(n):
        p = pS[k] - dt * p_lam * dV_dS
        pS[k + 1] = p
        R[k + 1] = R[k] + dt * p / (lam * m)
        S[k + 1] = S[k] + dt * p_lam * p / m
    t = state0.t + dt * np.arange(n + 1)
    return CanonicalTrajectory(t, R, S, np.full(n + 1, state0.p_R), pS, dt)


def hamiltonian_S(p_S, consts: Constants, V=0.0, R_tilde=1.0, div_p_R=0.0):
    """Phase Hamiltonian in momentum form: p_S^2/2m + V - hbar lam div(p_R) / (2 m R~)."""
    require_quantum_scales(consts)
    m = consts.m
    return p_S ** 2 / (2.0 * m) + V - consts.hbar * consts.lam * div_p_R / (2.0 * m * R_tilde)


def hamiltonian_R(p_R, p_S, consts: Constants, R_tilde, S_tilde, div_S_pS):
    """Amplitude Hamiltonian in momentum form.

    ``div_S_pS`` is div(S~ p_S) evaluated on the profile.
    """
    require_quantum_scales(consts)
    m, lam, hbar = consts.m, consts.lam, consts.hbar
    return (hbar * R_tilde / (2.0 * m * lam * S_tilde) * div_S_pS
            - hbar * R_tilde * p_S ** 2 / (2.0 * m * lam * consts.p_lam * S_tilde)
            + p_R * p_S / m)


def p_r_rate_diagnostic(R_field: RealField1D, S_field: RealField1D, consts: Constants,
                        zero_tol: float = 1e-12) -> RealField1D:
    """hbar p_S^2/(2 m S lam) - hbar div(S p_S)/(2 m S lam) with p_S = S'.

    Diagnostic only.  Nodes where |S| <= zero_tol * max|S| are masked.
    """
    if R_field.grid != S_field.grid:
        raise ValueError("R and S must share a grid")
    require_quantum_scales(consts)
    dx = S_field.grid.dx
    s = S_field.values
    p = diff1(s, dx)
    mask = np.abs(s) <= zero_tol * max(np.max(np.abs(s)), np.finfo(float).tiny)
    scale = consts.hbar / (2.0 * consts.m * consts.lam)
    rate = np.zeros_like(s)
    good = ~mask
    rate[good] = scale * (p[good] ** 2 - diff1(s * p, dx)[good]) / s[good]
    return RealField1D(S_field.grid, rate, mask)


def spin_split_residuals(R_field: RealField1D, S_field: RealField1D, V_of_S, E_S: float,
                         consts: Constants):
    """Residuals of the split with an S-dependent potential.

    Returns ``(helmholtz, phase_energy)``: R'' + (2 m E_S / hbar^2) R and
    E_S - p_S^2/2m - V_T with V_T = -(V + S S''/m).  ``V_of_S`` is a
    callable of the S values, an array, or a scalar.
    """
    grid = R_field.grid
    dx, m, hbar = grid.dx, consts.m, consts.hbar
    r, s = R_field.values, S_field.values
    V = V_of_S(s) if callable(V_of_S) else np.broadcast_to(np.asarray(V_of_S, dtype=float), s.shape)
    helm = diff2(r, dx) + 2.0 * m * E_S / hbar ** 2 * r
    p = diff1(s, dx)
    V_T = -(V + s * diff2(s, dx) / m)
    energy = E_S - p ** 2 / (2.0 * m) - V_T
    return (residual_report("amplitude_helmholtz", helm, grid),
            residual_report("phase_energy", energy, grid))


def phase_winding_report(S, hbar: float) -> dict:
    """Nearest multiple n of hbar for each phase value and the distance to it."""
    S = np.atleast_1d(np.asarray(S, dtype=float))
    n = np.round(S / hbar)
    return {"n": n.astype(int), "residual": S - n * hbar,
            "max_residual": float(np.max(np.abs(S - n * hbar))) if S.size else 0.0}


def canonical_flow_rates(p_S: float, consts: Constants) -> tuple:
    """(dR/dt, dS/dt) of the reduced flow."""
    require_quantum_scales(consts)
    return p_S / (consts.lam * consts.m), consts.p_lam * p_S / consts.m

