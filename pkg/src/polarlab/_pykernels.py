"""Numpy/scipy implementations of the time-stepping kernels.

Every function here has a twin in ``_ckernels.pyx`` with the same signature
and the same snapshot layout; ``polarlab.kernels`` picks one at import.
"""
import numpy as np
from scipy.linalg import solve_banded


def _n_saved(nsteps, save_every):
    if nsteps < 0 or save_every < 1:
        raise ValueError("nsteps must be >= 0 and save_every >= 1")
    return nsteps // save_every + 1


def cn_evolve(psi0, diag_a, off_a, nsteps, save_every=1):
    """Crank-Nicolson stepping with a symmetric tridiagonal left matrix A.

    A has diagonal ``diag_a`` and constant off-diagonal ``off_a``; the right
    matrix is B = 2I - A.  ``psi0`` holds interior nodes only (the caller
    imposes the homogeneous Dirichlet values).
    """
    psi = np.array(psi0, dtype=np.complex128)
    diag_a = np.asarray(diag_a, dtype=np.complex128)
    n = psi.shape[0]
    out = np.empty((_n_saved(nsteps, save_every), n), dtype=np.complex128)
    out[0] = psi
    ab = np.empty((3, n), dtype=np.complex128)
    ab[0, :] = off_a
    ab[1, :] = diag_a
    ab[2, :] = off_a
    diag_b = 2.0 - diag_a
    rhs = np.empty_like(psi)
    k = 1
    for step in range(1, nsteps + 1):
        rhs[:] = diag_b * psi
        rhs[1:] -= off_a * psi[:-1]
        rhs[:-1] -= off_a * psi[1:]
        try:
            psi = solve_banded((1, 1), ab, rhs, overwrite_b=False, check_finite=False)
        except np.linalg.LinAlgError:
            raise FloatingPointError(step) from None
        if not np.isfinite(psi).all():
            raise FloatingPointError(step)
        if step % save_every == 0:
            out[k] = psi
            k += 1
    return out


def wave_evolve(prev, cur, a, b, inv_dx2, mu2, nsteps, save_every=1):
    """Three-level periodic scheme for the damped Klein-Gordon family.

    Solves a(u+ - 2u + u-) + b(u+ - u-) - D2 u + mu2 u = 0 for u+, where
    a = 1/(c dt)^2 and b = m/(hbar dt) (zero for Klein-Gordon).  ``prev``
    and ``cur`` are levels 0 and 1; levels 0..nsteps are produced.
    """
    um = np.array(prev, dtype=np.complex128)
    u = np.array(cur, dtype=np.complex128)
    n = u.shape[0]
    out = np.empty((_n_saved(nsteps, save_every), n), dtype=np.complex128)
    out[0] = um
    k = 1
    if nsteps >= 1 and save_every == 1:
        out[k] = u
        k += 1
    inv = 1.0 / (a + b)
    with np.errstate(over="ignore", invalid="ignore"):  # blow-up is detected below
        for level in range(2, nsteps + 1):
            lap = (np.roll(u, -1) - 2.0 * u + np.roll(u, 1)) * inv_dx2
            up = (a * (2.0 * u - um) + b * um + lap - mu2 * u) * inv
            if not np.isfinite(up).all():
                raise FloatingPointError(level)
            um, u = u, up
            if level % save_every == 0:
                out[k] = u
                k += 1
    return out


def dirac_evolve(chi_p, chi_m, cos_half, sin_half, nsteps, save_every=1):
    """Strang-split 1+1D Dirac stepping in the chiral basis at CFL number one.

    Each step is: half mass rotation exp(-i theta sigma_x), exact advection
    (chi+ one node right, chi- one node left, periodic), half mass rotation.
    """
    p = np.array(chi_p, dtype=np.complex128)
    q = np.array(chi_m, dtype=np.complex128)
    n = p.shape[0]
    ns = _n_saved(nsteps, save_every)
    out_p = np.empty((ns, n), dtype=np.complex128)
    out_q = np.empty((ns, n), dtype=np.complex128)
    out_p[0] = p
    out_q[0] = q
    k = 1
    isin = 1j * sin_half
    for step in range(1, nsteps + 1):
        p, q = cos_half * p - isin * q, cos_half * q - isin * p
        p = np.roll(p, 1)
        q = np.roll(q, -1)
        p, q = cos_half * p - isin * q, cos_half * q - isin * p
        if step % save_every == 0:
            out_p[k] = p
            out_q[k] = q
            k += 1
    return out_p, out_q
