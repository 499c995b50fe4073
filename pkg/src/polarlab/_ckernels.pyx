# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled time-stepping kernels (same contracts as ``_pykernels``)."""
import numpy as np

from libc.math cimport isfinite


cdef inline bint _finite(double complex z) noexcept nogil:
    return isfinite(z.real) and isfinite(z.imag)


def _n_saved(Py_ssize_t nsteps, Py_ssize_t save_every):
    if nsteps < 0 or save_every < 1:
        raise ValueError("nsteps must be >= 0 and save_every >= 1")
    return nsteps // save_every + 1


def cn_evolve(psi0, diag_a, double complex off_a, Py_ssize_t nsteps, Py_ssize_t save_every=1):
    cdef double complex[::1] psi = np.array(psi0, dtype=np.complex128)
    cdef double complex[::1] da = np.ascontiguousarray(diag_a, dtype=np.complex128)
    cdef Py_ssize_t n = psi.shape[0]
    cdef Py_ssize_t ns = _n_saved(nsteps, save_every)
    out_arr = np.empty((ns, n), dtype=np.complex128)
    cdef double complex[:, ::1] out = out_arr
    cdef double complex[::1] cp = np.empty(n, dtype=np.complex128)
    cdef double complex[::1] inv_m = np.empty(n, dtype=np.complex128)
    cdef double complex[::1] rhs = np.empty(n, dtype=np.complex128)
    cdef double complex piv, left, right
    cdef Py_ssize_t i, step, k = 1
    cdef int bad = 0

    out[0, :] = psi
    # LU sweep factors are shared by every step.
    for i in range(n):
        piv = da[i] if i == 0 else da[i] - off_a * cp[i - 1]
        if piv == 0:
            raise FloatingPointError(0)
        inv_m[i] = 1.0 / piv
        cp[i] = off_a * inv_m[i]

    with nogil:
        for step in range(1, nsteps + 1):
            for i in range(n):
                left = psi[i - 1] if i > 0 else 0
                right = psi[i + 1] if i < n - 1 else 0
                rhs[i] = (2.0 - da[i]) * psi[i] - off_a * (left + right)
            rhs[0] = rhs[0] * inv_m[0]
            for i in range(1, n):
                rhs[i] = (rhs[i] - off_a * rhs[i - 1]) * inv_m[i]
            psi[n - 1] = rhs[n - 1]
            for i in range(n - 2, -1, -1):
                psi[i] = rhs[i] - cp[i] * psi[i + 1]
            for i in range(n):
                if not _finite(psi[i]):
                    bad = 1
                    break
            if bad:
                break
            if step % save_every == 0:
                out[k, :] = psi
                k += 1
    if bad:
        raise FloatingPointError(step)
    return out_arr


def wave_evolve(prev, cur, double a, double b, double inv_dx2, double mu2,
                Py_ssize_t nsteps, Py_ssize_t save_every=1):
    cdef double complex[::1] um = np.array(prev, dtype=np.complex128)
    cdef double complex[::1] u = np.array(cur, dtype=np.complex128)
    cdef Py_ssize_t n = u.shape[0]
    cdef Py_ssize_t ns = _n_saved(nsteps, save_every)
    out_arr = np.empty((ns, n), dtype=np.complex128)
    cdef double complex[:, ::1] out = out_arr
    cdef double complex[::1] up = np.empty(n, dtype=np.complex128)
    cdef double complex[::1] tmp
    cdef double complex lap
    cdef double inv = 1.0 / (a + b)
    cdef Py_ssize_t i, im, ip, level, k = 1
    cdef int bad = 0

    out[0, :] = um
    if nsteps >= 1 and save_every == 1:
        out[1, :] = u
        k = 2
    with nogil:
        for level in range(2, nsteps + 1):
            for i in range(n):
                im = i - 1 if i > 0 else n - 1
                ip = i + 1 if i < n - 1 else 0
                lap = (u[ip] - 2.0 * u[i] + u[im]) * inv_dx2
                up[i] = (a * (2.0 * u[i] - um[i]) + b * um[i] + lap - mu2 * u[i]) * inv
                if not _finite(up[i]):
                    bad = 1
            if bad:
                break
            tmp = um
            um = u
            u = up
            up = tmp
            if level % save_every == 0:
                out[k, :] = u
                k += 1
    if bad:
        raise FloatingPointError(level)
    return out_arr


def dirac_evolve(chi_p, chi_m, double cos_half, double sin_half,
                 Py_ssize_t nsteps, Py_ssize_t save_every=1):
    cdef double complex[::1] p = np.array(chi_p, dtype=np.complex128)
    cdef double complex[::1] q = np.array(chi_m, dtype=np.complex128)
    cdef Py_ssize_t n = p.shape[0]
    cdef Py_ssize_t ns = _n_saved(nsteps, save_every)
    out_p_arr = np.empty((ns, n), dtype=np.complex128)
    out_q_arr = np.empty((ns, n), dtype=np.complex128)
    cdef double complex[:, ::1] out_p = out_p_arr
    cdef double complex[:, ::1] out_q = out_q_arr
    cdef double complex[::1] p2 = np.empty(n, dtype=np.complex128)
    cdef double complex[::1] q2 = np.empty(n, dtype=np.complex128)
    cdef double complex isin = 1j * sin_half
    cdef double complex a, b
    cdef Py_ssize_t i, src, step, k = 1

    out_p[0, :] = p
    out_q[0, :] = q
    with nogil:
        for step in range(1, nsteps + 1):
            # half rotation fused with the shift: chi+ moves right, chi- left
            for i in range(n):
                a = cos_half * p[i] - isin * q[i]
                b = cos_half * q[i] - isin * p[i]
                p2[i + 1 if i < n - 1 else 0] = a
                q2[i - 1 if i > 0 else n - 1] = b
            for i in range(n):
                p[i] = cos_half * p2[i] - isin * q2[i]
                q[i] = cos_half * q2[i] - isin * p2[i]
            if step % save_every == 0:
                out_p[k, :] = p
                out_q[k, :] = q
                k += 1
    return out_p_arr, out_q_arr
