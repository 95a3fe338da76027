# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled parallel-tempering sweeps over single-bit-flip Metropolis moves.

Must consume the pre-drawn sites and uniforms in exactly the same order as
``_pt_python.pt_sweeps`` so both backends give identical chains.
"""

from libc.math cimport cos, exp, fabs, log, log1p

import numpy as np

cdef double LOG2 = 0.6931471805599453


cdef inline double re_log_cosh(double x, double y) nogil:
    cdef double ax = fabs(x)
    cdef double e2 = exp(-2.0 * ax)
    return ax - LOG2 + 0.5 * log1p(e2 * e2 + 2.0 * cos(2.0 * y) * e2)


def pt_sweeps(
    const double[::1] a_re,
    const double[:, ::1] w_re,
    const double[:, ::1] w_im,
    unsigned char[:, ::1] sigma,
    double[:, ::1] th_re,
    double[:, ::1] th_im,
    double[::1] logp,
    const double[::1] betas,
    const int[:, :, ::1] sites,
    const double[:, :, ::1] flip_u,
    const double[:, ::1] swap_u,
    unsigned char[:, ::1] out,
    Py_ssize_t out_start,
    Py_ssize_t thin,
    long long[::1] stats,
):
    """Run ``flip_u.shape[0]`` sweeps in place; returns the next free row of ``out``.

    Proposal ``k`` of chain ``c`` in sweep ``s`` flips site ``sites[s, c, k]``;
    the value ``N`` is a null move. ``stats`` accumulates (accepted flips,
    proposed flips, accepted swaps, proposed swaps).
    """
    cdef Py_ssize_t n_sweeps = flip_u.shape[0]
    cdef Py_ssize_t n_chains = sigma.shape[0]
    cdef Py_ssize_t n = sigma.shape[1]
    cdef Py_ssize_t h = th_re.shape[1]
    cdef Py_ssize_t n_out = out.shape[0]
    cdef Py_ssize_t row = out_start
    cdef Py_ssize_t s, c, i, j, k
    cdef double new_sum, delta, dre, beta, arg, nre, nim, tmp
    cdef unsigned char tb
    cdef long long acc = 0, prop = 0, sacc = 0, sprop = 0
    cdef double[::1] base = np.zeros(n_chains)

    for c in range(n_chains):
        for j in range(h):
            base[c] = base[c] + re_log_cosh(th_re[c, j], th_im[c, j])

    with nogil:
        for s in range(n_sweeps):
            for c in range(n_chains):
                beta = betas[c]
                for k in range(n):
                    i = sites[s, c, k]
                    if i == n:
                        continue
                    delta = -1.0 if sigma[c, i] else 1.0
                    new_sum = 0.0
                    for j in range(h):
                        nre = th_re[c, j] + delta * w_re[i, j]
                        nim = th_im[c, j] + delta * w_im[i, j]
                        new_sum = new_sum + re_log_cosh(nre, nim)
                    dre = delta * a_re[i] + (new_sum - base[c])
                    arg = 2.0 * beta * dre
                    prop += 1
                    if arg >= 0.0 or flip_u[s, c, k] < exp(arg):
                        acc += 1
                        sigma[c, i] = 1 - sigma[c, i]
                        for j in range(h):
                            th_re[c, j] += delta * w_re[i, j]
                            th_im[c, j] += delta * w_im[i, j]
                        base[c] = new_sum
                        logp[c] += 2.0 * dre
            for c in range(n_chains - 1):
                arg = (betas[c] - betas[c + 1]) * (logp[c + 1] - logp[c])
                sprop += 1
                if arg >= 0.0 or swap_u[s, c] < exp(arg):
                    sacc += 1
                    for i in range(n):
                        tb = sigma[c, i]
                        sigma[c, i] = sigma[c + 1, i]
                        sigma[c + 1, i] = tb
                    for j in range(h):
                        tmp = th_re[c, j]
                        th_re[c, j] = th_re[c + 1, j]
                        th_re[c + 1, j] = tmp
                        tmp = th_im[c, j]
                        th_im[c, j] = th_im[c + 1, j]
                        th_im[c + 1, j] = tmp
                    tmp = logp[c]
                    logp[c] = logp[c + 1]
                    logp[c + 1] = tmp
                    tmp = base[c]
                    base[c] = base[c + 1]
                    base[c + 1] = tmp
            if row < n_out and (s + 1) % thin == 0:
                for i in range(n):
                    out[row, i] = sigma[n_chains - 1, i]
                row += 1
    stats[0] += acc
    stats[1] += prop
    stats[2] += sacc
    stats[3] += sprop
    return row
