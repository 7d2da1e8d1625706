# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled one-sided Jacobi sweeps (cyclic row ordering)."""

from libc.math cimport fabs, sqrt


def jacobi_sweeps(double[:, ::1] G, double[:, ::1] Vt, double rel_tol,
                  double floor, int max_sweeps):
    """Orthogonalize the rows of ``G`` in place.

    Pairs are visited in cyclic order (p ascending, then q ascending).
    Every rotation is mirrored on the rows of ``Vt``. Returns the number of
    sweeps used, or -1 if ``max_sweeps`` passed without convergence.
    """
    cdef Py_ssize_t n = G.shape[0]
    cdef Py_ssize_t m = G.shape[1]
    cdef Py_ssize_t nv = Vt.shape[1]
    cdef Py_ssize_t p, q, k
    cdef int sweep
    cdef long rotated
    cdef double alpha, beta, gamma, zeta, t, c, s, x, y

    for sweep in range(max_sweeps):
        rotated = 0
        for p in range(n - 1):
            for q in range(p + 1, n):
                alpha = 0.0
                beta = 0.0
                gamma = 0.0
                for k in range(m):
                    x = G[p, k]
                    y = G[q, k]
                    alpha = alpha + x * x
                    beta = beta + y * y
                    gamma = gamma + x * y
                alpha = sqrt(alpha)
                beta = sqrt(beta)
                if alpha <= floor or beta <= floor:
                    continue
                if fabs(gamma) <= rel_tol * alpha * beta:
                    continue
                rotated += 1
                zeta = (beta * beta - alpha * alpha) / (2.0 * gamma)
                if fabs(zeta) > 1e150:
                    t = 0.5 / zeta
                elif zeta >= 0.0:
                    t = 1.0 / (zeta + sqrt(1.0 + zeta * zeta))
                else:
                    t = -1.0 / (-zeta + sqrt(1.0 + zeta * zeta))
                c = 1.0 / sqrt(1.0 + t * t)
                s = c * t
                for k in range(m):
                    x = G[p, k]
                    y = G[q, k]
                    G[p, k] = c * x - s * y
                    G[q, k] = s * x + c * y
                for k in range(nv):
                    x = Vt[p, k]
                    y = Vt[q, k]
                    Vt[p, k] = c * x - s * y
                    Vt[q, k] = s * x + c * y
        if rotated == 0:
            return sweep + 1
    return -1
