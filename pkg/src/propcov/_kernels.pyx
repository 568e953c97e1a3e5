# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled alternating-maximization kernels.

Same contract as ``_fallback``; the matrices are small (p up to a few dozen)
so everything is plain loops over C buffers.
"""
import numpy as np
from libc.math cimport log, fabs, sqrt

cdef double PIVOT_RTOL = 1e-12


cdef int _chol_inv_logdet(const double[:, ::1] M, double[:, ::1] L,
                          double[:, ::1] out, double* logdet) noexcept nogil:
    """Cholesky of M into L, inverse of M into out.  Returns 0 or -1 if not PD."""
    cdef Py_ssize_t p = M.shape[0]
    cdef Py_ssize_t i, j, k
    cdef double s, dmax = 0.0
    for i in range(p):
        if M[i, i] > dmax:
            dmax = M[i, i]
    logdet[0] = 0.0
    for j in range(p):
        s = M[j, j]
        for k in range(j):
            s -= L[j, k] * L[j, k]
        if s <= PIVOT_RTOL * dmax or not (s == s):
            return -1
        L[j, j] = sqrt(s)
        logdet[0] += log(s)
        for i in range(j + 1, p):
            s = M[i, j]
            for k in range(j):
                s -= L[i, k] * L[j, k]
            L[i, j] = s / L[j, j]
        for i in range(j):
            L[i, j] = 0.0
    # invert L in place into its lower triangle (column by column)
    for j in range(p):
        L[j, j] = 1.0 / L[j, j]
        for i in range(j + 1, p):
            s = 0.0
            for k in range(j, i):
                s -= L[i, k] * L[k, j]
            L[i, j] = s / L[i, i]
    # out = Linv^T Linv
    for i in range(p):
        for j in range(i, p):
            s = 0.0
            for k in range(j, p):
                s += L[k, i] * L[k, j]
            out[i, j] = s
            out[j, i] = s
    return 0


cdef void _traces(const double[:, ::1] Sinv, const double[:, :, ::1] S, double[::1] t) noexcept nogil:
    cdef Py_ssize_t K = S.shape[0], p = S.shape[1]
    cdef Py_ssize_t k, i, j
    cdef double s
    for k in range(K):
        s = 0.0
        for i in range(p):
            for j in range(p):
                s += Sinv[i, j] * S[k, j, i]
        t[k] = s


cdef double _loglik(const double[::1] n, const double[::1] c, const double[::1] t, double logdet, Py_ssize_t p) noexcept nogil:
    cdef Py_ssize_t k
    cdef double nplus = 0.0, acc = 0.0
    for k in range(n.shape[0]):
        nplus += n[k]
        acc += n[k] * (p * log(c[k]) + t[k] / c[k])
    return -0.5 * nplus * logdet - 0.5 * acc


cdef void _pool(const double[:, :, ::1] S, const double[::1] r, const double[::1] c, double[:, ::1] out) noexcept nogil:
    cdef Py_ssize_t K = S.shape[0], p = S.shape[1]
    cdef Py_ssize_t k, i, j
    cdef double w
    for i in range(p):
        for j in range(p):
            out[i, j] = 0.0
    for k in range(K):
        w = r[k] / c[k]
        for i in range(p):
            for j in range(p):
                out[i, j] += w * S[k, i, j]


def loglik(S, n, Sigma, c):
    """Log-likelihood (constants dropped) of ``Sigma_k = c_k * Sigma``."""
    cdef const double[:, :, ::1] Sv = np.ascontiguousarray(S, dtype=np.float64)
    cdef const double[::1] nv = np.ascontiguousarray(n, dtype=np.float64)
    cdef const double[::1] cv = np.ascontiguousarray(c, dtype=np.float64)
    cdef const double[:, ::1] M = np.ascontiguousarray(Sigma, dtype=np.float64)
    cdef Py_ssize_t p = M.shape[0]
    cdef double[:, ::1] L = np.zeros((p, p))
    cdef double[:, ::1] Sinv = np.zeros((p, p))
    cdef double[::1] t = np.zeros(Sv.shape[0])
    cdef double logdet
    if _chol_inv_logdet(M, L, Sinv, &logdet) != 0:
        raise np.linalg.LinAlgError("matrix is not positive definite")
    _traces(Sinv, Sv, t)
    return _loglik(nv, cv, t, logdet, p)


def flipflop(S, n, double tol=1e-10, int max_iter=500):
    """Alternate the two exact block maximizations until both stop moving.

    Returns ``(Sigma, c, iterations, converged, trace)``.
    """
    cdef const double[:, :, ::1] Sv = np.ascontiguousarray(S, dtype=np.float64)
    cdef const double[::1] nv = np.ascontiguousarray(n, dtype=np.float64)
    cdef Py_ssize_t K = Sv.shape[0], p = Sv.shape[1]
    cdef Py_ssize_t k, i, j
    cdef double nplus = 0.0
    for k in range(K):
        nplus += nv[k]
    r_arr = np.asarray(nv) / nplus
    cdef double[::1] r = r_arr

    c_arr = np.ones(K)
    c_new_arr = np.ones(K)
    Sigma_arr = np.zeros((p, p))
    Sigma_new_arr = np.zeros((p, p))
    cdef double[::1] c = c_arr, c_new = c_new_arr
    cdef double[:, ::1] Sigma = Sigma_arr, Sigma_new = Sigma_new_arr
    cdef double[:, ::1] L = np.zeros((p, p))
    cdef double[:, ::1] Sinv = np.zeros((p, p))
    cdef double[::1] t = np.zeros(K)
    cdef double logdet, ll, ll_new, dc, ds, cmax, smax, dl, step, rho, remaining
    cdef double prev = 0.0
    trace = np.empty(max_iter + 1)
    cdef double[::1] tr = trace

    _pool(Sv, r, c, Sigma)
    if _chol_inv_logdet(Sigma, L, Sinv, &logdet) != 0:
        raise np.linalg.LinAlgError("matrix is not positive definite")
    _traces(Sinv, Sv, t)
    ll = _loglik(nv, c, t, logdet, p)
    tr[0] = ll

    cdef bint converged = False
    cdef int it = 0
    cdef int status = 0
    with nogil:
        while it < max_iter:
            it += 1
            # maximize over all K coefficients, then move along the scale
            # orbit (c / t, t Sigma) back to c_1 = 1; l is unchanged by the move
            c_new[0] = 1.0
            for k in range(1, K):
                c_new[k] = t[k] / t[0]
            _pool(Sv, r, c_new, Sigma_new)
            if _chol_inv_logdet(Sigma_new, L, Sinv, &logdet) != 0:
                status = -1
                break
            _traces(Sinv, Sv, t)
            ll_new = _loglik(nv, c_new, t, logdet, p)

            dc = 0.0
            cmax = 0.0
            for k in range(K):
                if fabs(c_new[k] - c[k]) > dc:
                    dc = fabs(c_new[k] - c[k])
                if c_new[k] > cmax:
                    cmax = c_new[k]
                c[k] = c_new[k]
            dc /= cmax
            ds = 0.0
            smax = 0.0
            for i in range(p):
                for j in range(p):
                    if fabs(Sigma_new[i, j] - Sigma[i, j]) > ds:
                        ds = fabs(Sigma_new[i, j] - Sigma[i, j])
                    if fabs(Sigma_new[i, j]) > smax:
                        smax = fabs(Sigma_new[i, j])
                    Sigma[i, j] = Sigma_new[i, j]
            ds /= smax
            dl = ll_new - ll
            ll = ll_new
            tr[it] = ll
            step = dc if dc > ds else ds
            # bound the distance left to the fixed point under linear convergence
            rho = step / prev if prev > 0.0 else 1.0
            remaining = step * rho / (1.0 - rho) if rho < 1.0 else step
            prev = step
            if step < tol and remaining < tol and dl <= tol * (fabs(ll) if fabs(ll) > 1.0 else 1.0):
                converged = True
                break
    if status != 0:
        raise np.linalg.LinAlgError("matrix is not positive definite")
    return Sigma_arr, c_arr, it, bool(converged), trace[:it + 1].copy()
