"""Pure numpy implementation of the alternating-maximization kernels.

Mirrors ``_kernels.pyx`` step for step; used when the compiled extension is
unavailable or ``PROPCOV_PURE_PYTHON`` is set.
"""
import numpy as np

PIVOT_RTOL = 1e-12


def _chol_inv_logdet(Sigma):
    L = np.linalg.cholesky(Sigma)
    d = np.diag(L)
    if d.min() ** 2 <= PIVOT_RTOL * np.diag(Sigma).max():
        raise np.linalg.LinAlgError("matrix is not positive definite (vanishing pivot)")
    Linv = np.linalg.inv(L)
    return Linv.T @ Linv, 2.0 * np.log(d).sum()


def _traces(Sinv, S):
    return np.einsum("ij,kji->k", Sinv, S)


def _loglik(n, c, traces, logdet, p):
    return float(-0.5 * n.sum() * logdet - 0.5 * np.sum(n * (p * np.log(c) + traces / c)))


def loglik(S, n, Sigma, c):
    """Log-likelihood (constants dropped) of ``Sigma_k = c_k * Sigma``."""
    S = np.asarray(S, dtype=float)
    n = np.asarray(n, dtype=float)
    c = np.asarray(c, dtype=float)
    Sinv, logdet = _chol_inv_logdet(np.asarray(Sigma, dtype=float))
    return _loglik(n, c, _traces(Sinv, S), logdet, S.shape[1])


def flipflop(S, n, tol=1e-10, max_iter=500):
    """Alternate the two exact block maximizations until both stop moving.

    Returns ``(Sigma, c, iterations, converged, trace)``.
    """
    S = np.asarray(S, dtype=float)
    n = np.asarray(n, dtype=float)
    K, p = S.shape[0], S.shape[1]
    r = n / n.sum()

    c = np.ones(K)
    Sigma = np.tensordot(r / c, S, axes=1)
    Sinv, logdet = _chol_inv_logdet(Sigma)
    ll = _loglik(n, c, _traces(Sinv, S), logdet, p)
    trace = [ll]

    converged = False
    it = 0
    prev = 0.0
    while it < max_iter:
        it += 1
        t = _traces(Sinv, S)
        c_new = t / t[0]  # free maximization over c, rescaled to c_1 = 1
        Sigma_new = np.tensordot(r / c_new, S, axes=1)
        Sinv, logdet = _chol_inv_logdet(Sigma_new)
        ll_new = _loglik(n, c_new, _traces(Sinv, S), logdet, p)

        dc = np.max(np.abs(c_new - c)) / np.max(c_new)
        ds = np.max(np.abs(Sigma_new - Sigma)) / np.max(np.abs(Sigma_new))
        dl = ll_new - ll
        c, Sigma, ll = c_new, Sigma_new, ll_new
        trace.append(ll)
        step = max(dc, ds)
        # linear convergence: the distance left to the fixed point is about
        # step * rho / (1 - rho), with rho the observed contraction ratio
        rho = step / prev if prev > 0.0 else 1.0
        remaining = step * rho / (1.0 - rho) if rho < 1.0 else step
        prev = step
        if step < tol and remaining < tol and dl <= tol * max(1.0, abs(ll)):
            converged = True
            break

    return Sigma, c, it, converged, np.array(trace)
