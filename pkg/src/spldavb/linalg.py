"""Small shared linear-algebra helpers (Cholesky-based, with a jitter policy)."""

import numpy as np
import scipy.linalg


class NotPositiveDefiniteError(ValueError):
    pass


def sym(a):
    """Symmetrize a square matrix."""
    return 0.5 * (a + a.T)


def chol_with_jitter(a):
    """Lower Cholesky factor of ``a``.

    On failure, adds ``1e-10 * tr(a)/dim`` to the diagonal once and retries;
    a second failure raises :class:`NotPositiveDefiniteError`.
    """
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        pass
    jitter = 1e-10 * np.trace(a) / a.shape[0]
    try:
        return np.linalg.cholesky(a + jitter * np.eye(a.shape[0]))
    except np.linalg.LinAlgError:
        raise NotPositiveDefiniteError(
            f"matrix of shape {a.shape} is not positive definite (jitter {jitter:g} did not help)"
        ) from None


def logdet_pd(a):
    """log|a| for a symmetric positive-definite matrix, via Cholesky."""
    return 2.0 * np.sum(np.log(np.diag(chol_with_jitter(a))))


def inv_pd(a):
    """Inverse of a symmetric positive-definite matrix, via Cholesky."""
    l = chol_with_jitter(a)
    identity = np.eye(a.shape[0])
    x = scipy.linalg.solve_triangular(l, identity, lower=True)
    return sym(scipy.linalg.solve_triangular(l.T, x, lower=False))


def solve_pd(a, b):
    """Solve ``a x = b`` for symmetric positive-definite ``a``."""
    l = chol_with_jitter(a)
    x = scipy.linalg.solve_triangular(l, b, lower=True)
    return scipy.linalg.solve_triangular(l.T, x, lower=False)
