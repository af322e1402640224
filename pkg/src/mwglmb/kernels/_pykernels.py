"""Pure numpy implementation of the hot kernels.

Used when the compiled extension is unavailable or when ``MWGLMB_PURE=1``.
Semantics must match ``_ckernels.pyx`` exactly (up to float rounding).
"""
import math

import numpy as np

BACKEND = "python"

_LOG_2PI = math.log(2.0 * math.pi)


def predict(m, P, F, Q):
    """Kalman time update. Returns ``(F m, F P F^T + Q)``."""
    m2 = F @ m
    P2 = F @ P @ F.T + Q
    return m2, 0.5 * (P2 + P2.T)


def update(m, P, z, H, R):
    """Joseph-form Kalman measurement update.

    Returns the posterior mean and covariance together with the log of the
    predictive density ``N(z; H m, H P H^T + R)``.
    """
    PHt = P @ H.T
    S = H @ PHt + R
    S = 0.5 * (S + S.T)
    L = np.linalg.cholesky(S)
    nu = z - H @ m
    K = np.linalg.solve(S, PHt.T).T
    m2 = m + K @ nu
    IKH = np.eye(m.shape[0]) - K @ H
    P2 = IKH @ P @ IKH.T + K @ R @ K.T
    P2 = 0.5 * (P2 + P2.T)
    w = np.linalg.solve(L, nu)
    loglik = -0.5 * (z.shape[0] * _LOG_2PI + w @ w) - np.log(np.diag(L)).sum()
    return m2, P2, float(loglik)


def gaussian_loglik(z, mean, cov):
    """Log density of ``N(z; mean, cov)``."""
    L = np.linalg.cholesky(0.5 * (cov + cov.T))
    w = np.linalg.solve(L, z - mean)
    return float(-0.5 * (z.shape[0] * _LOG_2PI + w @ w) - np.log(np.diag(L)).sum())


def gibbs_assign(costs, init, gumbels):
    """Single-scan Gibbs sampler over a log-cost table.

    ``costs[n, c]`` is the log weight of assigning row ``n`` the value
    ``alpha = c - 1`` (so column 0 is ``-1``, column 1 is misdetection).
    Positive values are exclusive across rows. Draws use Gumbel-max with the
    supplied noise ``gumbels[t, n, c]``. Returns an int array of shape
    ``(T, P)`` holding the state after each full sweep.
    """
    costs = np.asarray(costs, dtype=float)
    n_rows, n_cols = costs.shape
    n_iter = gumbels.shape[0]
    cur = np.array(init, dtype=np.int64)
    out = np.empty((n_iter, n_rows), dtype=np.int64)
    used = np.zeros(n_cols, dtype=np.int64)
    for n in range(n_rows):
        if cur[n] >= 1:
            used[cur[n] + 1] += 1
    for t in range(n_iter):
        g = gumbels[t]
        for n in range(n_rows):
            a = cur[n]
            if a >= 1:
                used[a + 1] -= 1
            score = costs[n] + g[n]
            score[costs[n] == -np.inf] = -np.inf
            score[2:][used[2:] > 0] = -np.inf
            c = int(np.argmax(score))
            if score[c] == -np.inf:
                c = a + 1
            cur[n] = c - 1
            if c >= 2:
                used[c] += 1
        out[t] = cur
    return out
