# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: small dense Kalman steps and the single-scan Gibbs
sampler. Mirrors ``_pykernels`` exactly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport log, sqrt, INFINITY, M_PI

cnp.import_array()

BACKEND = "cython"

cdef enum:
    MAXD = 8

cdef double LOG_2PI = log(2.0 * M_PI)


cdef int _cholesky(double* A, double* L, int n) noexcept nogil:
    """Lower Cholesky factor of the n x n row-major A. Returns -1 if not PD."""
    cdef int i, j, p
    cdef double s
    for i in range(n):
        for j in range(i + 1):
            s = A[i * n + j]
            for p in range(j):
                s -= L[i * n + p] * L[j * n + p]
            if i == j:
                if s <= 0.0:
                    return -1
                L[i * n + i] = sqrt(s)
            else:
                L[i * n + j] = s / L[j * n + j]
        for j in range(i + 1, n):
            L[i * n + j] = 0.0
    return 0


cdef void _forward(double* L, double* b, double* x, int n) noexcept nogil:
    cdef int i, p
    cdef double s
    for i in range(n):
        s = b[i]
        for p in range(i):
            s -= L[i * n + p] * x[p]
        x[i] = s / L[i * n + i]


cdef void _backward_t(double* L, double* b, double* x, int n) noexcept nogil:
    """Solve L^T x = b."""
    cdef int i, p
    cdef double s
    for i in range(n - 1, -1, -1):
        s = b[i]
        for p in range(i + 1, n):
            s -= L[p * n + i] * x[p]
        x[i] = s / L[i * n + i]


def predict(const double[::1] m, const double[:, ::1] P,
            const double[:, ::1] F, const double[:, ::1] Q):
    """Kalman time update. Returns ``(F m, F P F^T + Q)``."""
    cdef int n = m.shape[0]
    cdef int i, j, p
    cdef double s
    cdef double FP[MAXD * MAXD]
    if n > MAXD:
        raise ValueError("state dimension too large for compiled kernel")
    m2_arr = np.empty(n)
    P2_arr = np.empty((n, n))
    cdef double[::1] m2 = m2_arr
    cdef double[:, ::1] P2 = P2_arr
    for i in range(n):
        s = 0.0
        for p in range(n):
            s += F[i, p] * m[p]
        m2[i] = s
        for j in range(n):
            s = 0.0
            for p in range(n):
                s += F[i, p] * P[p, j]
            FP[i * n + j] = s
    for i in range(n):
        for j in range(i + 1):
            s = 0.0
            for p in range(n):
                s += FP[i * n + p] * F[j, p]
            s += 0.5 * (Q[i, j] + Q[j, i])
            P2[i, j] = s
            P2[j, i] = s
    return m2_arr, P2_arr


def update(const double[::1] m, const double[:, ::1] P, const double[::1] z,
           const double[:, ::1] H, const double[:, ::1] R):
    """Joseph-form Kalman measurement update.

    Returns ``(mean, cov, log N(z; H m, H P H^T + R))``.
    """
    cdef int n = m.shape[0]
    cdef int d = z.shape[0]
    cdef int i, j, p, q
    cdef double s, logdet, maha
    cdef double PHt[MAXD * MAXD]
    cdef double S[MAXD * MAXD]
    cdef double L[MAXD * MAXD]
    cdef double K[MAXD * MAXD]
    cdef double IKH[MAXD * MAXD]
    cdef double T1[MAXD * MAXD]
    cdef double KR[MAXD * MAXD]
    cdef double nu[MAXD]
    cdef double w[MAXD]
    cdef double y[MAXD]
    cdef double col[MAXD]
    if n > MAXD or d > MAXD:
        raise ValueError("dimension too large for compiled kernel")
    # PHt = P H^T  (n x d)
    for i in range(n):
        for j in range(d):
            s = 0.0
            for p in range(n):
                s += P[i, p] * H[j, p]
            PHt[i * d + j] = s
    # S = H PHt + R, symmetrised
    for i in range(d):
        for j in range(d):
            s = 0.0
            for p in range(n):
                s += H[i, p] * PHt[p * d + j]
            S[i * d + j] = s
    for i in range(d):
        for j in range(i + 1):
            s = 0.5 * (S[i * d + j] + S[j * d + i]) + 0.5 * (R[i, j] + R[j, i])
            S[i * d + j] = s
            S[j * d + i] = s
    if _cholesky(S, L, d) != 0:
        raise np.linalg.LinAlgError("innovation covariance is not positive definite")
    for i in range(d):
        s = z[i]
        for p in range(n):
            s -= H[i, p] * m[p]
        nu[i] = s
    # K = PHt S^{-1}: solve S K^T = PHt^T row by row
    for i in range(n):
        for j in range(d):
            col[j] = PHt[i * d + j]
        _forward(L, col, y, d)
        _backward_t(L, y, w, d)
        for j in range(d):
            K[i * d + j] = w[j]
    m2_arr = np.empty(n)
    P2_arr = np.empty((n, n))
    cdef double[::1] m2 = m2_arr
    cdef double[:, ::1] P2 = P2_arr
    for i in range(n):
        s = m[i]
        for j in range(d):
            s += K[i * d + j] * nu[j]
        m2[i] = s
    # IKH = I - K H
    for i in range(n):
        for j in range(n):
            s = 1.0 if i == j else 0.0
            for p in range(d):
                s -= K[i * d + p] * H[p, j]
            IKH[i * n + j] = s
    # T1 = IKH P
    for i in range(n):
        for j in range(n):
            s = 0.0
            for p in range(n):
                s += IKH[i * n + p] * P[p, j]
            T1[i * n + j] = s
    # KR = K R
    for i in range(n):
        for j in range(d):
            s = 0.0
            for p in range(d):
                s += K[i * d + p] * R[p, j]
            KR[i * d + j] = s
    for i in range(n):
        for j in range(i + 1):
            s = 0.0
            for p in range(n):
                s += T1[i * n + p] * IKH[j * n + p]
            for q in range(d):
                s += KR[i * d + q] * K[j * d + q]
            P2[i, j] = s
    for i in range(n):
        for j in range(i):
            P2[j, i] = P2[i, j]
    _forward(L, nu, w, d)
    maha = 0.0
    logdet = 0.0
    for i in range(d):
        maha += w[i] * w[i]
        logdet += log(L[i * d + i])
    return m2_arr, P2_arr, -0.5 * (d * LOG_2PI + maha) - logdet


def gaussian_loglik(const double[::1] z, const double[::1] mean, const double[:, ::1] cov):
    """Log density of ``N(z; mean, cov)``."""
    cdef int d = z.shape[0]
    cdef int i, j
    cdef double S[MAXD * MAXD]
    cdef double L[MAXD * MAXD]
    cdef double nu[MAXD]
    cdef double w[MAXD]
    cdef double maha = 0.0, logdet = 0.0
    if d > MAXD:
        raise ValueError("dimension too large for compiled kernel")
    for i in range(d):
        nu[i] = z[i] - mean[i]
        for j in range(d):
            S[i * d + j] = 0.5 * (cov[i, j] + cov[j, i])
    if _cholesky(S, L, d) != 0:
        raise np.linalg.LinAlgError("covariance is not positive definite")
    _forward(L, nu, w, d)
    for i in range(d):
        maha += w[i] * w[i]
        logdet += log(L[i * d + i])
    return -0.5 * (d * LOG_2PI + maha) - logdet


def gibbs_assign(costs, init, gumbels):
    """Single-scan Gibbs sampler over a log-cost table (see ``_pykernels``)."""
    cdef double[:, ::1] C = np.ascontiguousarray(costs, dtype=np.float64)
    cdef double[:, :, ::1] G = np.ascontiguousarray(gumbels, dtype=np.float64)
    cdef Py_ssize_t n_rows = C.shape[0]
    cdef Py_ssize_t n_cols = C.shape[1]
    cdef Py_ssize_t n_iter = G.shape[0]
    cur_arr = np.array(init, dtype=np.int64)
    out_arr = np.empty((n_iter, n_rows), dtype=np.int64)
    used_arr = np.zeros(n_cols, dtype=np.int64)
    cdef long long[::1] cur = cur_arr
    cdef long long[:, ::1] out = out_arr
    cdef long long[::1] used = used_arr
    cdef Py_ssize_t t, n, c, best_c
    cdef long long a
    cdef double v, best
    for n in range(n_rows):
        if cur[n] >= 1:
            used[cur[n] + 1] += 1
    for t in range(n_iter):
        for n in range(n_rows):
            a = cur[n]
            if a >= 1:
                used[a + 1] -= 1
            best = -INFINITY
            best_c = -1
            for c in range(n_cols):
                if c >= 2 and used[c] > 0:
                    continue
                v = C[n, c]
                if v == -INFINITY:
                    continue
                v = v + G[t, n, c]
                if v > best:
                    best = v
                    best_c = c
            if best_c < 0:
                best_c = a + 1
            cur[n] = best_c - 1
            if best_c >= 2:
                used[best_c] += 1
        for n in range(n_rows):
            out[t, n] = cur[n]
    return out_arr
