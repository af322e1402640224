"""Independent reference computations used by the tests.

Everything here is written directly from the model definitions with plain
numpy/scipy and shares no code with the package's weight kernels.
"""
from __future__ import annotations

import itertools
import math

import numpy as np
from scipy import integrate, stats

from mwglmb.core import AssociationHistory, AssociationMap, Label


def _mvn_logpdf(z, mean, cov):
    return float(stats.multivariate_normal(mean, cov).logpdf(z))


def label_log_weight(models, Z, ell, seq):
    """Log association weight of one label with alpha sequence ``seq``
    starting at its birth scan, from a textbook Kalman filter."""
    motion, birth, sensor = models
    comp = birth.component(ell.iota)
    if seq[0] < 0:
        return math.log(1.0 - comp.r_birth)
    H, R = sensor.H, sensor.R
    kappa = sensor.clutter_rate / sensor.area
    m, P = comp.mean.copy(), comp.cov.copy()
    total = math.log(comp.r_birth)
    for i, a in enumerate(seq):
        k = ell.s + i
        if a < 0:
            return total + math.log(1.0 - motion.p_survive)
        if i > 0:
            m, P = motion.F @ m, motion.F @ P @ motion.F.T + motion.Q
            total += math.log(motion.p_survive)
        if a == 0:
            total += math.log(1.0 - sensor.p_detect)
        else:
            z = Z[k][a - 1]
            S = H @ P @ H.T + R
            total += math.log(sensor.p_detect) + _mvn_logpdf(z, H @ m, S) - math.log(kappa)
            K = P @ H.T @ np.linalg.inv(S)
            m = m + K @ (z - H @ m)
            P = (np.eye(len(m)) - K @ H) @ P
    return total


def history_log_weight(models, Z, gamma: AssociationHistory):
    """Sum of per-label weights; never-born birth labels contribute
    ``log(1 - r_B)`` once, at their birth scan."""
    total = 0.0
    tracks = gamma.tracks()
    for j in range(1, gamma.k + 1):
        for ell, a in gamma.maps[j].entries:
            if ell.s == j and ell not in tracks:
                total += label_log_weight(models, Z, ell, (-1,))
    for ell, seq in tracks.items():
        total += label_log_weight(models, Z, ell, seq)
    return total


def enumerate_histories(models, m_counts):
    """All valid association histories for scans ``0..len(m_counts)-1``.

    ``m_counts[j]`` is the number of measurements at scan ``j`` (index 0
    unused). Labels are born from every birth index at every scan.
    """
    indices = models.birth.indices
    out = []

    def rec(maps, live):
        j = len(maps)
        if j == len(m_counts):
            out.append(AssociationHistory(maps))
            return
        domain = sorted([Label(j, i) for i in indices] + sorted(live))
        values = range(-1, m_counts[j] + 1)
        for combo in itertools.product(values, repeat=len(domain)):
            pos = [a for a in combo if a > 0]
            if len(pos) != len(set(pos)):
                continue
            amap = AssociationMap(j, zip(domain, combo), m_counts[j])
            rec(maps + [amap], amap.live_labels())

    rec([AssociationMap(0, (), 0)], frozenset())
    return out


def exact_posterior(models, Z):
    """``{history: normalised weight}`` over every valid history."""
    m_counts = [len(z) for z in Z]
    hists = enumerate_histories(models, m_counts)
    lw = np.array([history_log_weight(models, Z, g) for g in hists])
    w = np.exp(lw - lw.max())
    w /= w.sum()
    return dict(zip(hists, w))


# ----------------------------------------------------------------- quadrature

def _box(mean, cov, width=12.0):
    sd = np.sqrt(np.diag(cov))
    return mean - width * sd, mean + width * sd


def _pdf2(mean, cov):
    """Bivariate normal density as a plain float function of (x, y)."""
    a, b, c = cov[0, 0], cov[0, 1], cov[1, 1]
    det = a * c - b * b
    ia, ib, ic = c / det, -b / det, a / det
    mx, my = float(mean[0]), float(mean[1])
    norm = 1.0 / (2.0 * math.pi * math.sqrt(det))

    def pdf(x, y):
        dx, dy = x - mx, y - my
        return norm * math.exp(-0.5 * (ia * dx * dx + 2.0 * ib * dx * dy + ic * dy * dy))

    return pdf


def quad_detection(sensor, z, mean, cov):
    """``P_D * int N(z; H x, R) N(x; mean, cov) dx / kappa`` by 2-D quadrature
    over the measured (position) components."""
    mp, Pp = sensor.H @ mean, sensor.H @ cov @ sensor.H.T
    prior = _pdf2(mp, Pp)
    lik = _pdf2(np.asarray(z, float), sensor.R)
    lo, hi = _box(mp, Pp)
    # integrate over the box of the narrower factor around its mode
    if np.trace(sensor.R) < np.trace(Pp):
        lo, hi = _box(np.asarray(z, float), sensor.R)
    val, _ = integrate.dblquad(lambda y, x: prior(x, y) * lik(x, y),
                               lo[0], hi[0], lo[1], hi[1], epsabs=0, epsrel=1e-11)
    return sensor.p_detect * val / (sensor.clutter_rate / sensor.area)


def quad_expectation(fn, mean, cov, H):
    """``int fn(H x) N(x; mean, cov) dx`` for a function of position only."""
    mp, Pp = H @ mean, H @ cov @ H.T
    dens = _pdf2(mp, Pp)
    lo, hi = _box(mp, Pp)
    val, _ = integrate.dblquad(lambda y, x: fn(np.array([x, y])) * dens(x, y),
                               lo[0], hi[0], lo[1], hi[1], epsabs=0, epsrel=1e-11)
    return val


# ------------------------------------------------------------------------ ospa

def ospa_brute(X, Y, c, p):
    X, Y = np.asarray(X, float).reshape(-1, 2), np.asarray(Y, float).reshape(-1, 2)
    if len(X) > len(Y):
        X, Y = Y, X
    m, n = len(X), len(Y)
    if n == 0:
        return 0.0
    best = math.inf
    for perm in itertools.permutations(range(n), m):
        s = sum(min(c, float(np.linalg.norm(X[i] - Y[perm[i]]))) ** p for i in range(m))
        best = min(best, s)
    if m == 0:
        best = 0.0
    return ((best + c**p * (n - m)) / n) ** (1.0 / p)


def rts_batch(motion, sensor, prior_mean, prior_cov, Z_seq):
    """Smoothed means from the joint Gaussian over all states (batch
    solution), with ``None`` entries in ``Z_seq`` for missed scans."""
    n, d = len(Z_seq), len(prior_mean)
    F, Q, H, R = motion.F, motion.Q, sensor.H, sensor.R
    # information form of the joint prior and likelihood
    Lam = np.zeros((n * d, n * d))
    eta = np.zeros(n * d)
    P0i = np.linalg.inv(prior_cov)
    Lam[:d, :d] += P0i
    eta[:d] += P0i @ prior_mean
    Qi = np.linalg.inv(Q)
    for t in range(1, n):
        a, b = slice((t - 1) * d, t * d), slice(t * d, (t + 1) * d)
        Lam[a, a] += F.T @ Qi @ F
        Lam[a, b] -= F.T @ Qi
        Lam[b, a] -= Qi @ F
        Lam[b, b] += Qi
    Ri = np.linalg.inv(R)
    for t, z in enumerate(Z_seq):
        if z is None:
            continue
        s = slice(t * d, (t + 1) * d)
        Lam[s, s] += H.T @ Ri @ H
        eta[s] += H.T @ Ri @ np.asarray(z)
    return np.linalg.solve(Lam, eta).reshape(n, d)
