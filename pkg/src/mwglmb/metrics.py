"""OSPA between point sets and OSPA-squared between sets of tracks."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, NamedTuple

import numpy as np
from scipy.optimize import linear_sum_assignment


@dataclass(frozen=True)
class OspaParams:
    c: float = 100.0
    p: float = 1.0
    window_w: int = 10

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("cutoff c must be positive")
        if not self.p >= 1:
            raise ValueError("order p must be >= 1")
        if self.window_w < 1:
            raise ValueError("window_w must be >= 1")


class OspaComponents(NamedTuple):
    total: float
    localisation: float
    cardinality: float


def _as_points(X) -> np.ndarray:
    return np.asarray(X, dtype=float).reshape(len(X), -1) if len(X) else np.zeros((0, 2))


def _ospa_from_costs(D: np.ndarray, n_x: int, n_y: int, params: OspaParams) -> OspaComponents:
    """OSPA given the matrix of cut-off base distances ``D`` (n_x by n_y)."""
    n = max(n_x, n_y)
    if n == 0:
        return OspaComponents(0.0, 0.0, 0.0)
    c, p = params.c, params.p
    if min(n_x, n_y) == 0:
        loc = 0.0
    else:
        Dp = np.minimum(D, c) ** p
        rows, cols = linear_sum_assignment(Dp)
        loc = float(Dp[rows, cols].sum())
    card = c**p * abs(n_x - n_y)
    return OspaComponents((max(loc + card, 0.0) / n) ** (1.0 / p),
                          (loc / n) ** (1.0 / p), (card / n) ** (1.0 / p))


def ospa_components(X, Y, params: OspaParams = OspaParams()) -> OspaComponents:
    """OSPA distance between finite point sets with its localisation and
    cardinality parts (each reported on the metric's own scale)."""
    X, Y = _as_points(X), _as_points(Y)
    if len(X) and len(Y):
        D = np.linalg.norm(X[:, None, :] - Y[None, :, :], axis=-1)
    else:
        D = np.zeros((len(X), len(Y)))
    return _ospa_from_costs(D, len(X), len(Y), params)


def ospa(X, Y, params: OspaParams = OspaParams()) -> float:
    return ospa_components(X, Y, params).total


Track = Mapping[int, np.ndarray]  # scan -> position


def track_distance(a: Track, b: Track, scans, c: float, p: float = 1.0) -> float:
    """Time-averaged base distance between two tracks over ``scans``.

    Scans where both tracks exist contribute ``min(c, |a - b|)^p``, scans
    where exactly one exists contribute ``c^p``; scans where neither exists
    are left out of the average. Returns the p-th root of the average.
    """
    total, count = 0.0, 0
    for t in scans:
        xa, xb = a.get(t), b.get(t)
        if xa is None and xb is None:
            continue
        count += 1
        if xa is None or xb is None:
            total += c**p
        else:
            total += min(c, float(np.linalg.norm(np.asarray(xa) - np.asarray(xb)))) ** p
    return 0.0 if count == 0 else (total / count) ** (1.0 / p)


def ospa2(truth_tracks: Mapping, est_tracks: Mapping, params: OspaParams, k: int) -> float:
    """OSPA over tracks in the window of ``window_w`` scans ending at ``k``.

    Each argument maps a track identifier to ``{scan: position}``. Tracks
    with no point inside the window are ignored.
    """
    scans = range(k - params.window_w + 1, k + 1)
    A = [t for t in truth_tracks.values() if any(s in t for s in scans)]
    B = [t for t in est_tracks.values() if any(s in t for s in scans)]
    D = np.array([[track_distance(a, b, scans, params.c, params.p) for b in B] for a in A])
    return _ospa_from_costs(D.reshape(len(A), len(B)), len(A), len(B), params).total


def tracks_from_states(states) -> dict:
    """``{label: {scan: position}}`` from a sequence of labeled state sets."""
    out: dict = {}
    for X in states:
        for (x, ell), pos in zip(X.items, X.positions()):
            out.setdefault(ell, {})[X.scan] = np.asarray(pos, dtype=float)
    return out
