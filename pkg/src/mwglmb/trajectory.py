"""Per-label trajectory posteriors and association-weight kernels.

A trajectory posterior is stored as a chain of nodes, one per scan, each
holding the filtered Gaussian at that scan and the cumulative log
association weight since birth. Nodes are shared between hypotheses through
:class:`TrajectoryCache`, keyed by ``(label, alphas)``.
"""
from __future__ import annotations

import math
import threading
from collections import OrderedDict
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import kernels
from .core import AssociationHistory, Label
from .models import BirthComponent, Gaussian, Models, MotionModel, SensorModel, safe_log


class TrajectoryError(RuntimeError):
    """Raised when a trajectory operation violates its contract."""


class TrajectoryPosterior:
    """Trajectory posterior of one label for a given alpha sequence.

    ``alphas`` holds the live measurement indices for scans ``s..t``; a
    terminated posterior (object died at ``t + 1``) keeps the same filtered
    densities and adds the death factor to ``log_weight``.
    """

    __slots__ = ("label", "s", "t", "alphas", "mean", "cov", "log_weight", "factor",
                 "parent", "terminated", "key", "children")

    def __init__(self, label, s, t, alphas, mean, cov, log_weight, factor, parent=None,
                 terminated=False):
        self.label = label
        self.s = s
        self.t = t
        self.alphas = alphas
        self.mean = mean
        self.cov = cov
        self.log_weight = log_weight
        self.factor = factor
        self.parent = parent
        self.terminated = terminated
        self.key = alphas + (-1,) if terminated else alphas
        self.children = {}  # alpha -> cached extension, maintained by the cache

    def __repr__(self):
        state = "dead" if self.terminated else "live"
        return (f"TrajectoryPosterior({self.label}, s={self.s}, t={self.t}, {state}, "
                f"log_weight={self.log_weight:.6g})")

    def _chain(self):
        node = self
        out = []
        while node is not None:
            out.append(node)
            node = node.parent
        out.reverse()
        return out

    @property
    def filt(self) -> list[Gaussian]:
        """Filtered densities for scans ``s..t``."""
        return [Gaussian(n.mean, n.cov) for n in self._chain() if not n.terminated]

    @property
    def log_eta_factors(self) -> list[float]:
        """Per-scan log association weights since birth (death factor last)."""
        return [n.factor for n in self._chain()]

    @property
    def density(self) -> Gaussian:
        return Gaussian(self.mean, self.cov)


def birth_update(birth: BirthComponent, sensor: SensorModel, Z_k: Sequence, alpha_k: int,
                 k: int, label: Optional[Label] = None):
    """Birth posterior and log weight ``log P_B + log psi`` for a new label.

    ``alpha_k == 0`` leaves the birth density unchanged.
    """
    if alpha_k < 0 or alpha_k > len(Z_k):
        raise ValueError(f"alpha_k={alpha_k} outside 0..{len(Z_k)}")
    label = Label(k, birth.label_index) if label is None else label
    log_pb = safe_log(birth.r_birth)
    if alpha_k == 0:
        mean, cov = birth.mean, birth.cov
        w = log_pb + safe_log(1.0 - sensor.p_detect)
    else:
        z = np.ascontiguousarray(Z_k[alpha_k - 1], dtype=float)
        mean, cov, ll = kernels.update(birth.mean, birth.cov, z, sensor.H, sensor.R)
        w = log_pb + safe_log(sensor.p_detect) + ll - safe_log(sensor.kappa(z))
    node = TrajectoryPosterior(label, k, k, (alpha_k,), mean, cov, w, w)
    return node, w


def survival_update(traj: TrajectoryPosterior, motion: MotionModel, sensor: SensorModel,
                    Z_k: Sequence, alpha_k: int, k: int):
    """Predict one scan and apply the measurement ``alpha_k`` (0 = missed).

    Returns the extended posterior and ``log P_S + log psi`` where psi is
    integrated against the predicted density.
    """
    if traj.terminated or traj.t != k - 1:
        raise TrajectoryError(f"cannot extend {traj!r} to scan {k}")
    if alpha_k < 0 or alpha_k > len(Z_k):
        raise ValueError(f"alpha_k={alpha_k} outside 0..{len(Z_k)}")
    m, P = kernels.predict(traj.mean, traj.cov, motion.F, motion.Q)
    log_ps = safe_log(motion.p_survive)
    if alpha_k == 0:
        w = log_ps + safe_log(1.0 - sensor.p_detect)
    else:
        z = np.ascontiguousarray(Z_k[alpha_k - 1], dtype=float)
        m, P, ll = kernels.update(m, P, z, sensor.H, sensor.R)
        w = log_ps + safe_log(sensor.p_detect) + ll - safe_log(sensor.kappa(z))
    node = TrajectoryPosterior(traj.label, traj.s, k, traj.alphas + (alpha_k,), m, P,
                               traj.log_weight + w, w, traj)
    return node, w


def _gauss_hermite_expectation(fn, density: Gaussian, order: int = 12) -> float:
    m, P = density
    n = m.shape[0]
    x, w = np.polynomial.hermite_e.hermegauss(order)
    w = w / w.sum()
    L = np.linalg.cholesky(P + 1e-300 * np.eye(n))
    grids = np.meshgrid(*([x] * n), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    wts = np.prod(np.meshgrid(*([w] * n), indexing="ij"), axis=0).ravel()
    states = m + pts @ L.T
    return float(sum(wi * fn(s) for wi, s in zip(wts, states)))


def death_weight(traj: TrajectoryPosterior,
                 p_survive: Union[float, MotionModel, Callable[[np.ndarray], float]]) -> float:
    """Log probability that the object dies after its last live scan.

    With constant survival this is ``log(1 - P_S)``; a callable ``P_S(x)`` is
    integrated against the last filtered density by Gauss-Hermite cubature.
    """
    if traj.terminated:
        raise TrajectoryError(f"{traj!r} is already terminated")
    if isinstance(p_survive, MotionModel):
        p_survive = p_survive.p_survive
    if callable(p_survive):
        q = _gauss_hermite_expectation(lambda x: 1.0 - p_survive(x), traj.density)
        return safe_log(q)
    return safe_log(1.0 - p_survive)


def terminate(traj: TrajectoryPosterior, motion: MotionModel) -> TrajectoryPosterior:
    w = death_weight(traj, motion)
    return TrajectoryPosterior(traj.label, traj.s, traj.t, traj.alphas, traj.mean, traj.cov,
                               traj.log_weight + w, w, traj, terminated=True)


def not_born_weight(birth: BirthComponent) -> float:
    """Log probability ``log(1 - P_B)`` that a birth label is not born."""
    return safe_log(1.0 - birth.r_birth)


class TrajectoryCache:
    """LRU table of trajectory posteriors keyed by ``(label, alphas)``.

    ``alphas`` is the alpha sequence from the label's birth scan, ending in
    ``-1`` for a terminated trajectory. The cache is bound to one model set
    and one measurement sequence; measurement scans are added with
    :meth:`add_scan`. Inserts are synchronised; concurrent duplicate
    computation is harmless since values are deterministic.
    """

    def __init__(self, models: Models, capacity: int = 200_000, measurements=None):
        self.models = models
        self.capacity = int(capacity)
        self._entries: OrderedDict = OrderedDict()
        self._lock = threading.Lock()
        self._Z: list = [np.zeros((0, 2))]
        self.hits = 0
        self.misses = 0
        # derived per-label tables kept by the Gibbs sampler; values only
        # depend on cached quantities so they never go stale
        self.tables: dict = {}
        if measurements is not None:
            for j, Z in enumerate(measurements):
                if j > 0:
                    self.add_scan(j, Z)

    def __len__(self):
        return len(self._entries)

    def add_scan(self, k: int, Z) -> None:
        Z = np.ascontiguousarray(np.asarray(Z, dtype=float).reshape(-1, 2))
        if k < len(self._Z):
            if not np.array_equal(self._Z[k], Z):
                raise ValueError(f"scan {k} already registered with different measurements")
            return
        if k != len(self._Z):
            raise ValueError(f"scan {k} added out of order (next is {len(self._Z)})")
        self._Z.append(Z)

    def measurements(self, k: int) -> np.ndarray:
        return self._Z[k]

    def n_measurements(self, k: int) -> int:
        return len(self._Z[k])

    @property
    def last_scan(self) -> int:
        return len(self._Z) - 1

    def not_born_weight(self, label: Label) -> float:
        return not_born_weight(self.models.birth.component(label.iota))

    def _get(self, key):
        entries = self._entries
        node = entries.get(key)
        if node is not None:
            self.hits += 1
            try:
                entries.move_to_end(key)
            except KeyError:
                pass
        return node

    def _put(self, key, node):
        with self._lock:
            existing = self._entries.get(key)
            if existing is not None:
                return existing
            self._entries[key] = node
            if node.parent is not None:
                node.parent.children[node.key[-1]] = node
            while len(self._entries) > self.capacity:
                _, old = self._entries.popitem(last=False)
                if old.parent is not None:
                    old.parent.children.pop(old.key[-1], None)
        return node

    def _compute(self, parent: Optional[TrajectoryPosterior], label: Label, alpha: int):
        m = self.models
        if parent is None:
            k = label.s
            node, _ = birth_update(m.birth.component(label.iota), m.sensor, self._Z[k], alpha,
                                   k, label)
            return node
        if alpha < 0:
            return terminate(parent, m.motion)
        k = parent.t + 1
        node, _ = survival_update(parent, m.motion, m.sensor, self._Z[k], alpha, k)
        return node

    def lookup(self, label: Label, alphas: tuple) -> Optional[TrajectoryPosterior]:
        """Posterior for ``alphas`` (``None`` for the not-born sequence ``(-1,)``)."""
        if alphas[0] < 0:
            if len(alphas) != 1:
                raise TrajectoryError(f"invalid alpha sequence {alphas} for {label}")
            return None
        node = self._get((label, alphas))
        if node is not None:
            return node
        # walk back to the longest cached prefix, then extend forwards
        n = len(alphas) - 1
        parent = None
        while n > 0:
            parent = self._get((label, alphas[:n]))
            if parent is not None:
                break
            n -= 1
        for i in range(n, len(alphas)):
            if parent is not None and parent.terminated:
                raise TrajectoryError(f"alpha sequence {alphas} continues after death")
            self.misses += 1
            node = self._compute(parent, label, alphas[i])
            parent = self._put((label, alphas[:i + 1]), node)
        return parent

    def find(self, label: Label, alphas: tuple) -> TrajectoryPosterior:
        """:meth:`lookup` for a sequence of a born label, with a fast hit path."""
        key = (label, alphas)
        node = self._entries.get(key)
        if node is None:
            return self.lookup(label, alphas)
        self.hits += 1
        self._entries.move_to_end(key)
        return node

    def extend(self, traj: Optional[TrajectoryPosterior], label: Label, alpha: int):
        """Posterior for ``traj``'s sequence followed by ``alpha``."""
        if traj is None:
            return self.lookup(label, (alpha,))
        node = traj.children.get(alpha)
        if node is not None:
            self.hits += 1
            return node
        key = (label, traj.key + (alpha,))
        node = self._get(key)
        if node is None:
            if traj.terminated:
                raise TrajectoryError(f"{traj!r} is frozen")
            self.misses += 1
            node = self._put(key, self._compute(traj, label, alpha))
        traj.children[alpha] = node
        return node

    def log_weight(self, label: Label, alphas: tuple) -> float:
        """Cumulative log association weight of ``label`` with ``alphas``."""
        if not alphas:
            return 0.0
        node = self.lookup(label, alphas)
        return self.not_born_weight(label) if node is None else node.log_weight


def eta(gamma: AssociationHistory, ell: Label, j: int, cache: TrajectoryCache) -> float:
    """Log association weight of ``ell`` at scan ``j`` under ``gamma``.

    Dispatches on newborn, surviving, dying at ``j`` and not-born cases.
    ``ell`` must be in the domain of map ``j`` (a birth at ``j`` or live at
    ``j - 1``).
    """
    alpha = gamma.alpha(ell, j)
    prev = gamma.alpha(ell, j - 1) if j > 0 else -1
    if ell.s == j:
        if alpha < 0:
            return cache.not_born_weight(ell)
        return cache.lookup(ell, (alpha,)).log_weight
    if prev < 0:
        raise TrajectoryError(f"{ell} is not in the domain of scan {j}")
    seq = tuple(gamma.alpha(ell, i) for i in range(ell.s, j + 1))
    node = cache.lookup(ell, seq)
    return node.factor


def smooth(traj: TrajectoryPosterior, motion: MotionModel) -> list[Gaussian]:
    """Rauch-Tung-Striebel smoothed marginals over the trajectory's lifespan."""
    filt = traj.filt
    n = len(filt)
    out = [None] * n
    out[-1] = filt[-1]
    F, Q = motion.F, motion.Q
    for i in range(n - 2, -1, -1):
        m, P = filt[i]
        m_pred = F @ m
        P_pred = F @ P @ F.T + Q
        G = np.linalg.solve(P_pred.T, (P @ F.T).T).T
        ms, Ps = out[i + 1]
        m_s = m + G @ (ms - m_pred)
        P_s = P + G @ (Ps - P_pred) @ G.T
        out[i] = Gaussian(m_s, 0.5 * (P_s + P_s.T))
    return out
