"""Smoothing-while-filtering driver.

Each scan extends every retained hypothesis with sampled association maps
for the new scan, truncates, then (once ``k >= N``) refines the most recent
``N`` scans of the best hypotheses with the windowed Gibbs sampler.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple, Optional, Sequence

import numpy as np

from . import kernels
from .core import AssociationHistory, AssociationMap, Hypothesis, Label, LabeledStateSet
from .gibbs import GibbsConfig, stream, sweep_window
from .models import Models, MotionModel
from .trajectory import TrajectoryCache, smooth

_EXTEND, _GIBBS = 0, 1


@dataclass(frozen=True)
class SmootherConfig:
    """Truncation and sampling controls.

    ``window=None`` refines the full history at every scan (test oracle
    only); ``smoothing=False`` gives the filter baseline (extension and
    truncation without windowed sweeps). ``samples_filter`` is the total
    extension budget per scan, split across hypotheses in proportion to
    their weights with a floor of one.
    """

    window: Optional[int] = 5
    cap_requested: int = 50
    cap_pre_gibbs: int = 5
    samples_filter: int = 200
    samples_gibbs: int = 30
    smoothing: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.window is not None and self.window < 1:
            raise ValueError("window must be >= 1")
        for name in ("cap_requested", "cap_pre_gibbs", "samples_filter", "samples_gibbs"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")


@dataclass
class PosteriorBank:
    hypotheses: list[Hypothesis]
    weights: np.ndarray
    scan: int

    @classmethod
    def initial(cls) -> "PosteriorBank":
        return cls([Hypothesis(AssociationHistory.empty(), 0.0, {})], np.ones(1), 0)

    @classmethod
    def from_hypotheses(cls, hyps: Sequence[Hypothesis], scan: int) -> "PosteriorBank":
        lw = np.array([h.log_weight for h in hyps], dtype=float)
        return cls(list(hyps), normalize_log_weights(lw), scan)

    def __len__(self):
        return len(self.hypotheses)

    def best(self) -> Hypothesis:
        if not self.hypotheses:
            raise ValueError("empty posterior bank")
        return self.hypotheses[int(np.argmax(self.weights))]

    def ess(self) -> float:
        return float(1.0 / np.sum(self.weights**2))


@dataclass
class StepDiagnostics:
    scan: int
    n_hypotheses: int
    ess: float
    seconds: float
    windowed: bool
    n_extended: int = 0
    frozen_violations: int = 0


def normalize_log_weights(lw: np.ndarray) -> np.ndarray:
    lw = np.asarray(lw, dtype=float)
    if lw.size == 0:
        return lw
    w = np.exp(lw - lw.max())
    return w / w.sum()


def unique(hyps: Iterable[Hypothesis]) -> list[Hypothesis]:
    """One representative per distinct history, first occurrence kept."""
    seen: dict = {}
    for h in hyps:
        seen.setdefault(h.gamma, h)
    return list(seen.values())


def keep_best(hyps: Sequence[Hypothesis], n: int) -> list[Hypothesis]:
    """The ``n`` highest-weight hypotheses; ties broken by history order."""
    order = sorted(hyps, key=lambda h: -h.log_weight)
    # the history order (a pass over every map) is only needed inside ties
    out, i = [], 0
    while i < len(order) and len(out) < n:
        j = i + 1
        while j < len(order) and order[j].log_weight == order[i].log_weight:
            j += 1
        group = order[i:j]
        if len(group) > 1:
            group.sort(key=lambda h: h.gamma.sort_key())
        out.extend(group)
        i = j
    return out[:n]


def allocate_samples(weights: np.ndarray, total: int) -> list[int]:
    return [max(1, int(round(total * w))) for w in weights]


def sample_factors(hypothesis: Hypothesis, T_h: int, cache: TrajectoryCache,
                   rng: np.random.Generator, Z_k=None) -> list[Hypothesis]:
    """Extend ``hypothesis`` by one scan with ``T_h`` single-scan Gibbs sweeps.

    The candidate labels are the births of the new scan plus the labels live
    at the previous one. Returns the distinct extensions in order of first
    appearance, each weighted by the parent weight times the new factor.
    """
    k = hypothesis.k + 1
    if Z_k is not None:
        cache.add_scan(k, Z_k)
    n_meas = cache.n_measurements(k)
    parent_map = hypothesis.gamma.maps[-1]
    live = sorted(parent_map.live_labels())
    births = [Label(k, iota) for iota in cache.models.birth.indices]
    domain = sorted(births + live)
    n_rows, n_cols = len(domain), n_meas + 2
    if n_rows == 0:
        amap = AssociationMap(k, (), n_meas)
        return [Hypothesis(hypothesis.gamma.append(amap), hypothesis.log_weight,
                           hypothesis.trajectories)]
    costs = np.full((n_rows, n_cols), -math.inf)
    nodes = [[None] * n_cols for _ in range(n_rows)]
    init = np.empty(n_rows, dtype=np.int64)
    for n, ell in enumerate(domain):
        if ell.s == k:
            init[n] = -1
            costs[n, 0] = cache.not_born_weight(ell)
            for alpha in range(n_meas + 1):
                node = cache.lookup(ell, (alpha,))
                nodes[n][alpha + 1] = node
                costs[n, alpha + 1] = node.log_weight
        else:
            init[n] = 0
            parent = hypothesis.trajectories[ell]
            base = parent.log_weight
            for alpha in range(-1, n_meas + 1):
                node = cache.extend(parent, ell, alpha)
                nodes[n][alpha + 1] = node
                costs[n, alpha + 1] = node.log_weight - base
    gumbels = rng.gumbel(size=(T_h, n_rows, n_cols))
    samples = kernels.gibbs_assign(costs, init, gumbels)
    rows = list(dict.fromkeys(map(tuple, samples.tolist())))
    out = []
    for row in rows:
        amap = AssociationMap(k, zip(domain, row), n_meas)
        traj = dict(hypothesis.trajectories)
        lw = hypothesis.log_weight
        for n, alpha in enumerate(row):
            lw += costs[n, alpha + 1]
            node = nodes[n][alpha + 1]
            if node is not None:
                traj[domain[n]] = node
        out.append(Hypothesis(hypothesis.gamma.append(amap), float(lw), traj))
    return out


def _map(executor, fn, items):
    return list(executor.map(fn, items)) if executor is not None else [fn(x) for x in items]


def step(bank: PosteriorBank, Z_k, config: SmootherConfig, cache: TrajectoryCache,
         executor=None) -> tuple[PosteriorBank, StepDiagnostics]:
    """Advance the posterior by one scan.

    ``executor`` (anything with a ``map`` method) may run the per-hypothesis
    extension and windowed sweeps concurrently; results are identical to
    sequential execution because every sampler draws from its own stream.
    """
    t0 = time.perf_counter()
    k = bank.scan + 1
    cache.add_scan(k, Z_k)
    budgets = allocate_samples(bank.weights, config.samples_filter)

    def extend(h):
        gen = stream(config.seed, k, _EXTEND, h)
        return sample_factors(bank.hypotheses[h], budgets[h], cache, gen)

    extended = unique(x for group in _map(executor, extend, range(len(bank))) for x in group)
    n_extended = len(extended)
    windowed = config.smoothing and (config.window is None or k >= config.window)
    violations = 0
    if not windowed:
        kept = keep_best(extended, config.cap_requested)
    else:
        pre = keep_best(extended, config.cap_pre_gibbs)
        N = k if config.window is None else config.window
        gcfg = GibbsConfig(N, config.samples_gibbs, config.seed)
        j0 = max(1, k - N + 1)

        def refine(h):
            return sweep_window(pre[h], k, gcfg, cache, hyp_index=h, stream_key=(k, _GIBBS))

        pooled = list(pre)
        for h, outs in enumerate(_map(executor, refine, range(len(pre)))):
            frozen = pre[h].gamma.maps[:j0]
            for o in outs:
                if o.gamma.maps[:j0] != frozen:
                    violations += 1
            pooled.extend(outs)
        kept = keep_best(unique(pooled), config.cap_requested)
    new_bank = PosteriorBank.from_hypotheses(kept, k)
    diag = StepDiagnostics(k, len(new_bank), new_bank.ess(), time.perf_counter() - t0,
                           windowed, n_extended, violations)
    return new_bank, diag


class Estimate(NamedTuple):
    scan: int
    cardinality: int
    tracks: list  # (Label, first scan, array of means)


def extract_estimate(bank: PosteriorBank, motion: Optional[MotionModel] = None,
                     smoothed: bool = True) -> Estimate:
    """Tracks of the highest-weight hypothesis.

    With ``smoothed`` (requires ``motion``) each track's means are the
    Rauch-Tung-Striebel smoothed means over its lifespan; otherwise the
    filtered means.
    """
    if not bank.hypotheses:
        raise ValueError("cannot extract an estimate from an empty bank")
    best = bank.best()
    tracks = []
    for ell in sorted(best.trajectories):
        node = best.trajectories[ell]
        dens = smooth(node, motion) if smoothed else node.filt
        tracks.append((ell, node.s, np.array([g.mean for g in dens])))
    return Estimate(bank.scan, len(best.live_labels()), tracks)


def current_states(bank: PosteriorBank) -> LabeledStateSet:
    """Filtered labeled states at the bank's scan from its best hypothesis."""
    best = bank.best()
    items = []
    for ell in sorted(best.live_labels()):
        items.append((best.trajectories[ell].mean, ell))
    return LabeledStateSet(bank.scan, tuple(items))


@dataclass
class TrackResult:
    bank: PosteriorBank
    online: list[LabeledStateSet] = field(default_factory=list)
    diagnostics: list[StepDiagnostics] = field(default_factory=list)


def run_tracker(measurements: Sequence, models: Models, config: SmootherConfig,
                cache_capacity: int = 200_000, executor=None,
                on_step: Optional[Callable[[PosteriorBank, StepDiagnostics], None]] = None
                ) -> TrackResult:
    """Run the tracker over ``measurements[1:]`` (index 0 is scan 0, unused)."""
    cache = TrajectoryCache(models, cache_capacity)
    bank = PosteriorBank.initial()
    result = TrackResult(bank)
    for k in range(1, len(measurements)):
        bank, diag = step(bank, measurements[k], config, cache, executor)
        result.online.append(current_states(bank))
        result.diagnostics.append(diag)
        if on_step is not None:
            on_step(bank, diag)
    result.bank = bank
    return result
