"""Windowed multi-scan Gibbs sampler over association histories.

Each entry ``gamma_j(ell)`` inside the window ``max(1, k-N+1)..k`` is
resampled from its exact conditional given every other entry. The
conditional only involves the label's own trajectory weight from scan ``j``
to the end of its life, a death-consistency factor and positive 1-1
exclusion at scan ``j``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .core import AssociationHistory, AssociationMap, Hypothesis, Label
from .trajectory import TrajectoryCache

NEG_INF = -math.inf


@dataclass(frozen=True)
class GibbsConfig:
    window: int
    samples_per_hypothesis: int = 1
    rng_seed: int = 0

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.samples_per_hypothesis < 1:
            raise ValueError("samples_per_hypothesis must be >= 1")


class ConditionalTable(NamedTuple):
    support: tuple[int, ...]
    log_scores: np.ndarray

    def probabilities(self) -> np.ndarray:
        s = self.log_scores
        p = np.exp(s - s.max())
        return p / p.sum()


def stream(seed: int, *ids: int) -> np.random.Generator:
    """Independent generator for the stream identified by ``(seed, *ids)``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), *ids]))


class SampleStreams:
    """Counter-based streams, one per sample index ``t``.

    All streams share a Philox key derived from ``(seed, *ids)``; sample ``t``
    starts at counter ``t * 2**192``, so streams never overlap and sample
    ``t`` can be regenerated on its own.
    """

    def __init__(self, seed: int, *ids: int):
        key = np.random.SeedSequence([int(seed) & (2**64 - 1), *ids]).generate_state(2, np.uint64)
        self._bitgen = np.random.Philox(key=key)
        self._fresh = self._bitgen.state
        self._gen = np.random.Generator(self._bitgen)

    def sample(self, t: int) -> np.random.Generator:
        state = self._fresh
        state["state"]["counter"] = np.array([0, 0, 0, t], dtype=np.uint64)
        self._bitgen.state = state
        return self._gen


class _Gumbels:
    """Buffered standard Gumbel draws from one generator."""

    __slots__ = ("gen", "buf", "pos")

    def __init__(self, gen: np.random.Generator, size: int = 64):
        self.gen = gen
        self.buf = gen.gumbel(size=size).tolist()
        self.pos = 0

    def take(self, n: int) -> list:
        if self.pos + n > len(self.buf):
            self.buf = self.buf[self.pos:] + self.gen.gumbel(size=max(64, n)).tolist()
            self.pos = 0
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out


def m_factor(alpha: int, beta: int, used) -> int:
    """Validity factor for assigning ``alpha`` given next-scan value ``beta``.

    Death (``alpha < 0``) is only allowed if the label is not live at the
    next scan; a positive ``alpha`` must not be in ``used``.
    """
    if alpha < 0:
        return 1 if alpha == beta else 0
    if alpha == 0:
        return 1
    return 0 if alpha in used else 1


class WindowState:
    """Mutable per-label view of an association history used while sampling.

    ``seqs[ell]`` is the alpha sequence from ``ell.s`` for every label that is
    live somewhere; labels absent from ``seqs`` were never born.
    """

    def __init__(self, hyp_or_gamma, k: int, cache: TrajectoryCache):
        self.cache = cache
        self.k = k
        self.birth_indices = cache.models.birth.indices
        if isinstance(hyp_or_gamma, Hypothesis) and hyp_or_gamma.trajectories:
            gamma = hyp_or_gamma.gamma
            self.nodes = dict(hyp_or_gamma.trajectories)
            # node keys are the alpha sequences; avoids a pass over all k maps
            self.seqs = {ell: node.key for ell, node in self.nodes.items()}
            self.log_weight = hyp_or_gamma.log_weight
        else:
            is_hyp = isinstance(hyp_or_gamma, Hypothesis)
            gamma = hyp_or_gamma.gamma if is_hyp else hyp_or_gamma
            self.seqs = dict(gamma.tracks())
            self.nodes = {ell: cache.lookup(ell, seq) for ell, seq in self.seqs.items()}
            self.log_weight = (hyp_or_gamma.log_weight if is_hyp
                               else history_log_weight(gamma, cache))
        self.gamma = gamma
        self._maps = dict(enumerate(gamma.maps))
        self._domains: dict[int, list] = {}

    def value(self, ell: Label, j: int) -> int:
        seq = self.seqs.get(ell)
        if seq is None:
            return -1
        i = j - ell.s
        return seq[i] if 0 <= i < len(seq) else -1

    def domain(self, j: int) -> list[Label]:
        dom = self._domains.get(j)
        if dom is None:
            dom = [Label(j, iota) for iota in self.birth_indices]
            for ell, seq in self.seqs.items():
                i = j - 1 - ell.s
                if 0 <= i < len(seq) and seq[i] >= 0:
                    dom.append(ell)
            dom.sort()
            self._domains[j] = dom
        return dom

    def label_weight(self, ell: Label) -> float:
        node = self.nodes.get(ell)
        if node is not None:
            return node.log_weight
        return self.cache.not_born_weight(ell) if ell.s <= self.k else 0.0

    def candidates(self, ell: Label, j: int, used) -> tuple[list, list, list, float]:
        """Conditional log scores for ``gamma_j(ell)`` over ``-1..M_j``.

        Returns ``(scores, new_nodes, new_weights, prefix_weight)``; scores are
        ``eta_jn(alpha) + log M(alpha)`` and ``new_nodes`` holds the label's
        trajectory posterior under each alternative (``None`` if never born).
        """
        seq = self.seqs.get(ell, ())
        i = j - ell.s
        if not seq:
            # an unborn birth label's table is the same in every hypothesis
            key = (ell, j < self.k)
            table = self.cache.tables.get(key)
            if table is None:
                table = self.cache.tables[key] = self._table(ell, j, seq, i, ())
            if not used:
                return table
            scores, new_nodes, new_weights, w_pre = table
            scores = list(scores)
            for alpha in used:
                if alpha < len(scores) - 1:
                    scores[alpha + 1] = NEG_INF
            return scores, new_nodes, new_weights, w_pre
        return self._table(ell, j, seq, i, used)

    def _table(self, ell: Label, j: int, seq: tuple, i: int, used) -> tuple[list, list, list, float]:
        cache = self.cache
        cur = seq[i] if i < len(seq) else -1
        beta = self.value(ell, j + 1) if j < self.k else -1
        if i == 0:
            pre, w_pre = None, 0.0
        else:
            pre = self.nodes[ell]
            for _ in range(len(seq) - i):
                pre = pre.parent
            w_pre = pre.log_weight
        if cur >= 0:
            future = seq[i + 1:]
        else:
            future = (-1,) if j < self.k else ()
        n_meas = cache.n_measurements(j)
        scores = [NEG_INF] * (n_meas + 2)
        new_nodes = [None] * (n_meas + 2)
        new_weights = [NEG_INF] * (n_meas + 2)
        if beta < 0:
            if pre is None:
                w = cache.not_born_weight(ell)
            else:
                node = cache.extend(pre, ell, -1)
                new_nodes[0] = node
                w = node.log_weight
            scores[0] = w - w_pre
            new_weights[0] = w
        find = cache.find
        prefix = seq[:i]
        for alpha in range(n_meas + 1):
            if alpha and alpha in used:
                continue
            node = find(ell, prefix + (alpha,) + future)
            w = node.log_weight
            scores[alpha + 1] = w - w_pre
            new_nodes[alpha + 1] = node
            new_weights[alpha + 1] = w
        return scores, new_nodes, new_weights, w_pre

    def assign(self, ell: Label, j: int, node, new_weight: float) -> None:
        """Commit a new value of ``gamma_j(ell)``; only maps ``j`` and ``j+1``
        can change."""
        old = self.label_weight(ell)
        for i in (j, j + 1):
            self._maps.pop(i, None)
        self._domains.pop(j + 1, None)
        if node is None:
            self.seqs.pop(ell, None)
            self.nodes.pop(ell, None)
        else:
            self.seqs[ell] = node.key
            self.nodes[ell] = node
        self.log_weight += new_weight - old

    def build_map(self, j: int) -> AssociationMap:
        entries = [(ell, self.value(ell, j)) for ell in self.domain(j)]
        return AssociationMap(j, entries, self.cache.n_measurements(j))

    def to_hypothesis(self, j0: int) -> Hypothesis:
        maps = []
        for j in range(j0, self.k + 1):
            amap = self._maps.get(j)
            if amap is None:
                amap = self._maps[j] = self.build_map(j)
            maps.append(amap)
        gamma = self.gamma.replace_from(j0, maps)
        return Hypothesis(gamma, self.log_weight, dict(self.nodes))


def history_log_weight(gamma: AssociationHistory, cache: TrajectoryCache) -> float:
    """Log weight of ``gamma`` recomputed from scratch, scan by scan."""
    from .trajectory import eta
    total = 0.0
    for j in range(1, gamma.k + 1):
        for ell, _ in gamma.maps[j].entries:
            total += eta(gamma, ell, j, cache)
    return total


def eta_jn(gamma: AssociationHistory, ell_n: Label, j: int, alpha: int,
           cache: TrajectoryCache) -> float:
    """Log of the product of ``ell_n``'s association weights from scan ``j``
    to the end of its life, with ``gamma_j(ell_n)`` replaced by ``alpha``."""
    state = WindowState(gamma, gamma.k, cache)
    _, _, weights, w_pre = state.candidates(ell_n, j, used=())
    return weights[alpha + 1] - w_pre


def conditional(gamma: AssociationHistory, j: int, ell_n: Label,
                cache: TrajectoryCache) -> ConditionalTable:
    """Unnormalised log conditional of ``gamma_j(ell_n)`` given the rest."""
    state = WindowState(gamma, gamma.k, cache)
    n_meas = cache.n_measurements(j)
    support = tuple(range(-1, n_meas + 1))
    domain = state.domain(j)
    if ell_n not in domain:
        scores = np.full(len(support), NEG_INF)
        scores[0] = 0.0
        return ConditionalTable(support, scores)
    used = {state.value(ell, j) for ell in domain if ell != ell_n}
    used.discard(0)
    used.discard(-1)
    scores, _, _, _ = state.candidates(ell_n, j, used)
    return ConditionalTable(support, np.array(scores))


def sweep_window(hypothesis: Hypothesis, k: int, config: GibbsConfig, cache: TrajectoryCache,
                 rng: Optional[np.random.Generator] = None, hyp_index: int = 0,
                 stream_key: tuple = ()) -> list[Hypothesis]:
    """Run ``config.samples_per_hypothesis`` systematic-scan sweeps over the
    window and return the history after each sweep.

    The chain continues from one sweep to the next. Without an explicit
    ``rng`` sweep ``t`` draws from stream ``t`` of
    ``SampleStreams(rng_seed, *stream_key, hyp_index)`` so results do not
    depend on scheduling.
    """
    if k < 1 or hypothesis.k != k:
        raise ValueError(f"hypothesis covers scans 0..{hypothesis.k}, expected 0..{k}")
    j0 = max(1, k - config.window + 1)
    state = WindowState(hypothesis, k, cache)
    streams = None if rng is not None else SampleStreams(config.rng_seed, *stream_key, hyp_index)
    out = []
    for t in range(config.samples_per_hypothesis):
        gen = rng if streams is None else streams.sample(t)
        gumbels = _Gumbels(gen)
        for j in range(j0, k + 1):
            domain = state.domain(j)
            values = [state.value(ell, j) for ell in domain]
            counts: dict[int, int] = {}
            for a in values:
                if a > 0:
                    counts[a] = counts.get(a, 0) + 1
            for n, ell in enumerate(domain):
                cur = values[n]
                if cur > 0:
                    counts[cur] -= 1
                    if not counts[cur]:
                        del counts[cur]
                scores, new_nodes, new_weights, _ = state.candidates(ell, j, counts)
                g = gumbels.take(len(scores))
                best = NEG_INF
                choice = cur + 1
                for c, sc in enumerate(scores):
                    if sc == NEG_INF:
                        continue
                    v = sc + g[c]
                    if v > best:
                        best = v
                        choice = c
                alpha = choice - 1
                if alpha != cur:
                    state.assign(ell, j, new_nodes[choice], new_weights[choice])
                    values[n] = alpha
                if alpha > 0:
                    counts[alpha] = counts.get(alpha, 0) + 1
        out.append(state.to_hypothesis(j0))
    return out
