"""Labeled multi-object data model: labels, association maps and histories,
GLMB hypotheses, and the validity rules that tie them together."""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Optional

import numpy as np


class Label(NamedTuple):
    """Object identity: birth scan ``s`` and birth index ``iota``."""

    s: int
    iota: int

    def __str__(self):
        return f"{self.s}.{self.iota}"

    @classmethod
    def parse(cls, text: str) -> "Label":
        s, iota = text.split(".")
        return cls(int(s), int(iota))


class AssociationMap:
    """Map from candidate labels at one scan to measurement indices.

    Values are ``-1`` (object does not exist), ``0`` (misdetected) or a
    1-based measurement index. Only labels in ``B_j`` plus those live at the
    previous scan are stored; everything else implicitly maps to ``-1``.
    Instances are immutable and hashable.
    """

    __slots__ = ("scan", "entries", "m_count", "_lookup", "_hash")

    def __init__(self, scan: int, entries: Mapping[Label, int] | Iterable[tuple[Label, int]],
                 m_count: int):
        items = entries.items() if isinstance(entries, Mapping) else entries
        self.scan = int(scan)
        self.entries = tuple(sorted((Label(*ell), int(a)) for ell, a in items))
        self.m_count = int(m_count)
        self._lookup = dict(self.entries)
        self._hash = hash((self.scan, self.entries, self.m_count))

    def __getitem__(self, ell: Label) -> int:
        return self._lookup.get(ell, -1)

    def __contains__(self, ell) -> bool:
        return ell in self._lookup

    def __len__(self):
        return len(self.entries)

    def domain(self) -> tuple[Label, ...]:
        return tuple(ell for ell, _ in self.entries)

    def live_labels(self) -> frozenset[Label]:
        return frozenset(ell for ell, a in self.entries if a >= 0)

    def is_positive_one_to_one(self) -> bool:
        pos = [a for _, a in self.entries if a > 0]
        return len(pos) == len(set(pos))

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, AssociationMap):
            return NotImplemented
        return (self._hash == other._hash and self.scan == other.scan
                and self.m_count == other.m_count and self.entries == other.entries)

    def __repr__(self):
        return f"AssociationMap({format_map(self)!r})"


def live_labels(amap: AssociationMap) -> frozenset[Label]:
    """Labels assigned a value ``>= 0`` by ``amap``."""
    return amap.live_labels()


class AssociationHistory:
    """Sequence of association maps for scans ``0..k`` (a GLMB component index).

    Scan 0 is always the empty map. Instances are immutable; the per-label
    view (alpha sequences and lifespans) is computed lazily and cached.
    """

    __slots__ = ("maps", "_hash", "_tracks", "_first")

    def __init__(self, maps: Iterable[AssociationMap]):
        self.maps = tuple(maps)
        if not self.maps:
            self.maps = (AssociationMap(0, (), 0),)
        self._hash = hash(self.maps)
        self._tracks = None
        self._first = None

    @classmethod
    def empty(cls) -> "AssociationHistory":
        return cls(())

    @property
    def k(self) -> int:
        return len(self.maps) - 1

    def __len__(self):
        return len(self.maps)

    def __getitem__(self, j):
        return self.maps[j]

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, AssociationHistory):
            return NotImplemented
        return self._hash == other._hash and self.maps == other.maps

    def __repr__(self):
        return f"AssociationHistory(k={self.k}, labels={len(self.tracks())})"

    def append(self, amap: AssociationMap) -> "AssociationHistory":
        return AssociationHistory(self.maps + (amap,))

    def replace_from(self, j: int, maps: Iterable[AssociationMap]) -> "AssociationHistory":
        """New history sharing maps ``0..j-1`` (by identity) with ``self``."""
        return AssociationHistory(self.maps[:j] + tuple(maps))

    def sort_key(self):
        return tuple(m.entries for m in self.maps)

    def tracks(self) -> dict[Label, tuple[int, ...]]:
        """Per-label alpha sequences for every label that was ever live.

        The sequence for ``ell`` starts at scan ``ell.s`` and runs while the
        label is in a map's domain, so it ends with ``-1`` when the object
        died before ``k``.
        """
        if self._tracks is None:
            seqs: dict[Label, list[int]] = {}
            first: dict[Label, int] = {}
            for j, amap in enumerate(self.maps):
                for ell, a in amap.entries:
                    seq = seqs.get(ell)
                    if seq is None:
                        if a >= 0:
                            seqs[ell] = [a]
                            first[ell] = j
                    elif seq[-1] >= 0:
                        seq.append(a)
            self._tracks = {ell: tuple(v) for ell, v in seqs.items()}
            self._first = first
        return self._tracks

    def alpha(self, ell: Label, j: int) -> int:
        return self.maps[j][ell] if 0 <= j <= self.k else -1

    def lifespan(self, ell: Label) -> Optional[tuple[int, int]]:
        seq = self.tracks().get(ell)
        if seq is None:
            return None
        n_live = len(seq) - 1 if seq[-1] < 0 else len(seq)
        first = self._first[ell]
        return first, first + n_live - 1


def lifespan(gamma: AssociationHistory, ell: Label) -> Optional[tuple[int, int]]:
    """First and last scans where ``ell`` is live, or ``None`` if never live."""
    return gamma.lifespan(ell)


def validate_history(gamma: AssociationHistory) -> bool:
    """Check positive 1-1, map domains and dead-stays-dead for every scan.

    The domain of map ``j`` must contain every label live at ``j-1`` and
    otherwise only labels born at ``j``. Since an object that is not live at
    ``j-1`` is outside the domain at ``j``, a label can never come back to
    life once it has left.
    """
    if not gamma.maps or len(gamma.maps[0]) != 0:
        return False
    prev_live: frozenset[Label] = frozenset()
    ever_live: set[Label] = set()
    for j, amap in enumerate(gamma.maps):
        if amap.scan != j:
            return False
        if not amap.is_positive_one_to_one():
            return False
        for ell, a in amap.entries:
            if a < -1 or a > amap.m_count:
                return False
            if ell not in prev_live:
                if ell.s != j or ell in ever_live:
                    return False
        if any(ell not in amap for ell in prev_live):
            return False
        prev_live = amap.live_labels()
        ever_live.update(prev_live)
    return True


@dataclass(frozen=True, eq=False)
class Hypothesis:
    """One GLMB component: association history, log weight, trajectory table.

    ``trajectories`` maps every label that was ever live to the trajectory
    posterior for its full alpha sequence. Equality and hashing use the
    history alone, since weight and trajectories are functions of it.
    """

    gamma: AssociationHistory
    log_weight: float
    trajectories: Mapping[Label, object] = field(default_factory=dict)

    @property
    def k(self) -> int:
        return self.gamma.k

    def __hash__(self):
        return hash(self.gamma)

    def __eq__(self, other):
        if not isinstance(other, Hypothesis):
            return NotImplemented
        return self.gamma == other.gamma

    def live_labels(self) -> frozenset[Label]:
        return self.gamma.maps[-1].live_labels()


@dataclass(frozen=True)
class LabeledStateSet:
    """Labeled multi-object state at one scan."""

    scan: int
    items: tuple[tuple[np.ndarray, Label], ...] = ()

    def __post_init__(self):
        labels = [ell for _, ell in self.items]
        if len(labels) != len(set(labels)):
            raise ValueError("labeled state set has duplicate labels")

    def __len__(self):
        return len(self.items)

    def labels(self) -> list[Label]:
        return [ell for _, ell in self.items]

    def positions(self) -> np.ndarray:
        if not self.items:
            return np.zeros((0, 2))
        return np.array([[x[0], x[2]] for x, _ in self.items])


# ---------------------------------------------------------------- text format

def format_map(amap: AssociationMap) -> str:
    body = ",".join(f"{ell}={a}" for ell, a in amap.entries)
    return f"{amap.scan}: {body}" if body else f"{amap.scan}:"


def format_history(gamma: AssociationHistory) -> str:
    """One scan per line, ``scan: s.iota=alpha,...``, preceded by a header
    line carrying the per-scan measurement counts."""
    counts = " ".join(str(m.m_count) for m in gamma.maps)
    lines = [f"# m_count {counts}"]
    lines.extend(format_map(m) for m in gamma.maps)
    return "\n".join(lines) + "\n"


_LINE = re.compile(r"^\s*(\d+)\s*:\s*(.*)$")


def parse_history(text: str) -> AssociationHistory:
    counts = None
    maps = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if parts and parts[0] == "m_count":
                counts = [int(c) for c in parts[1:]]
            continue
        match = _LINE.match(line)
        if match is None:
            raise ValueError(f"malformed history line: {raw!r}")
        scan = int(match.group(1))
        entries = []
        for item in filter(None, (p.strip() for p in match.group(2).split(","))):
            lab, a = item.split("=")
            entries.append((Label.parse(lab), int(a)))
        m_count = counts[scan] if counts is not None else max([a for _, a in entries] + [0])
        maps.append(AssociationMap(scan, entries, m_count))
    return AssociationHistory(maps)


def format_hypothesis(hyp: Hypothesis) -> str:
    return f"# log_weight {hyp.log_weight!r}\n" + format_history(hyp.gamma)
