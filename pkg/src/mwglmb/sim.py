"""Ground truth and measurement simulation for the birth/death scenario."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np

from .core import Label, LabeledStateSet
from .models import Models, default_scenario_models


class SpawnGroup(NamedTuple):
    birth: int
    count: int
    component: Optional[int]  # birth index of the first object; None cycles all sites
    death: int


DEFAULT_SCHEDULE = (SpawnGroup(1, 4, None, 10), SpawnGroup(20, 4, None, 40),
                    SpawnGroup(50, 4, None, 90))


@dataclass(frozen=True)
class Scenario:
    """Objects appear at ``birth`` and are absent from ``death`` onwards."""

    duration: int = 100
    spawn_schedule: tuple[SpawnGroup, ...] = DEFAULT_SCHEDULE
    models: Models = field(default_factory=default_scenario_models)
    seed: int = 0

    def __post_init__(self):
        for g in self.spawn_schedule:
            if g.death <= g.birth:
                raise ValueError(f"spawn group {g} dies before it is born")
            if g.birth < 1:
                raise ValueError("births start at scan 1")
        (x0, x1), (y0, y1) = self.models.sensor.clutter_region
        for c in self.models.birth.components:
            if not (x0 <= c.mean[0] <= x1 and y0 <= c.mean[2] <= y1):
                raise ValueError("birth site outside the surveillance region")

    @property
    def region(self):
        return self.models.sensor.clutter_region

    def true_cardinality(self, k: int) -> int:
        return sum(g.count for g in self.spawn_schedule if g.birth <= k < g.death)


@dataclass
class Dataset:
    truth: list[LabeledStateSet]
    measurements: list[np.ndarray]
    sources: list[list] = field(default_factory=list)  # per measurement: Label or None (clutter)

    @property
    def duration(self) -> int:
        return len(self.measurements) - 1

    def cardinality(self) -> list[int]:
        return [len(x) for x in self.truth]


def generate(scenario: Scenario, rng: Optional[np.random.Generator] = None) -> Dataset:
    """Simulate truth and cluttered detections for scans ``1..duration``.

    Each object starts from its birth site's Gaussian, moves with the
    constant-velocity model plus process noise, is detected with probability
    ``P_D``; clutter is Poisson with points uniform over the region. Scan 0
    is empty.
    """
    if rng is None:
        rng = np.random.default_rng(scenario.seed)
    motion, birth, sensor = scenario.models
    indices = birth.indices
    objects = []  # (label, birth, death)
    for g in scenario.spawn_schedule:
        start = 0 if g.component is None else indices.index(g.component)
        for c in range(g.count):
            iota = indices[(start + c) % len(indices)]
            objects.append((Label(g.birth, iota), g.birth, g.death))
    labels = [o[0] for o in objects]
    if len(set(labels)) != len(labels):
        raise ValueError("spawn schedule produces duplicate labels")

    n = scenario.duration
    states: dict[Label, np.ndarray] = {}
    truth = [LabeledStateSet(0)]
    meas = [np.zeros((0, 2))]
    sources = [[]]
    (x0, x1), (y0, y1) = sensor.clutter_region
    zeros_q = np.zeros(motion.F.shape[0])
    zeros_r = np.zeros(sensor.H.shape[0])
    for k in range(1, n + 1):
        for ell, b, d in objects:
            if k == b:
                comp = birth.component(ell.iota)
                states[ell] = rng.multivariate_normal(comp.mean, comp.cov)
            elif b < k < d:
                states[ell] = motion.F @ states[ell] + rng.multivariate_normal(zeros_q, motion.Q)
        alive = [(states[ell], ell) for ell, b, d in objects if b <= k < d]
        truth.append(LabeledStateSet(k, tuple(alive)))
        dets, origin = [], []
        for x, ell in alive:
            if rng.random() < sensor.p_detect:
                dets.append(sensor.H @ x + rng.multivariate_normal(zeros_r, sensor.R))
                origin.append(ell)
        n_clutter = rng.poisson(sensor.clutter_rate)
        clutter = np.column_stack([rng.uniform(x0, x1, n_clutter), rng.uniform(y0, y1, n_clutter)])
        Z = np.vstack([np.array(dets).reshape(-1, 2), clutter])
        origin += [None] * n_clutter
        perm = rng.permutation(len(Z))
        meas.append(Z[perm])
        sources.append([origin[i] for i in perm])
    return Dataset(truth, meas, sources)


# ------------------------------------------------------------------ text format
#
#   # mwglmb-dataset 1
#   scan <k>
#   T <s>.<iota> <px> <vx> <py> <vy>      one line per true object
#   Z <x> <y>                             one line per measurement, in order
#   end
#
# Floats are written with repr() so a round trip is exact.

HEADER = "# mwglmb-dataset 1"


def dumps_dataset(ds: Dataset) -> str:
    lines = [HEADER]
    for k in range(1, ds.duration + 1):
        lines.append(f"scan {k}")
        for x, ell in ds.truth[k].items:
            lines.append("T " + str(ell) + " " + " ".join(repr(float(v)) for v in x))
        for z in ds.measurements[k]:
            lines.append("Z " + " ".join(repr(float(v)) for v in z))
        lines.append("end")
    return "\n".join(lines) + "\n"


def loads_dataset(text: str) -> Dataset:
    truth = [LabeledStateSet(0)]
    meas = [np.zeros((0, 2))]
    items, zs, scan = [], [], None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tag, *rest = line.split()
        if tag == "scan":
            if scan is not None:
                raise ValueError(f"line {lineno}: scan block not closed")
            scan = int(rest[0])
            if scan != len(meas):
                raise ValueError(f"line {lineno}: expected scan {len(meas)}, got {scan}")
            items, zs = [], []
        elif tag == "T":
            items.append((np.array([float(v) for v in rest[1:]]), Label.parse(rest[0])))
        elif tag == "Z":
            zs.append([float(v) for v in rest])
        elif tag == "end":
            truth.append(LabeledStateSet(scan, tuple(items)))
            meas.append(np.array(zs, dtype=float).reshape(-1, 2))
            scan = None
        else:
            raise ValueError(f"line {lineno}: unknown record {tag!r}")
    if scan is not None:
        raise ValueError("unterminated scan block")
    return Dataset(truth, meas)


def save_dataset(ds: Dataset, path) -> None:
    Path(path).write_text(dumps_dataset(ds))


def load_dataset(path) -> Dataset:
    return loads_dataset(Path(path).read_text())
