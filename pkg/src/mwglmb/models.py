"""Linear-Gaussian single-object models, the LMB birth model, the sensor
model with Poisson clutter, and the measurement likelihood ratio psi."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from . import kernels


class Gaussian(NamedTuple):
    mean: np.ndarray
    cov: np.ndarray


def safe_log(x: float) -> float:
    return math.log(x) if x > 0.0 else -math.inf


def _check_psd(name, M):
    M = np.asarray(M, dtype=float)
    if not np.allclose(M, M.T, atol=1e-9 * max(1.0, np.abs(M).max())):
        raise ValueError(f"{name} must be symmetric")
    if np.linalg.eigvalsh(0.5 * (M + M.T)).min() < -1e-9 * max(1.0, np.abs(M).max()):
        raise ValueError(f"{name} must be positive semi-definite")
    return np.ascontiguousarray(M)


def _check_prob(name, p):
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {p}")
    return float(p)


@dataclass(frozen=True, eq=False)
class MotionModel:
    F: np.ndarray
    Q: np.ndarray
    p_survive: float

    def __post_init__(self):
        object.__setattr__(self, "F", np.ascontiguousarray(self.F, dtype=float))
        object.__setattr__(self, "Q", _check_psd("Q", self.Q))
        object.__setattr__(self, "p_survive", _check_prob("p_survive", self.p_survive))

    @classmethod
    def constant_velocity(cls, dt=1.0, sigma_a=1.0, p_survive=0.95):
        F1 = np.array([[1.0, dt], [0.0, 1.0]])
        Q1 = np.array([[dt**4 / 4, dt**3 / 2], [dt**3 / 2, dt**2]])
        return cls(np.kron(np.eye(2), F1), sigma_a**2 * np.kron(np.eye(2), Q1), p_survive)


@dataclass(frozen=True, eq=False)
class BirthComponent:
    label_index: int
    r_birth: float
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "r_birth", _check_prob("r_birth", self.r_birth))
        object.__setattr__(self, "mean", np.ascontiguousarray(self.mean, dtype=float))
        object.__setattr__(self, "cov", _check_psd("birth covariance", self.cov))


@dataclass(frozen=True, eq=False)
class BirthModel:
    """Labeled multi-Bernoulli birth: one component per birth index ``iota``."""

    components: tuple[BirthComponent, ...]
    _by_index: dict = field(init=False, repr=False)

    def __post_init__(self):
        comps = tuple(self.components)
        object.__setattr__(self, "components", comps)
        by_index = {c.label_index: c for c in comps}
        if len(by_index) != len(comps):
            raise ValueError("birth components must have distinct label indices")
        object.__setattr__(self, "_by_index", by_index)

    def component(self, iota: int) -> BirthComponent:
        return self._by_index[iota]

    @property
    def indices(self) -> tuple[int, ...]:
        return tuple(c.label_index for c in self.components)


@dataclass(frozen=True, eq=False)
class SensorModel:
    H: np.ndarray
    R: np.ndarray
    p_detect: float
    clutter_rate: float
    clutter_region: tuple[tuple[float, float], tuple[float, float]]

    def __post_init__(self):
        object.__setattr__(self, "H", np.ascontiguousarray(self.H, dtype=float))
        R = _check_psd("R", self.R)
        if np.linalg.eigvalsh(R).min() <= 0:
            raise ValueError("R must be positive definite")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "p_detect", _check_prob("p_detect", self.p_detect))
        if self.clutter_rate < 0:
            raise ValueError("clutter_rate must be non-negative")
        region = tuple(tuple(float(v) for v in b) for b in self.clutter_region)
        object.__setattr__(self, "clutter_region", region)
        if self.area <= 0:
            raise ValueError("clutter region must have positive area")

    @property
    def area(self) -> float:
        (x0, x1), (y0, y1) = self.clutter_region
        return (x1 - x0) * (y1 - y0)

    @property
    def clutter_density(self) -> float:
        return self.clutter_rate / self.area

    def kappa(self, z) -> float:
        """Clutter intensity at ``z`` (uniform over the region)."""
        return self.clutter_density


class Models(NamedTuple):
    motion: MotionModel
    birth: BirthModel
    sensor: SensorModel


def psi(sensor: SensorModel, measurements: Sequence, i: int, state_density: Gaussian) -> float:
    """Measurement likelihood ratio integrated against a Gaussian density.

    ``i == 0`` gives the misdetection probability; ``i > 0`` gives
    ``P_D N(z_i; H m, H P H^T + R) / kappa(z_i)`` for the 1-based index ``i``.
    """
    n = len(measurements)
    if not 0 <= i <= n:
        raise ValueError(f"measurement index {i} outside 0..{n}")
    if i == 0:
        return 1.0 - sensor.p_detect
    return math.exp(log_psi(sensor, measurements, i, state_density))


def log_psi(sensor: SensorModel, measurements: Sequence, i: int, state_density: Gaussian) -> float:
    if i == 0:
        return safe_log(1.0 - sensor.p_detect)
    z = np.ascontiguousarray(measurements[i - 1], dtype=float)
    m, P = state_density
    S = sensor.H @ P @ sensor.H.T + sensor.R
    ll = kernels.gaussian_loglik(z, np.ascontiguousarray(sensor.H @ m), np.ascontiguousarray(S))
    return safe_log(sensor.p_detect) + ll - safe_log(sensor.kappa(z))


BIRTH_MEANS = ((500.0, 0.0, 500.0, 0.0),
               (-500.0, 0.0, 500.0, 0.0),
               (-500.0, 0.0, -500.0, 0.0),
               (500.0, 0.0, -500.0, 0.0))


def default_scenario_models(p_detect=0.3, clutter_rate=3.0, p_survive=0.95, r_birth=0.03,
                            sigma_a=1.0, sigma_r=30.0, sigma_b=15.0, dt=1.0,
                            region=((-1000.0, 1000.0), (-1000.0, 1000.0))) -> Models:
    """Constant-velocity motion, four-site LMB birth and position sensor.

    Defaults reproduce the reference experiment: dt = 1 s, sigma_a = 1 m/s^2,
    P_S = 0.95, r_B = 0.03 with birth covariance diag(15^2), R = diag(30^2),
    P_D = 0.3 and 3 clutter points per scan on [-1000, 1000]^2.
    """
    motion = MotionModel.constant_velocity(dt, sigma_a, p_survive)
    birth = BirthModel(tuple(
        BirthComponent(i + 1, r_birth, np.array(m), np.diag([sigma_b**2] * 4))
        for i, m in enumerate(BIRTH_MEANS)))
    H = np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]])
    sensor = SensorModel(H, np.diag([sigma_r**2] * 2), p_detect, clutter_rate, region)
    return Models(motion, birth, sensor)
