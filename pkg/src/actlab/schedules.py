"""Timestep grid and the scalar schedules that drive training.

Three schedules matter: the discretization size N(k) grows over the run,
the EMA decay mu(k) tightens as N grows, and the adversarial weight
lambda_N(n) rises with the noise index n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ScheduleConfig",
    "TimestepGrid",
    "step_count",
    "ema_decay",
    "adversarial_weight",
    "build_grid",
]


@dataclass(frozen=True)
class ScheduleConfig:
    """Static schedule parameters for one training run.

    ``s0``/``s1`` bound the discretization size, ``K`` is the total number
    of training steps, ``mu0`` the initial EMA coefficient, and ``w`` /
    ``w_mid`` pin the adversarial weight at the last and middle noise
    indices. ``rho`` controls grid curvature.
    """

    epsilon: float = 0.002
    T: float = 80.0
    s0: int = 2
    s1: int = 150
    K: int = 1
    mu0: float = 0.9
    w: float = 0.3
    w_mid: float = 0.3
    rho: float = 7.0

    def __post_init__(self):
        if not 0 < self.epsilon < self.T:
            raise ValueError(f"need 0 < epsilon < T, got {self.epsilon}, {self.T}")
        if not (1 <= self.s0 <= self.s1):
            raise ValueError(f"need 1 <= s0 <= s1, got {self.s0}, {self.s1}")
        if self.K < 1:
            raise ValueError(f"K must be >= 1, got {self.K}")
        if not (0 < self.mu0 <= 1):
            raise ValueError(f"mu0 must be in (0, 1], got {self.mu0}")
        if not (0 < self.w_mid <= self.w <= 1):
            raise ValueError(
                f"need 0 < w_mid <= w <= 1, got w_mid={self.w_mid}, w={self.w}"
            )
        if self.rho <= 0:
            raise ValueError(f"rho must be positive, got {self.rho}")


@dataclass(frozen=True)
class TimestepGrid:
    """Strictly increasing timesteps times[0]=epsilon ... times[N-1]=T."""

    times: np.ndarray
    N: int = field(init=False)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "N", len(times))
        if self.N < 2:
            raise ValueError("grid needs at least 2 points")
        if not np.all(np.diff(times) > 0):
            raise ValueError("grid times must be strictly increasing")

    @property
    def max_gap(self) -> float:
        """Largest spacing between adjacent grid points."""
        return float(np.max(np.diff(self.times)))


def step_count(k: int, cfg: ScheduleConfig) -> int:
    """Discretization size N(k) at training step k.

    N(k) = ceil(sqrt(k/K * ((s1+1)^2 - s0^2) + s0^2) - 1) + 1, which is
    nondecreasing and runs from s0 at k=0 to s1+1 at k=K.
    """
    if not 0 <= k <= cfg.K:
        raise ValueError(f"k={k} outside [0, {cfg.K}]")
    inner = k / cfg.K * ((cfg.s1 + 1) ** 2 - cfg.s0**2) + cfg.s0**2
    return int(math.ceil(math.sqrt(inner) - 1)) + 1


def ema_decay(Nk: int, cfg: ScheduleConfig) -> float:
    """EMA coefficient mu(k) = exp(s0 * ln(mu0) / N(k)).

    Equals mu0 when Nk == s0 and climbs toward 1 as the grid refines.
    """
    if Nk < 1:
        raise ValueError(f"Nk must be >= 1, got {Nk}")
    if cfg.mu0 <= 0:
        raise ValueError(f"mu0 must be positive, got {cfg.mu0}")
    return math.exp(cfg.s0 * math.log(cfg.mu0) / Nk)


def adversarial_weight(n: int, N: int, cfg: ScheduleConfig) -> float:
    """Adversarial mixing weight lambda_N(n) = w * (n/(N-1))^e.

    The exponent e = log_{1/2}(w_mid / w) makes the weight hit w_mid at
    n=(N-1)/2 and w at n=N-1. Callers passing n=N get clamped to N-1 so
    the degenerate top index stays in range.
    """
    if N < 2:
        raise ValueError(f"N must be >= 2, got {N}")
    n = min(n, N - 1)
    if not 1 <= n:
        raise ValueError(f"n must be >= 1, got {n}")
    exponent = math.log(cfg.w_mid / cfg.w) / math.log(0.5)
    return cfg.w * (n / (N - 1)) ** exponent


def build_grid(N: int, cfg: ScheduleConfig) -> TimestepGrid:
    """Curved timestep grid on [epsilon, T] with rho-warped spacing.

    times[i] = (eps^(1/rho) + i/(N-1) * (T^(1/rho) - eps^(1/rho)))^rho,
    endpoints forced bit-exact to epsilon and T.
    """
    if N < 2:
        raise ValueError(f"N must be >= 2, got {N}")
    inv_rho = 1.0 / cfg.rho
    lo = cfg.epsilon**inv_rho
    hi = cfg.T**inv_rho
    ramp = np.linspace(0.0, 1.0, N)
    times = (lo + ramp * (hi - lo)) ** cfg.rho
    times[0] = cfg.epsilon
    times[-1] = cfg.T
    return TimestepGrid(times=times)
