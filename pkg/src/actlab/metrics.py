"""Brute-force oracles: Wasserstein distances, JS divergence, Lipschitz
estimation, mode coverage, a desk-scale Frechet score, and the numerical
audit of the W-distance upper bound.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import torch
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from .networks import DTYPE

__all__ = [
    "wasserstein_1d",
    "wasserstein_nd",
    "js_divergence",
    "lipschitz_estimate",
    "mode_coverage",
    "frechet_score",
    "frechet_from_stats",
    "BoundReport",
    "audit_bound",
]

ND_SAMPLE_CAP = 1024


def _resample_to(a: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    return a[rng.choice(len(a), size=n, replace=True)]


def wasserstein_1d(a, b, p: float = 2.0) -> float:
    """Exact empirical W_p on the line via sorted pairing."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if len(a) == 0 or len(b) == 0:
        raise ValueError("empty sample set")
    if len(a) != len(b):
        rng = np.random.default_rng(0)
        n = min(len(a), len(b))
        a, b = _resample_to(a, n, rng), _resample_to(b, n, rng)
    a, b = np.sort(a), np.sort(b)
    return float(np.mean(np.abs(a - b) ** p) ** (1.0 / p))


def wasserstein_nd(a, b) -> float:
    """Exact empirical W_2 via minimum-cost perfect matching.

    Cubic-time oracle; refuses more than ND_SAMPLE_CAP samples per side.
    """
    a = np.asarray(a, dtype=np.float64).reshape(len(a), -1)
    b = np.asarray(b, dtype=np.float64).reshape(len(b), -1)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("empty sample set")
    if len(a) != len(b):
        rng = np.random.default_rng(0)
        n = min(len(a), len(b))
        a, b = _resample_to(a, n, rng), _resample_to(b, n, rng)
    if len(a) > ND_SAMPLE_CAP:
        raise ValueError(f"exact matching capped at {ND_SAMPLE_CAP} samples, got {len(a)}")
    cost = cdist(a, b, metric="sqeuclidean")
    rows, cols = linear_sum_assignment(cost)
    return float(np.sqrt(cost[rows, cols].mean()))


def js_divergence(a, b, bins=64) -> float:
    """Histogram JS divergence on a shared grid, in nats.

    ``bins`` is an int (per-dimension bin count) or explicit edge arrays.
    Empty bins are smoothed with eps = 1e-12; the result lies in
    [0, ln 2] up to the smoothing floor.
    """
    a = np.asarray(a, dtype=np.float64).reshape(len(a), -1)
    b = np.asarray(b, dtype=np.float64).reshape(len(b), -1)
    if isinstance(bins, int):
        both = np.concatenate([a, b])
        edges = [
            np.linspace(both[:, d].min(), both[:, d].max() + 1e-12, bins + 1)
            for d in range(a.shape[1])
        ]
    else:
        edges = bins
    p, _ = np.histogramdd(a, bins=edges)
    q, _ = np.histogramdd(b, bins=edges)
    eps = 1e-12
    p = p.ravel() / p.sum() + eps
    q = q.ravel() / q.sum() + eps
    p, q = p / p.sum(), q / q.sum()
    m = 0.5 * (p + q)
    return float(0.5 * np.sum(p * np.log(p / m)) + 0.5 * np.sum(q * np.log(q / m)))


def lipschitz_estimate(f, t: float, samples, pairs: int = 256,
                       rng: np.random.Generator | None = None) -> float:
    """Empirical LOWER bound on the Lipschitz constant of x -> f(x, t).

    Max of ||f(x) - f(y)|| / ||x - y|| over randomly sampled pairs;
    coincident pairs are skipped.
    """
    samples = torch.as_tensor(np.asarray(samples), dtype=DTYPE)
    if len(samples) < 2:
        raise ValueError("need at least 2 samples")
    rng = rng or np.random.default_rng(0)
    idx = rng.integers(0, len(samples), size=(pairs, 2))
    with torch.no_grad():
        fx = f(samples, t)
    fx = fx.reshape(len(samples), -1).numpy()
    flat = samples.reshape(len(samples), -1).numpy()
    best = 0.0
    for i, j in idx:
        dx = np.linalg.norm(flat[i] - flat[j])
        if dx == 0.0:
            continue
        best = max(best, np.linalg.norm(fx[i] - fx[j]) / dx)
    return float(best)


def mode_coverage(samples, modes, radius: float) -> float:
    """Fraction of mode centers with at least one sample within radius."""
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    samples = np.asarray(samples, dtype=np.float64).reshape(len(samples), -1)
    modes = np.asarray(modes, dtype=np.float64).reshape(len(modes), -1)
    d = cdist(modes, samples)
    return float(np.mean(d.min(axis=1) <= radius))


def frechet_from_stats(mu_a, cov_a, mu_b, cov_b) -> float:
    """||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^(1/2))."""
    mu_a, mu_b = np.atleast_1d(mu_a), np.atleast_1d(mu_b)
    cov_a, cov_b = np.atleast_2d(cov_a), np.atleast_2d(cov_b)
    covmean, _ = scipy.linalg.sqrtm(cov_a @ cov_b, disp=False)
    if not np.isfinite(covmean).all():
        reg = 1e-6 * np.eye(cov_a.shape[0])
        covmean, _ = scipy.linalg.sqrtm((cov_a + reg) @ (cov_b + reg), disp=False)
    covmean = np.real(covmean)
    return float(np.sum((mu_a - mu_b) ** 2)
                 + np.trace(cov_a + cov_b - 2.0 * covmean))


def frechet_score(feats_a, feats_b) -> float:
    """Frechet distance between Gaussian fits of two feature sets."""
    a = np.asarray(feats_a, dtype=np.float64).reshape(len(feats_a), -1)
    b = np.asarray(feats_b, dtype=np.float64).reshape(len(feats_b), -1)
    dim = a.shape[1]
    if len(a) < dim + 1 or len(b) < dim + 1:
        raise ValueError(f"need at least dim+1={dim + 1} samples per side")
    return frechet_from_stats(a.mean(0), np.cov(a, rowvar=False),
                              b.mean(0), np.cov(b, rowvar=False))


def pooled_image_features(x: torch.Tensor, out_size: int = 8) -> np.ndarray:
    """Default desk-scale feature map: average-pooled raw pixels."""
    pooled = torch.nn.functional.adaptive_avg_pool2d(x, out_size)
    return pooled.reshape(x.shape[0], -1).detach().numpy()


@dataclass
class BoundReport:
    """Numeric audit of the W-distance bound at one grid time.

    The discretization-error terms of the bound are not estimable without
    the true ODE; they are absorbed into ``slack_budget`` (reported, not
    pretended computable). ``lipschitz_est`` is an empirical lower bound
    on the global constant, so the audit tests a necessary consequence of
    the bound, not the bound itself.
    """

    t_k: float
    lhs: float
    ct_accum: float
    lipschitz_est: float
    w_qp: float
    slack: float
    mc_stderr: float
    slack_budget: float

    CSV_HEADER = "t_k,lhs,ct_accum,lipschitz_est,w_qp,slack,mc_stderr,slack_budget"

    def csv_row(self) -> str:
        return (f"{self.t_k!r},{self.lhs!r},{self.ct_accum!r},{self.lipschitz_est!r},"
                f"{self.w_qp!r},{self.slack!r},{self.mc_stderr!r},{self.slack_budget!r}")

    def holds(self) -> bool:
        """lhs <= lipschitz_est * w_qp + ct_accum + 3 * mc_stderr + slack_budget.

        The w_qp term is zero for the true marginals; its empirical value is
        the two-sample floor of the W estimator and covers the same floor
        contaminating lhs, which the population-level inequality ignores.
        """
        rhs = (self.lipschitz_est * self.w_qp + self.ct_accum
               + 3.0 * self.mc_stderr + self.slack_budget)
        return self.lhs <= rhs


def _ct_term(model, x0: torch.Tensor, z: torch.Tensor, t_hi: float, t_lo: float):
    """Mean and stderr of the per-sample L2 consistency gap (the bound sums
    norms, not the squared distances used as the training objective)."""
    with torch.no_grad():
        hi = model.forward(x0 + t_hi * z, t_hi, which="online")
        lo = model.forward(x0 + t_lo * z, t_lo, which="ema")
    d = (hi - lo).reshape(len(x0), -1).norm(dim=1).numpy()
    return float(d.mean()), float(d.std(ddof=1) / np.sqrt(len(d)))


def audit_bound(model, data: torch.Tensor, grid, k_index: int,
                n_samples: int = 512, seed: int = 0,
                slack_fraction: float = 0.1) -> BoundReport:
    """Audit the W-distance bound at grid index ``k_index`` (0-based).

    lhs is the exact empirical W_2 between one-step outputs f(x_{t_k}, t_k)
    with x_{t_k} ~ p_{t_k} (q_t = p_t) and held-out data. ct_accum sums the
    Monte-Carlo consistency terms over grid indices 1..k_index with common
    per-index randomness, so it is nondecreasing in k across calls.
    """
    times = grid.times
    if not 0 <= k_index < grid.N:
        raise ValueError(f"k_index={k_index} outside grid of size {grid.N}")
    t_k = float(times[k_index])
    master = np.random.default_rng(seed)
    torch_rng = torch.Generator().manual_seed(int(master.integers(2**63)))

    n = min(n_samples, ND_SAMPLE_CAP, len(data) // 2)
    perm = torch.randperm(len(data), generator=torch_rng)
    x0_pool, heldout = data[perm[:n]], data[perm[n : 2 * n]]

    z = torch.randn(x0_pool.shape, generator=torch_rng, dtype=DTYPE)
    x_tk = x0_pool + t_k * z
    with torch.no_grad():
        gen = model.forward(x_tk, t_k, which="online")
    lhs = wasserstein_nd(gen.numpy(), heldout.numpy())

    ct_accum, var_accum = 0.0, 0.0
    for i in range(1, k_index + 1):
        # common randomness per index so accumulation is consistent across k
        rng_i = torch.Generator().manual_seed(seed * 1_000_003 + i)
        idx = torch.randint(len(data), (n,), generator=rng_i)
        zi = torch.randn((n, *data.shape[1:]), generator=rng_i, dtype=DTYPE)
        mean_i, se_i = _ct_term(model, data[idx], zi, float(times[i]), float(times[i - 1]))
        ct_accum += mean_i
        var_accum += se_i**2
    mc_stderr = float(np.sqrt(var_accum))

    lip = lipschitz_estimate(model.forward, t_k, x_tk.numpy(), pairs=256,
                             rng=np.random.default_rng(seed + 1))
    z2 = torch.randn(x0_pool.shape, generator=torch_rng, dtype=DTYPE)
    idx2 = torch.randint(len(data), (n,), generator=torch_rng)
    w_qp = wasserstein_nd(x_tk.numpy(), (data[idx2] + t_k * z2).numpy())

    slack_budget = slack_fraction * ct_accum
    slack = lip * w_qp + ct_accum - lhs
    return BoundReport(t_k=t_k, lhs=lhs, ct_accum=ct_accum, lipschitz_est=lip,
                       w_qp=w_qp, slack=slack, mc_stderr=mc_stderr,
                       slack_budget=slack_budget)
