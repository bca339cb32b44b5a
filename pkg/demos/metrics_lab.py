"""Tour of the brute-force metric oracles against cases with known answers.

Each block prints the measured value next to the closed-form expectation,
so you can eyeball that the oracles are trustworthy before pointing them at
a trained model. Runs in seconds:

    python demos/metrics_lab.py
"""

import math

import numpy as np

from actlab import js_divergence, wasserstein_1d, wasserstein_nd
from actlab.metrics import (frechet_from_stats, lipschitz_estimate,
                            mode_coverage)
from actlab.data import gauss8_centers

rng = np.random.default_rng(0)


def show(name, got, want):
    print(f"{name:55s} got {got:9.4f}   expected {want:9.4f}")


def main():
    # 1-D Wasserstein: N(0,1) vs N(2,1) has W2 = 2 exactly
    a = rng.normal(0, 1, size=100_000)
    b = rng.normal(2, 1, size=100_000)
    show("W2 on the line, unit shift of a Gaussian", wasserstein_1d(a, b), 2.0)

    # n-D Wasserstein by exact matching: translation by (3, 4) costs 5
    pts = rng.normal(size=(512, 2))
    show("W2 in 2-D, translation by (3,4)",
         wasserstein_nd(pts, pts + np.array([3.0, 4.0])), 5.0)

    # scaling a standard normal by 2 costs sqrt(2) in 2-D
    show("W2 in 2-D, N(0,I) vs N(0,4I)",
         wasserstein_nd(pts, 2 * rng.normal(size=(512, 2))), math.sqrt(2))

    # JS divergence: disjoint supports saturate at ln 2
    show("JSD, disjoint supports",
         js_divergence(np.zeros((500, 1)), 10 + np.zeros((500, 1)), bins=4),
         math.log(2))

    # half-overlapping uniforms: analytic JSD = ln(2) / 2
    u = rng.uniform(0, 1, size=(100_000, 1))
    v = rng.uniform(0.5, 1.5, size=(100_000, 1))
    show("JSD, uniforms overlapping by half",
         js_divergence(u, v, bins=96), 0.5 * math.log(2))

    # empirical Lipschitz lower bound on known maps
    samples = rng.normal(size=(128, 2))
    show("Lipschitz estimate of x -> 3x",
         lipschitz_estimate(lambda x, t: 3 * x, 1.0, samples), 3.0)

    # mode coverage on the 8-Gaussian ring
    modes = gauss8_centers()
    show("mode coverage, samples piled on one mode",
         mode_coverage(np.tile(modes[0], (50, 1)), modes, radius=0.3), 0.125)

    # Frechet score closed forms
    show("Frechet, 1-D equal means sigma 1 vs 2",
         frechet_from_stats([0.0], [[1.0]], [0.0], [[4.0]]), 1.0)
    d = np.array([1.0, 2.0, 2.0])
    show("Frechet, mean shift (1,2,2) equal covariances",
         frechet_from_stats(np.zeros(3), np.eye(3), d, np.eye(3)), 9.0)


if __name__ == "__main__":
    main()
