"""Train the 8-Gaussian toy at three adversarial-weight settings and
compare the resulting sample quality.

lambda = 0 is pure consistency training, lambda = 0.3 mixes in the
adversarial term, and lambda = 0.99 is nearly a pure GAN. The contrast to
look for: the mixed run reaches a lower Wasserstein distance at this small
batch size, while the GAN-dominated run drops modes.

Takes a few minutes on CPU. Run from the repository root:

    python demos/train_toy.py
"""

import torch

from actlab import (RunConfig, build_state, dataset_from_config,
                    mode_coverage, sample_one_step, train_step,
                    wasserstein_nd)
from actlab.data import gauss8_centers

STEPS = 5000
EVAL_N = 512


def run(lam: float, seed: int = 0):
    cfg = RunConfig(dataset="gauss8", dataset_size=4096, batch_size=64,
                    training_iterations=STEPS, s1=20, learning_rate=1e-3,
                    w_gp=1.0, d_activation="leakyrelu",
                    lambda_mode="constant", lambda_const=lam, seed=seed)
    ds = dataset_from_config(cfg)
    state = build_state(cfg, ds.sample_shape)

    baseline = sample_one_step(state.model, EVAL_N, seed=123)
    target = ds.next_batch(EVAL_N, torch.Generator().manual_seed(456))
    w2_before = wasserstein_nd(baseline.numpy(), target.numpy())

    for k in range(STEPS):
        rep = train_step(state, ds)
        if k % 1000 == 0:
            print(f"  step {k:5d}  l_ct={rep.l_ct:8.4f}  l_g={rep.l_g:8.4f}"
                  f"  l_d={rep.l_d:8.4f}")

    samples = sample_one_step(state.model, EVAL_N, seed=123)
    w2 = wasserstein_nd(samples.numpy(), target.numpy())
    cov = mode_coverage(samples.numpy(), gauss8_centers(), radius=0.3)
    return w2_before, w2, cov


def main():
    print("lambda  W2(untrained)  W2(trained)  mode coverage")
    for lam in (0.0, 0.3, 0.99):
        print(f"training with lambda = {lam} ...")
        before, after, cov = run(lam)
        print(f"{lam:6.2f}  {before:13.3f}  {after:11.3f}  {cov:13.3f}\n")


if __name__ == "__main__":
    main()
