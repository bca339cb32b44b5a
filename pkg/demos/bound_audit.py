"""Numerically audit the Wasserstein upper bound on a briefly trained model.

The bound ties the one-step generation error at each grid time t_k to the
consistency losses accumulated over coarser times plus a Lipschitz-weighted
distribution-mismatch term. On a toy model every quantity is measurable
with brute force. The audit reports, per t_k:

  lhs        exact empirical W2 between one-step outputs and held-out data
  ct_accum   accumulated Monte-Carlo consistency terms up to t_k
  L * w_qp   empirical Lipschitz lower bound times the (two-sample) W2
             between the noised-data marginals
  slack      rhs minus lhs (positive = bound satisfied with room)

Takes a couple of minutes on CPU:

    python demos/bound_audit.py
"""

from actlab import RunConfig, audit_bound, build_state, dataset_from_config, train_step
from actlab.schedules import build_grid, step_count

STEPS = 2000


def main():
    cfg = RunConfig(dataset="gauss8", dataset_size=4096, batch_size=64,
                    training_iterations=STEPS, s1=20, learning_rate=1e-3,
                    w_gp=1.0, d_activation="leakyrelu",
                    lambda_mode="constant", lambda_const=0.3, seed=0)
    ds = dataset_from_config(cfg)
    state = build_state(cfg, ds.sample_shape)
    print(f"training {STEPS} steps ...")
    for _ in range(STEPS):
        train_step(state, ds)

    sched = cfg.schedule_config()
    grid = build_grid(step_count(STEPS, sched), sched)
    print(f"\n{'t_k':>9}  {'lhs':>7}  {'ct_accum':>8}  {'L*w_qp':>8}  "
          f"{'slack':>8}  holds")
    for k in range(grid.N):
        rep = audit_bound(state.model, ds.data, grid, k, n_samples=256, seed=0)
        print(f"{rep.t_k:9.3f}  {rep.lhs:7.4f}  {rep.ct_accum:8.4f}  "
              f"{rep.lipschitz_est * rep.w_qp:8.4f}  {rep.slack:8.4f}  "
              f"{rep.holds()}")


if __name__ == "__main__":
    main()
