"""Training loops for consistency training with and without a discriminator,
plus checkpointing.

One step runs the generator phase (consistency + adversarial loss on one
draw), the EMA update, the discriminator phase on independent draws, and
the augmentation controller on gradient-penalty steps.
"""

from __future__ import annotations

import math
import pickle
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from . import losses as L
from .augmentation import AugController, pipeline_for_shape
from .config import RunConfig
from .consistency import ConsistencyModel
from .data import Dataset, DatasetSpec, make_dataset
from .discriminator import Discriminator
from .networks import DTYPE, BackboneSpec
from .schedules import adversarial_weight, build_grid, ema_decay, step_count

__all__ = ["TrainState", "build_state", "train_step", "run_training",
           "save_checkpoint", "load_checkpoint", "TrainingDiverged",
           "CheckpointError"]

CHECKPOINT_VERSION = "actlab-ckpt-1"


class TrainingDiverged(RuntimeError):
    """A loss went non-finite; state was checkpointed before raising."""


class CheckpointError(RuntimeError):
    pass


@dataclass
class TrainState:
    """Everything needed to resume a run bit-exactly."""

    cfg: RunConfig
    model: ConsistencyModel
    disc: Discriminator | None
    opt_g: torch.optim.Optimizer
    opt_d: torch.optim.Optimizer | None
    aug: AugController
    rng_g: torch.Generator
    rng_d: torch.Generator
    rng_aug: torch.Generator
    k: int = 0
    # cached per-N grid
    _grid_N: int = field(default=0, repr=False)
    _grid: object = field(default=None, repr=False)
    # instrumentation
    n_ct_grad_evals: int = 0
    n_second_order_evals: int = 0
    n_d_updates: int = 0

    def grid_for(self, N: int):
        if N != self._grid_N:
            self._grid = build_grid(N, self.cfg.schedule_config())
            self._grid_N = N
        return self._grid


def _generator_specs(cfg: RunConfig, sample_shape: tuple):
    g_spec = BackboneSpec(kind=cfg.backbone, widths=cfg.widths,
                          activation=cfg.activation, input_shape=sample_shape)
    d_spec = BackboneSpec(kind=cfg.backbone, widths=cfg.d_widths,
                          activation=cfg.d_activation, input_shape=sample_shape,
                          use_time=cfg.d_time_emb,
                          residual_downsampling=cfg.d_residual_downsampling)
    return g_spec, d_spec


def _needs_discriminator(cfg: RunConfig) -> bool:
    return not (cfg.lambda_mode == "constant" and cfg.lambda_const == 0.0)


def build_state(cfg: RunConfig, sample_shape: tuple) -> TrainState:
    """Fresh training state: online = EMA at step 0, seeded RNG streams."""
    torch.manual_seed(cfg.seed)
    g_spec, d_spec = _generator_specs(cfg, sample_shape)
    model = ConsistencyModel(g_spec, epsilon=cfg.epsilon, T=cfg.T)
    model.sync_ema()
    opt_g = torch.optim.Adam(model.net.parameters(), lr=cfg.learning_rate)
    disc = opt_d = None
    if _needs_discriminator(cfg):
        disc = Discriminator(d_spec, variant=cfg.discriminator_variant,
                             aug_enabled=cfg.aug,
                             aug_pipeline=pipeline_for_shape(sample_shape))
        opt_d = torch.optim.Adam(disc.parameters(), lr=cfg.lr_d)
    aug = AugController(tau=cfg.tau, p_r=cfg.p_r, mu_p=cfg.mu_p,
                        update_interval=cfg.I_gp)
    return TrainState(
        cfg=cfg, model=model, disc=disc, opt_g=opt_g, opt_d=opt_d, aug=aug,
        rng_g=torch.Generator().manual_seed(cfg.seed * 2654435761 % 2**31 + 1),
        rng_d=torch.Generator().manual_seed(cfg.seed * 2654435761 % 2**31 + 2),
        rng_aug=torch.Generator().manual_seed(cfg.seed * 2654435761 % 2**31 + 3),
    )


def _lambda_at(cfg: RunConfig, n: int, N: int) -> float:
    if cfg.lambda_mode == "constant":
        return cfg.lambda_const
    return adversarial_weight(min(n + 1, N - 1), N, cfg.schedule_config())


def train_step(state: TrainState, dataset: Dataset) -> L.LossReport:
    """One full training step; raises TrainingDiverged on non-finite loss."""
    cfg = state.cfg
    sched = cfg.schedule_config()
    distance = L.DISTANCES[cfg.distance]
    N = step_count(min(state.k, cfg.training_iterations), sched)
    grid = state.grid_for(N)
    p_aug = state.aug.p_aug if (state.disc is not None and state.disc.aug_enabled) else 0.0

    # --- generator phase -------------------------------------------------
    x0 = dataset.next_batch(cfg.batch_size, state.rng_g)
    n = int(torch.randint(1, N, (1,), generator=state.rng_g))  # 1..N-1
    z = torch.randn(x0.shape, generator=state.rng_g, dtype=DTYPE)
    t_hi, t_lo = float(grid.times[n]), float(grid.times[n - 1])
    lam = _lambda_at(cfg, n, N)

    online_out = state.model.forward(x0 + t_hi * z, t_hi, which="online")
    if lam < 1.0:
        l_ct = L.consistency_loss(state.model, x0, z, t_hi, t_lo,
                                  distance=distance, online_out=online_out)
        state.n_ct_grad_evals += 1
    else:
        # weight on the consistency term is exactly 0: log it, never
        # build its gradient
        with torch.no_grad():
            l_ct = L.consistency_loss(state.model, x0, z, t_hi, t_lo,
                                      distance=distance,
                                      online_out=online_out.detach())

    if state.disc is not None:
        if lam > 0.0:
            l_g = L.generator_adv_loss(state.disc, online_out, t_hi,
                                       p_aug=p_aug, rng=state.rng_aug)
        else:
            # value logged, gradient contribution exactly zeroed by the weight
            with torch.no_grad():
                l_g = L.generator_adv_loss(state.disc, online_out.detach(), t_hi,
                                           p_aug=p_aug, rng=state.rng_aug)
    else:
        l_g = torch.zeros(())

    loss_f = (1.0 - lam) * l_ct + lam * l_g
    state.opt_g.zero_grad(set_to_none=True)
    loss_f.backward()
    state.opt_g.step()
    state.model.ema_update(ema_decay(N, sched))

    # --- discriminator phase (independent draws) -------------------------
    l_d_raw = l_gp_val = 0.0
    lam_d = 0.0
    if state.disc is not None:
        x_g = dataset.next_batch(cfg.batch_size, state.rng_d)
        x_r = dataset.next_batch(cfg.batch_size, state.rng_d)
        n_d = int(torch.randint(1, N, (1,), generator=state.rng_d))
        z_d = torch.randn(x_g.shape, generator=state.rng_d, dtype=DTYPE)
        t_hi_d = float(grid.times[n_d])
        lam_d = _lambda_at(cfg, n_d, N)
        with torch.no_grad():
            fake = state.model.forward(x_g + t_hi_d * z_d, t_hi_d, which="online")
        l_d_t = L.discriminator_loss(state.disc, x_r, fake, t_hi_d,
                                     p_aug=p_aug, rng=state.rng_aug)
        if state.k % cfg.I_gp == 0:
            l_gp_t = L.gradient_penalty(state.disc, x_r, t_hi_d, cfg.w_gp,
                                        p_aug=p_aug, rng=state.rng_aug)
            state.n_second_order_evals += 1
        else:
            l_gp_t = torch.zeros(())
        loss_d = lam_d * (l_d_t + l_gp_t)
        if lam_d > 0.0:
            state.opt_d.zero_grad(set_to_none=True)
            loss_d.backward()
            state.opt_d.step()
            state.n_d_updates += 1
        l_d_raw, l_gp_val = float(l_d_t.detach()), float(l_gp_t.detach())

        if state.disc.aug_enabled and state.k % cfg.I_gp == 0:
            state.aug.step(l_gp_val)

    l_ct_val, l_g_val = float(l_ct.detach()), float(l_g.detach())
    report = L.LossReport(
        l_ct=l_ct_val, l_g=l_g_val,
        l_f=(1.0 - lam) * l_ct_val + lam * l_g_val,
        l_d=lam_d * (l_d_raw + l_gp_val), l_gp=l_gp_val,
        lambda_used=lam, n_index=n, t_pair=(t_lo, t_hi), p_aug=p_aug,
    )
    state.k += 1
    if not all(map(math.isfinite, (report.l_ct, report.l_g, report.l_f,
                                   report.l_d, report.l_gp))):
        raise TrainingDiverged(f"non-finite loss at step {state.k - 1}: {report}")
    return report


def run_training(state: TrainState, dataset: Dataset, steps: int,
                 csv_path=None, checkpoint_dir=None) -> list[L.LossReport]:
    """Run ``steps`` training steps, optionally streaming the loss CSV.

    On divergence the state is checkpointed (if a directory is given)
    before the exception propagates.
    """
    reports = []
    csv = open(csv_path, "a") if csv_path else None
    try:
        if csv and csv.tell() == 0:
            csv.write(L.LossReport.CSV_HEADER + "\n")
        for _ in range(steps):
            try:
                report = train_step(state, dataset)
            except TrainingDiverged:
                if checkpoint_dir:
                    save_checkpoint(state, Path(checkpoint_dir) / f"diverged-{state.k:08d}.pkl")
                raise
            reports.append(report)
            if csv:
                csv.write(report.csv_row(state.k - 1) + "\n")
            if (checkpoint_dir and state.cfg.checkpoint_every
                    and state.k % state.cfg.checkpoint_every == 0):
                save_checkpoint(state, Path(checkpoint_dir) / f"ckpt-{state.k:08d}.pkl")
    finally:
        if csv:
            csv.close()
    return reports


# --- checkpointing --------------------------------------------------------

def _optim_to_arrays(opt: torch.optim.Optimizer) -> dict:
    sd = opt.state_dict()

    def conv(v):
        if isinstance(v, torch.Tensor):
            return ("tensor", v.detach().numpy().copy())
        if isinstance(v, dict):
            return {k: conv(x) for k, x in v.items()}
        if isinstance(v, list):
            return [conv(x) for x in v]
        return v

    return conv(sd)


def _arrays_to_optim(opt: torch.optim.Optimizer, data: dict):
    def conv(v):
        if isinstance(v, tuple) and len(v) == 2 and v[0] == "tensor":
            return torch.as_tensor(v[1])
        if isinstance(v, dict):
            return {k: conv(x) for k, x in v.items()}
        if isinstance(v, list):
            return [conv(x) for x in v]
        return v

    opt.load_state_dict(conv(data))


def save_checkpoint(state: TrainState, path) -> None:
    """Write the full training state as a version-stamped pickle."""
    from .config import serialize_config

    payload = {
        "version": CHECKPOINT_VERSION,
        "config": serialize_config(state.cfg),
        "sample_shape": tuple(state.model.spec.input_shape),
        "k": state.k,
        "model": state.model.state_arrays(),
        "disc": state.disc.state_arrays() if state.disc is not None else None,
        "opt_g": _optim_to_arrays(state.opt_g),
        "opt_d": _optim_to_arrays(state.opt_d) if state.opt_d is not None else None,
        "p_aug": state.aug.p_aug,
        "l_gp_ema": state.aug.l_gp_ema,
        "rng_g": state.rng_g.get_state().numpy().copy(),
        "rng_d": state.rng_d.get_state().numpy().copy(),
        "rng_aug": state.rng_aug.get_state().numpy().copy(),
        "counters": (state.n_ct_grad_evals, state.n_second_order_evals,
                     state.n_d_updates),
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        pickle.dump(payload, f, protocol=4)


def load_checkpoint(path, expect_cfg: RunConfig | None = None) -> TrainState:
    """Rebuild a TrainState; backbone-spec mismatch is a hard error."""
    from .config import parse_config

    with open(path, "rb") as f:
        try:
            payload = pickle.load(f)
        except Exception as e:
            raise CheckpointError(f"corrupt checkpoint {path}: {e}") from e
    version = payload.get("version")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"checkpoint version {version!r} does not match {CHECKPOINT_VERSION!r}")
    cfg = parse_config(payload["config"])
    if expect_cfg is not None:
        saved_specs = _generator_specs(cfg, payload["sample_shape"])
        want_specs = _generator_specs(expect_cfg, payload["sample_shape"])
        if saved_specs != want_specs:
            raise CheckpointError("backbone spec mismatch between checkpoint and config")
        cfg = expect_cfg
    state = build_state(cfg, tuple(payload["sample_shape"]))
    state.k = payload["k"]
    state.model.load_arrays(payload["model"])
    if state.disc is not None and payload["disc"] is not None:
        state.disc.load_arrays(payload["disc"])
    _arrays_to_optim(state.opt_g, payload["opt_g"])
    if state.opt_d is not None and payload["opt_d"] is not None:
        _arrays_to_optim(state.opt_d, payload["opt_d"])
    state.aug.p_aug = payload["p_aug"]
    state.aug.l_gp_ema = payload["l_gp_ema"]
    state.rng_g.set_state(torch.as_tensor(payload["rng_g"]))
    state.rng_d.set_state(torch.as_tensor(payload["rng_d"]))
    state.rng_aug.set_state(torch.as_tensor(payload["rng_aug"]))
    (state.n_ct_grad_evals, state.n_second_order_evals,
     state.n_d_updates) = payload["counters"]
    # sanity probe: the boundary condition must hold after load
    probe = torch.randn((4, *state.model.spec.input_shape), dtype=DTYPE)
    with torch.no_grad():
        out = state.model.forward(probe, state.model.epsilon, which="online")
    if not torch.allclose(out, probe):
        raise CheckpointError("boundary-condition probe failed after load")
    return state


def dataset_from_config(cfg: RunConfig) -> Dataset:
    return make_dataset(DatasetSpec(kind=cfg.dataset, size=cfg.dataset_size,
                                    seed=cfg.seed,
                                    path=cfg.dataset_path or None))
