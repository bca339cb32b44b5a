"""Command-line entry point.

Subcommands: train, resume, sample, inpaint, eval, bound-check, mode-check.
Exit codes: 0 success, 2 invalid config, 3 training divergence, 1 other.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np
import torch

from . import metrics as M
from . import sampler as S
from .config import ConfigError, RunConfig, load_config, serialize_config
from .data import gauss8_centers
from .networks import DTYPE
from .schedules import build_grid, step_count
from .trainer import (TrainingDiverged, build_state, dataset_from_config,
                      load_checkpoint, run_training, save_checkpoint)

EXIT_OK, EXIT_ERROR, EXIT_CONFIG, EXIT_DIVERGED = 0, 1, 2, 3


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _final_grid(cfg: RunConfig):
    sched = cfg.schedule_config()
    return build_grid(step_count(cfg.training_iterations, sched), sched)


def _latest_checkpoint(out: Path) -> Path:
    ckpts = sorted(out.glob("ckpt-*.pkl"))
    if not ckpts:
        raise FileNotFoundError(f"no checkpoints under {out}")
    return ckpts[-1]


def _save_samples(x: torch.Tensor, path: Path, is_image: bool):
    if is_image:
        from PIL import Image

        arr = ((x.clamp(-1, 1) + 1) * 127.5).round().to(torch.uint8).numpy()
        n = arr.shape[0]
        cols = int(np.ceil(np.sqrt(n)))
        rows = int(np.ceil(n / cols))
        _, c, h, w = arr.shape
        grid = np.zeros((rows * h, cols * w, c), dtype=np.uint8)
        for i in range(n):
            r, col = divmod(i, cols)
            grid[r * h : (r + 1) * h, col * w : (col + 1) * w] = arr[i].transpose(1, 2, 0)
        Image.fromarray(grid.squeeze()).save(path.with_suffix(".png"))
    else:
        np.savetxt(path.with_suffix(".csv"), x.numpy(), delimiter=",",
                   header=",".join(f"x{i}" for i in range(x.shape[1])), comments="")


def cmd_train(args, cfg: RunConfig, resume: bool = False) -> int:
    dataset = dataset_from_config(cfg)
    out = _out_dir(cfg)
    if resume:
        state = load_checkpoint(args.checkpoint or _latest_checkpoint(out),
                                expect_cfg=cfg)
    else:
        state = build_state(cfg, dataset.sample_shape)
    (out / "config.txt").write_text(serialize_config(cfg))
    steps = cfg.training_iterations - state.k
    run_training(state, dataset, steps, csv_path=out / "losses.csv",
                 checkpoint_dir=out)
    # never overwrite an existing checkpoint on rerun
    path = out / f"ckpt-{state.k:08d}.pkl"
    suffix = 1
    while path.exists():
        path = out / f"ckpt-{state.k:08d}.{suffix}.pkl"
        suffix += 1
    save_checkpoint(state, path)
    print(f"trained to step {state.k}; outputs in {out}")
    return EXIT_OK


def cmd_sample(args, cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    state = load_checkpoint(args.checkpoint or _latest_checkpoint(out))
    is_image = cfg.backbone != "mlp"
    grid = _final_grid(cfg)
    x = S.sample_multistep(state.model, args.count, args.seed, grid=grid,
                           steps=args.steps, clamp=is_image)
    path = out / f"samples-{state.k:08d}-seed{args.seed}"
    _save_samples(x, path, is_image)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_inpaint(args, cfg: RunConfig) -> int:
    from PIL import Image

    out = _out_dir(cfg)
    state = load_checkpoint(args.checkpoint or _latest_checkpoint(out))
    ref = torch.as_tensor(
        np.asarray(Image.open(args.reference).convert("RGB"), dtype=np.float64)
        .transpose(2, 0, 1) / 127.5 - 1.0, dtype=DTYPE)
    mask = torch.as_tensor(
        (np.asarray(Image.open(args.mask).convert("L"), dtype=np.float64) > 127)
        .astype(np.float64), dtype=DTYPE).expand_as(ref)
    grid = _final_grid(cfg)
    x = S.inpaint(state.model, ref, mask, grid, args.steps, args.seed, clamp=True)
    path = out / f"inpaint-seed{args.seed}"
    _save_samples(x[None], path, is_image=True)
    print(f"wrote {path}")
    return EXIT_OK


def _loss_curves(out: Path):
    import csv as csvmod

    path = out / "losses.csv"
    if not path.exists():
        return None
    with open(path) as f:
        rows = list(csvmod.DictReader(f))
    return rows or None


def cmd_eval(args, cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    state = load_checkpoint(args.checkpoint or _latest_checkpoint(out))
    dataset = dataset_from_config(cfg)
    is_image = cfg.backbone != "mlp"
    samples = S.sample_one_step(state.model, args.count, args.seed, clamp=is_image)
    real = dataset.next_batch(args.count, torch.Generator().manual_seed(args.seed))
    if is_image:
        feats_a = M.pooled_image_features(samples)
        feats_b = M.pooled_image_features(real)
    else:
        feats_a, feats_b = samples.numpy(), real.numpy()
    fd = M.frechet_score(feats_a, feats_b)
    lines = [f"frechet_score,{fd!r}"]
    if cfg.dataset == "gauss8":
        cov = M.mode_coverage(samples.numpy(), gauss8_centers(), radius=args.radius)
        lines.append(f"mode_coverage,{cov!r}")
    (out / "eval.csv").write_text("metric,value\n" + "\n".join(lines) + "\n")
    print("\n".join(lines))
    _emit_plots(out)
    return EXIT_OK


def _emit_plots(out: Path):
    rows = _loss_curves(out)
    if not rows:
        return
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    ks = [int(r["k"]) for r in rows]
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.2))
    for ax, key in zip(axes, ("l_ct", "l_gp", "p_aug")):
        ax.plot(ks, [float(r[key]) for r in rows], lw=0.7)
        ax.set_xlabel("step")
        ax.set_title(key)
    fig.tight_layout()
    fig.savefig(out / "training_curves.png", dpi=120)
    plt.close(fig)


def cmd_bound_check(args, cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    state = load_checkpoint(args.checkpoint or _latest_checkpoint(out))
    dataset = dataset_from_config(cfg)
    grid = _final_grid(cfg)
    indices = np.round(np.linspace(0, grid.N - 1, args.points)).astype(int)
    lines = [M.BoundReport.CSV_HEADER]
    ok = True
    for k_idx in indices:
        rep = M.audit_bound(state.model, dataset.data, grid, int(k_idx),
                            n_samples=args.count, seed=args.seed)
        lines.append(rep.csv_row())
        ok = ok and rep.holds()
    (out / "bound_report.csv").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    print(f"bound-audit: {'PASS' if ok else 'VIOLATION REPORTED'}")
    return EXIT_OK


def cmd_mode_check(args, cfg: RunConfig) -> int:
    """Train short runs at two lambda settings and compare mode coverage."""
    import dataclasses

    out = _out_dir(cfg)
    results = {}
    for lam in args.lambdas:
        covs = []
        for seed in range(args.seeds):
            run_cfg = dataclasses.replace(
                cfg, lambda_mode="constant", lambda_const=lam, seed=seed,
                output_dir=str(out / f"lam{lam}-seed{seed}"))
            dataset = dataset_from_config(run_cfg)
            state = build_state(run_cfg, dataset.sample_shape)
            run_training(state, dataset, run_cfg.training_iterations)
            samples = S.sample_one_step(state.model, 512, seed=seed + 9000)
            covs.append(M.mode_coverage(samples.numpy(), gauss8_centers(),
                                        radius=args.radius))
        results[lam] = covs
    lines = ["lambda,coverages,median"]
    for lam, covs in results.items():
        lines.append(f"{lam},{';'.join(map(repr, covs))},{float(np.median(covs))!r}")
    (out / "mode_check.csv").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="actlab")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, **kwargs):
        sp = sub.add_parser(name, **kwargs)
        sp.add_argument("config", help="path to key=value run config")
        sp.add_argument("--checkpoint", default=None)
        sp.add_argument("--seed", type=int, default=0)
        return sp

    add("train", help="fresh training run")
    add("resume", help="resume from the latest (or given) checkpoint")
    sp = add("sample", help="generate samples")
    sp.add_argument("--count", type=int, default=64)
    sp.add_argument("--steps", type=int, default=1)
    sp = add("inpaint", help="zero-shot inpainting")
    sp.add_argument("--reference", required=True)
    sp.add_argument("--mask", required=True)
    sp.add_argument("--steps", type=int, default=5)
    sp = add("eval", help="frechet score + mode coverage + plots")
    sp.add_argument("--count", type=int, default=512)
    sp.add_argument("--radius", type=float, default=0.3)
    sp = add("bound-check", help="audit the W-distance bound over grid times")
    sp.add_argument("--points", type=int, default=8)
    sp.add_argument("--count", type=int, default=256)
    sp = add("mode-check", help="lambda-sweep mode-coverage contrast")
    sp.add_argument("--lambdas", type=float, nargs="+", default=[0.3, 0.99])
    sp.add_argument("--seeds", type=int, default=3)
    sp.add_argument("--radius", type=float, default=0.3)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigError as e:
        print(f"error=config key={e.key}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"error=io detail={e}", file=sys.stderr)
        return EXIT_ERROR
    handlers = {
        "train": lambda: cmd_train(args, cfg),
        "resume": lambda: cmd_train(args, cfg, resume=True),
        "sample": lambda: cmd_sample(args, cfg),
        "inpaint": lambda: cmd_inpaint(args, cfg),
        "eval": lambda: cmd_eval(args, cfg),
        "bound-check": lambda: cmd_bound_check(args, cfg),
        "mode-check": lambda: cmd_mode_check(args, cfg),
    }
    try:
        return handlers[args.command]()
    except TrainingDiverged as e:
        print(f"error=diverged detail={e}", file=sys.stderr)
        return EXIT_DIVERGED
    except (FileNotFoundError, ValueError, RuntimeError) as e:
        print(f"error=failed detail={e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
