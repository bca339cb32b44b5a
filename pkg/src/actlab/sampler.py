"""One-step generation, multistep refinement, conditional trajectories, and
zero-shot inpainting.

Noise re-injection uses sqrt(tau^2 - eps^2) scaling so a refined point has
the correct marginal at time tau given an eps-level sample.
"""

from __future__ import annotations

import math

import numpy as np
import torch

from .networks import DTYPE

__all__ = [
    "sample_one_step",
    "sample_multistep",
    "sample_conditional_trajectory",
    "inpaint",
]


def _refinement_times(grid, m: int) -> list[float]:
    """Decreasing subsequence of m grid times below T, evenly spaced in index
    down to the grid's second-smallest time."""
    if m == 0:
        return []
    idx = np.round(np.linspace(grid.N - 1, 1, m + 1)).astype(int)[1:]
    return [float(grid.times[i]) for i in idx]


def sample_one_step(model, n: int, seed: int, clamp: bool = False) -> torch.Tensor:
    """f(T z, T) for z ~ N(0, I); deterministic given seed."""
    return sample_multistep(model, n, seed, grid=None, steps=1, clamp=clamp)


def sample_multistep(model, n: int, seed: int, grid=None, steps: int = 1,
                     clamp: bool = False, which: str = "online") -> torch.Tensor:
    """One initial generation plus ``steps - 1`` refinement passes."""
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    if steps > 1 and grid is None:
        raise ValueError("multistep sampling needs the timestep grid")
    rng = torch.Generator().manual_seed(seed)
    shape = (n, *model.spec.input_shape)
    z = torch.randn(shape, generator=rng, dtype=DTYPE)
    with torch.no_grad():
        x = model.forward(model.T * z, model.T, which=which)
        for tau in _refinement_times(grid, steps - 1):
            z_i = torch.randn(shape, generator=rng, dtype=DTYPE)
            sigma = math.sqrt(tau * tau - model.epsilon**2)
            x = model.forward(x + sigma * z_i, tau, which=which)
    if clamp:
        x = x.clamp(-1.0, 1.0)
    return x


def sample_conditional_trajectory(model, x0: torch.Tensor, z: torch.Tensor,
                                  grid, indices) -> list[torch.Tensor]:
    """[f(x0 + t_k z, t_k)] for each requested grid index (0-based)."""
    outputs = []
    with torch.no_grad():
        for k in indices:
            if not 0 <= k < grid.N:
                raise ValueError(f"index {k} outside grid of size {grid.N}")
            t_k = float(grid.times[k])
            outputs.append(model.forward(x0 + t_k * z, t_k, which="online"))
    return outputs


def inpaint(model, reference: torch.Tensor, mask: torch.Tensor, grid,
            refine_steps: int, seed: int, clamp: bool = False) -> torch.Tensor:
    """Fill the unknown (mask=0) region by alternating known-region
    replacement with consistency refinement.

    mask entries are {0, 1} with 1 = known pixel. The final replacement is
    applied after the last model call, so mask * output == mask * reference
    bit-exactly. An all-zeros mask reduces to multistep sampling.
    """
    mask = mask.to(DTYPE)
    if not torch.all((mask == 0) | (mask == 1)):
        raise ValueError("mask entries must be 0 or 1")
    if mask.shape != reference.shape:
        raise ValueError(f"mask shape {tuple(mask.shape)} != reference {tuple(reference.shape)}")
    if refine_steps < 1:
        raise ValueError(f"refine_steps must be >= 1, got {refine_steps}")
    squeeze = reference.dim() == len(model.spec.input_shape)
    if squeeze:
        reference, mask = reference[None], mask[None]
    rng = torch.Generator().manual_seed(seed)
    z = torch.randn(reference.shape, generator=rng, dtype=DTYPE)
    with torch.no_grad():
        x = model.forward(model.T * z, model.T, which="online")
        for tau in _refinement_times(grid, refine_steps):
            x = mask * reference + (1.0 - mask) * x
            z_i = torch.randn(reference.shape, generator=rng, dtype=DTYPE)
            sigma = math.sqrt(tau * tau - model.epsilon**2)
            x = model.forward(x + sigma * z_i, tau, which="online")
    if clamp:
        x = x.clamp(-1.0, 1.0)
    out = mask * reference + (1.0 - mask) * x
    return out[0] if squeeze else out
