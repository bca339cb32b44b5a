"""Differentiable augmentation pipelines and the gradient-penalty controller.

Each op fires independently per sample with probability ``p_aug``; all ops
are differentiable in x so the discriminator's gradient penalty can pass
through them.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

__all__ = [
    "AugController",
    "apply_points",
    "apply_images",
    "apply_flip",
    "pipeline_for_shape",
]


def _fire(batch: int, p: float, rng, device) -> torch.Tensor:
    return torch.rand(batch, generator=rng, device=device, dtype=torch.float64) < p


def apply_points(x: torch.Tensor, p_aug: float, rng) -> torch.Tensor:
    """Augment 2-D point batches: random 90-degree rotation + coordinate jitter."""
    if not 0.0 <= p_aug <= 1.0:
        raise ValueError(f"p_aug must be in [0, 1], got {p_aug}")
    if p_aug == 0.0:
        return x
    b = x.shape[0]
    # rotation by k*90 degrees, k uniform in {1, 2, 3}
    fire = _fire(b, p_aug, rng, x.device)
    k = torch.randint(1, 4, (b,), generator=rng, device=x.device)
    theta = k.to(x.dtype) * (torch.pi / 2)
    cos, sin = torch.cos(theta), torch.sin(theta)
    rotated = torch.stack(
        [cos * x[:, 0] - sin * x[:, 1], sin * x[:, 0] + cos * x[:, 1]], dim=1
    )
    x = torch.where(fire[:, None], rotated, x)
    # small coordinate jitter
    fire = _fire(b, p_aug, rng, x.device)
    noise = torch.randn(x.shape, generator=rng, device=x.device, dtype=x.dtype) * 0.05
    return x + fire[:, None].to(x.dtype) * noise


def apply_images(x: torch.Tensor, p_aug: float, rng,
                 max_shift_frac: float = 0.125, cutout_frac: float = 0.25) -> torch.Tensor:
    """Augment image batches: horizontal flip, translation, cutout.

    Translation is by integer pixels up to ``max_shift_frac`` of the width
    with reflected padding; cutout zeroes a square via a multiplicative
    mask (differentiable in x).
    """
    if not 0.0 <= p_aug <= 1.0:
        raise ValueError(f"p_aug must be in [0, 1], got {p_aug}")
    if p_aug == 0.0:
        return x
    b, _, h, w = x.shape
    # horizontal flip
    fire = _fire(b, p_aug, rng, x.device)
    x = torch.where(fire[:, None, None, None], torch.flip(x, dims=[-1]), x)
    # integer translation with reflect padding
    fire = _fire(b, p_aug, rng, x.device)
    max_dx = max(1, int(round(w * max_shift_frac)))
    max_dy = max(1, int(round(h * max_shift_frac)))
    shifts_x = torch.randint(-max_dx, max_dx + 1, (b,), generator=rng)
    shifts_y = torch.randint(-max_dy, max_dy + 1, (b,), generator=rng)
    padded = torch.nn.functional.pad(x, (max_dx, max_dx, max_dy, max_dy), mode="reflect")
    shifted = torch.stack(
        [
            padded[i, :, max_dy - sy : max_dy - sy + h, max_dx - sx : max_dx - sx + w]
            for i, (sx, sy) in enumerate(zip(shifts_x.tolist(), shifts_y.tolist()))
        ]
    )
    x = torch.where(fire[:, None, None, None], shifted, x)
    # cutout
    fire = _fire(b, p_aug, rng, x.device)
    size = max(1, int(round(min(h, w) * cutout_frac)))
    cy = torch.randint(0, h - size + 1, (b,), generator=rng)
    cx = torch.randint(0, w - size + 1, (b,), generator=rng)
    mask = torch.ones(b, 1, h, w, dtype=x.dtype, device=x.device)
    for i in range(b):
        if fire[i]:
            mask[i, :, cy[i] : cy[i] + size, cx[i] : cx[i] + size] = 0.0
    return x * mask


def apply_flip(x: torch.Tensor, p_aug: float, rng) -> torch.Tensor:
    """Flip-only image pipeline, useful for symmetry checks."""
    if not 0.0 <= p_aug <= 1.0:
        raise ValueError(f"p_aug must be in [0, 1], got {p_aug}")
    if p_aug == 0.0:
        return x
    fire = _fire(x.shape[0], p_aug, rng, x.device)
    return torch.where(fire[:, None, None, None], torch.flip(x, dims=[-1]), x)


def pipeline_for_shape(shape: tuple):
    """Pick the point or image pipeline from a data shape."""
    return apply_points if len(shape) == 1 else apply_images


@dataclass
class AugController:
    """Steers p_aug from the gradient-penalty EMA against threshold tau.

    Initialization: p_aug = 0 and l_gp_ema = tau, so the very first
    controller step moves p_aug upward (the indicator is >=).
    """

    tau: float = 0.55
    p_r: float = 0.05
    mu_p: float = 0.93
    update_interval: int = 16
    p_aug: float = 0.0
    l_gp_ema: float | None = None

    def __post_init__(self):
        if self.l_gp_ema is None:
            self.l_gp_ema = self.tau

    def step(self, l_gp_observed: float) -> float:
        """One controller update; call only on gradient-penalty steps.

        Order matters: p_aug moves first, using the current EMA against
        tau, and only then is the EMA refreshed with the new observation.
        """
        direction = 1.0 if self.l_gp_ema >= self.tau else -1.0
        self.p_aug = min(1.0, max(0.0, self.p_aug + direction * self.p_r))
        self.l_gp_ema = self.mu_p * self.l_gp_ema + (1.0 - self.mu_p) * l_gp_observed
        return self.p_aug
