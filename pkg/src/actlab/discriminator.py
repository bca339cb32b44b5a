"""Time-conditioned real/fake classifier with three wiring variants.

Variants: ``time_cond`` D(x_t, t), ``time_blind`` D(x_t) (ablation), and
``conditional`` D(x_0, x_t, t) where the candidate x_0 is concatenated
with the conditioning x_t along the feature/channel axis.
"""

from __future__ import annotations

import dataclasses

import torch
import torch.nn.functional as F

from .networks import DTYPE, BackboneSpec, make_discriminator_trunk

__all__ = ["Discriminator", "log_sigmoid", "log_one_minus_sigmoid"]

VARIANTS = ("time_cond", "time_blind", "conditional")


def log_sigmoid(logit: torch.Tensor) -> torch.Tensor:
    """log D from the raw logit; stable for |logit| up to hundreds."""
    return -F.softplus(-logit)


def log_one_minus_sigmoid(logit: torch.Tensor) -> torch.Tensor:
    """log(1 - D) from the raw logit, never via log of the probability."""
    return -F.softplus(logit)


class Discriminator:
    """Wraps a trunk with variant handling and the augmentation hook."""

    def __init__(self, spec: BackboneSpec, variant: str = "time_cond",
                 aug_enabled: bool = False, aug_pipeline=None):
        if variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")
        if variant == "time_blind" and spec.use_time:
            spec = dataclasses.replace(spec, use_time=False)
        if variant == "conditional":
            cond = spec.input_shape[0]
            if spec.cond_channels != cond:
                spec = dataclasses.replace(spec, cond_channels=cond)
        elif spec.cond_channels:
            raise ValueError("cond_channels only valid for the conditional variant")
        self.spec = spec
        self.variant = variant
        self.aug_enabled = aug_enabled
        self.aug_pipeline = aug_pipeline
        self.trunk = make_discriminator_trunk(spec)

    def logit(self, x: torch.Tensor, t: float, cond: torch.Tensor | None = None) -> torch.Tensor:
        """Raw scalar logit per sample."""
        if self.variant == "conditional":
            if cond is None:
                raise ValueError("conditional variant requires the cond input")
            x = torch.cat([x, cond], dim=1)
        elif cond is not None:
            raise ValueError(f"variant {self.variant!r} takes no cond input")
        return self.trunk(x, t)

    def discriminate(self, x: torch.Tensor, t: float, cond: torch.Tensor | None = None) -> torch.Tensor:
        """Probability-that-real, the logistic of the logit."""
        return torch.sigmoid(self.logit(x, t, cond))

    def logit_augmented(self, x: torch.Tensor, t: float, p_aug: float, rng,
                        cond: torch.Tensor | None = None) -> torch.Tensor:
        """Logit of D(A(x, p_aug), t); identity pipeline at p_aug = 0."""
        if not 0.0 <= p_aug <= 1.0:
            raise ValueError(f"p_aug must be in [0, 1], got {p_aug}")
        if p_aug > 0.0:
            if self.aug_pipeline is None:
                raise RuntimeError("no augmentation pipeline configured")
            x = self.aug_pipeline(x, p_aug, rng)
        return self.logit(x, t, cond)

    def discriminate_augmented(self, x, t, p_aug, rng, cond=None):
        return torch.sigmoid(self.logit_augmented(x, t, p_aug, rng, cond))

    def parameters(self):
        return self.trunk.parameters()

    def state_arrays(self) -> dict:
        return {k: v.detach().numpy().copy() for k, v in self.trunk.state_dict().items()}

    def load_arrays(self, arrays: dict):
        self.trunk.load_state_dict(
            {k: torch.as_tensor(v, dtype=DTYPE) for k, v in arrays.items()}
        )
