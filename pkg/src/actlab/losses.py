"""Training objectives: consistency loss, adversarial losses, gradient penalty.

All log-probabilities are computed from logits in stable form; the
consistency target branch never carries gradients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch

from .discriminator import Discriminator, log_one_minus_sigmoid, log_sigmoid

__all__ = [
    "LossReport",
    "squared_l2",
    "pseudo_huber",
    "consistency_loss",
    "generator_adv_loss",
    "discriminator_loss",
    "gradient_penalty",
    "combine",
]


@dataclass
class LossReport:
    """One training step's loss values.

    ``l_f`` is exactly (1 - lambda) * l_ct + lambda * l_g, and ``l_d`` is
    the lambda-scaled discriminator total lambda * (L_D + L_gp).
    """

    l_ct: float
    l_g: float
    l_f: float
    l_d: float
    l_gp: float
    lambda_used: float
    n_index: int
    t_pair: tuple
    p_aug: float = 0.0

    CSV_HEADER = "k,n,t_hi,l_ct,l_g,l_f,l_d,l_gp,lambda,p_aug"

    def csv_row(self, k: int) -> str:
        return (
            f"{k},{self.n_index},{self.t_pair[1]!r},{self.l_ct!r},{self.l_g!r},"
            f"{self.l_f!r},{self.l_d!r},{self.l_gp!r},{self.lambda_used!r},{self.p_aug!r}"
        )


def _flat(x: torch.Tensor) -> torch.Tensor:
    return x.reshape(x.shape[0], -1)


def squared_l2(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Per-sample squared L2 distance."""
    return _flat(a - b).pow(2).sum(dim=1)


def pseudo_huber(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Per-sample sqrt(||a-b||^2 + c^2) - c with c = 0.03 * sqrt(dim)."""
    diff = _flat(a - b)
    c = 0.03 * math.sqrt(diff.shape[1])
    return torch.sqrt(diff.pow(2).sum(dim=1) + c * c) - c


DISTANCES = {"squared_l2": squared_l2, "pseudo_huber": pseudo_huber}


def consistency_loss(model, x0: torch.Tensor, z: torch.Tensor,
                     t_hi: float, t_lo: float, distance=squared_l2,
                     online_out: torch.Tensor | None = None) -> torch.Tensor:
    """Batch-mean d(f(x0 + t_hi z, t_hi; online), f(x0 + t_lo z, t_lo; EMA)).

    The EMA branch is evaluated under no_grad; pass ``online_out`` to reuse
    an already-computed online forward (the trainer shares it with the
    adversarial loss).
    """
    if not t_lo < t_hi:
        raise ValueError(f"need t_lo < t_hi, got {t_lo}, {t_hi}")
    if online_out is None:
        online_out = model.forward(x0 + t_hi * z, t_hi, which="online")
    with torch.no_grad():
        target = model.forward(x0 + t_lo * z, t_lo, which="ema")
    return distance(online_out, target).mean()


def generator_adv_loss(disc: Discriminator, fake: torch.Tensor, t_hi: float,
                       p_aug: float = 0.0, rng=None) -> torch.Tensor:
    """Batch-mean log(1 - D(fake, t_hi)); gradients flow into the generator
    through ``fake``."""
    if disc.aug_enabled and p_aug > 0.0:
        logit = disc.logit_augmented(fake, t_hi, p_aug, rng)
    else:
        logit = disc.logit(fake, t_hi)
    return log_one_minus_sigmoid(logit).mean()


def discriminator_loss(disc: Discriminator, x_real: torch.Tensor,
                       x_gen_detached: torch.Tensor, t_hi: float,
                       p_aug: float = 0.0, rng=None) -> torch.Tensor:
    """Batch-mean of -log D(x_real, t) - log(1 - D(x_gen, t))."""
    if x_gen_detached.requires_grad:
        raise ValueError("generated batch must be detached from the generator")
    if disc.aug_enabled and p_aug > 0.0:
        logit_real = disc.logit_augmented(x_real, t_hi, p_aug, rng)
        logit_fake = disc.logit_augmented(x_gen_detached, t_hi, p_aug, rng)
    else:
        logit_real = disc.logit(x_real, t_hi)
        logit_fake = disc.logit(x_gen_detached, t_hi)
    return (-log_sigmoid(logit_real) - log_one_minus_sigmoid(logit_fake)).mean()


def gradient_penalty(disc, x_real: torch.Tensor, t_hi: float, w_gp: float,
                     p_aug: float = 0.0, rng=None) -> torch.Tensor:
    """Zero-centered penalty w_gp * mean ||grad_x D(x, t)||^2 on real data.

    Differentiates the probability output (not the logit) w.r.t. the
    input, building a second-order graph for the discriminator update.
    ``disc`` may be any callable (x, t) -> probability; Discriminator
    instances are routed through their (optionally augmented) probability.
    """
    x = x_real.detach().requires_grad_(True)
    if isinstance(disc, Discriminator):
        if disc.aug_enabled and p_aug > 0.0:
            prob = disc.discriminate_augmented(x, t_hi, p_aug, rng)
        else:
            prob = disc.discriminate(x, t_hi)
    else:
        prob = disc(x, t_hi)
    (grad,) = torch.autograd.grad(prob.sum(), x, create_graph=True)
    return w_gp * _flat(grad).pow(2).sum(dim=1).mean()


def combine(l_ct, l_g, l_d, l_gp, lam: float):
    """Blend losses per the training algorithm.

    Returns (l_f, l_d_total) with l_f = (1-lam) l_ct + lam l_g and
    l_d_total = lam * l_d + lam * l_gp.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must be in [0, 1], got {lam}")
    l_f = (1.0 - lam) * l_ct + lam * l_g
    l_d_total = lam * l_d + lam * l_gp
    return l_f, l_d_total
