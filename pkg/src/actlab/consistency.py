"""Boundary-respecting consistency model wrapper and its EMA twin.

The wrapper enforces f(x, epsilon) = x exactly for any backbone, via
skip/out/in coefficients that vanish appropriately at r = t - epsilon = 0.
"""

from __future__ import annotations

import copy
import math

import torch

from .networks import DTYPE, BackboneSpec, make_generator

__all__ = ["coefficients", "ConsistencyModel"]


def coefficients(t: float, epsilon: float) -> tuple[float, float, float]:
    """Skip/out/in coefficients at time t.

    With r = t - epsilon:
      c_skip = 0.5^2 / (r^2 + 0.5^2)
      c_out  = 0.5 r / sqrt(0.5^2 + r^2)
      c_in   = 1 / sqrt(r^2 + 0.5^2)
    """
    if t < epsilon:
        raise ValueError(f"t={t} below epsilon={epsilon}")
    r = t - epsilon
    denom = r * r + 0.25
    c_skip = 0.25 / denom
    c_out = 0.5 * r / math.sqrt(denom)
    c_in = 1.0 / math.sqrt(denom)
    return c_skip, c_out, c_in


class ConsistencyModel:
    """Generator backbone wrapped as f(x_t, t) = c_skip x_t + c_out F(c_in x_t, t).

    Holds the online parameters and an EMA copy; the EMA copy never
    receives gradients and is only mutated through :meth:`ema_update`.
    """

    def __init__(self, spec: BackboneSpec, epsilon: float = 0.002, T: float = 80.0):
        self.spec = spec
        self.epsilon = float(epsilon)
        self.T = float(T)
        self.net = make_generator(spec)
        self.ema_net = copy.deepcopy(self.net)
        for p in self.ema_net.parameters():
            p.requires_grad_(False)

    def forward(self, x_t: torch.Tensor, t: float, which: str = "online") -> torch.Tensor:
        """Evaluate f(x_t, t) with the online or EMA parameter set."""
        if not self.epsilon <= t <= self.T:
            raise ValueError(f"t={t} outside [{self.epsilon}, {self.T}]")
        if which == "online":
            net = self.net
        elif which == "ema":
            net = self.ema_net
        else:
            raise ValueError(f"which must be 'online' or 'ema', got {which!r}")
        c_skip, c_out, c_in = coefficients(t, self.epsilon)
        return c_skip * x_t + c_out * net(c_in * x_t, t)

    __call__ = forward

    @torch.no_grad()
    def ema_update(self, mu: float):
        """theta_ema <- mu * theta_ema + (1 - mu) * theta, elementwise."""
        if not 0.0 <= mu <= 1.0:
            raise ValueError(f"mu must be in [0, 1], got {mu}")
        for p_ema, p in zip(self.ema_net.parameters(), self.net.parameters()):
            if p_ema.shape != p.shape:
                raise RuntimeError("online/EMA parameter shape mismatch")
            p_ema.mul_(mu).add_(p, alpha=1.0 - mu)

    def sync_ema(self):
        """Initialize the EMA copy from the online parameters (step 0)."""
        self.ema_update(0.0)

    def state_arrays(self) -> dict:
        """Online and EMA parameters as numpy arrays, for checkpoints."""
        return {
            "online": {k: v.detach().numpy().copy() for k, v in self.net.state_dict().items()},
            "ema": {k: v.detach().numpy().copy() for k, v in self.ema_net.state_dict().items()},
        }

    def load_arrays(self, arrays: dict):
        self.net.load_state_dict(
            {k: torch.as_tensor(v, dtype=DTYPE) for k, v in arrays["online"].items()}
        )
        self.ema_net.load_state_dict(
            {k: torch.as_tensor(v, dtype=DTYPE) for k, v in arrays["ema"].items()}
        )
