"""Shared fixtures and helpers for the test suite."""

import numpy as np
import pytest
import torch

from actlab.networks import DTYPE, BackboneSpec
from actlab.schedules import ScheduleConfig


def mlp_spec(widths=(32, 32), input_shape=(2,), **kw) -> BackboneSpec:
    return BackboneSpec(kind="mlp", widths=widths, input_shape=input_shape, **kw)


def randomize_(module: torch.nn.Module, seed: int = 0, scale: float = 0.5):
    """Overwrite all parameters with random values (defeats zero-init heads)."""
    g = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for p in module.parameters():
            p.copy_(scale * torch.randn(p.shape, generator=g, dtype=DTYPE))


@pytest.fixture
def sched() -> ScheduleConfig:
    return ScheduleConfig(epsilon=0.002, T=80.0, s0=2, s1=150, K=100,
                          mu0=0.9, w=0.3, w_mid=0.3, rho=7.0)


def fd_param_grad(loss_fn, params, picks, h=1e-6):
    """Central finite differences of loss_fn() along chosen parameter
    coordinates; picks is a list of (param_index, flat_index)."""
    out = []
    for pi, fi in picks:
        flat = params[pi].data.view(-1)
        orig = flat[fi].item()
        flat[fi] = orig + h
        up = float(loss_fn().detach())
        flat[fi] = orig - h
        dn = float(loss_fn().detach())
        flat[fi] = orig
        out.append((up - dn) / (2 * h))
    return np.array(out)


def autograd_param_grad(loss_fn, params, picks):
    loss = loss_fn()
    grads = torch.autograd.grad(loss, params, allow_unused=True)
    out = []
    for pi, fi in picks:
        g = grads[pi]
        out.append(0.0 if g is None else float(g.reshape(-1)[fi]))
    return np.array(out)
