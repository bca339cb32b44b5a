"""Dataset synthesis and ingestion with deterministic batching.

Toy 2-D distributions (8-Gaussian ring, checkerboard, swiss roll) plus a
flat folder of same-resolution 8-bit RGB PNGs normalized to [-1, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .networks import DTYPE

__all__ = ["DatasetSpec", "Dataset", "make_dataset", "gauss8_centers"]

KINDS = ("gauss8", "checkerboard", "swissroll", "image_folder")

GAUSS8_RADIUS = 2.0
GAUSS8_SIGMA = 0.02


@dataclass(frozen=True)
class DatasetSpec:
    kind: str
    size: int = 4096
    seed: int = 0
    sigma: float = GAUSS8_SIGMA  # gauss8 per-mode stddev
    path: str | None = None     # image_folder directory

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.size < 0:
            raise ValueError(f"size must be >= 0, got {self.size}")


def gauss8_centers() -> np.ndarray:
    """The 8 mode centers on a radius-2 ring."""
    angles = 2 * np.pi * np.arange(8) / 8
    return GAUSS8_RADIUS * np.stack([np.cos(angles), np.sin(angles)], axis=1)


def _make_gauss8(spec: DatasetSpec, rng: np.random.Generator) -> np.ndarray:
    centers = gauss8_centers()
    modes = np.arange(spec.size) % 8
    rng.shuffle(modes)
    return centers[modes] + spec.sigma * rng.standard_normal((spec.size, 2))


def _make_checkerboard(spec: DatasetSpec, rng: np.random.Generator) -> np.ndarray:
    x = rng.uniform(-4, 4, size=spec.size)
    y = rng.uniform(-2, 2, size=spec.size) + 2 * (np.floor(x) % 2) - 1
    # fold y back into the checker cells
    y = np.where(y > 2, y - 4, np.where(y < -2, y + 4, y))
    return np.stack([x, y], axis=1)


def _make_swissroll(spec: DatasetSpec, rng: np.random.Generator) -> np.ndarray:
    t = 1.5 * np.pi * (1 + 2 * rng.uniform(size=spec.size))
    pts = np.stack([t * np.cos(t), t * np.sin(t)], axis=1) / (4.5 * np.pi)
    return 2.0 * pts + 0.05 * rng.standard_normal((spec.size, 2))


def _load_image_folder(spec: DatasetSpec) -> np.ndarray:
    from PIL import Image

    if spec.path is None:
        raise ValueError("image_folder spec needs a path")
    folder = Path(spec.path)
    if not folder.is_dir():
        raise FileNotFoundError(f"image folder {folder} does not exist")
    files = sorted(folder.glob("*.png"))
    if not files:
        raise ValueError(f"no .png files in {folder}")
    arrays, shapes = [], {}
    for f in files:
        img = Image.open(f).convert("RGB")
        arr = np.asarray(img, dtype=np.float64)
        shapes.setdefault(arr.shape, []).append(f.name)
        arrays.append(arr.transpose(2, 0, 1))  # CHW
    if len(shapes) > 1:
        raise ValueError(f"mixed resolutions in {folder}: "
                         + "; ".join(f"{s}: {ns}" for s, ns in shapes.items()))
    return np.stack(arrays)


class Dataset:
    """Finite, indexable sample store with with-replacement batching."""

    def __init__(self, spec: DatasetSpec, data: torch.Tensor,
                 norm_scale: float = 1.0, norm_offset: float = 0.0):
        self.spec = spec
        self.data = data
        # normalized = raw / norm_scale + norm_offset
        self.norm_scale = norm_scale
        self.norm_offset = norm_offset

    def __len__(self):
        return self.data.shape[0]

    def __getitem__(self, idx):
        return self.data[idx]

    @property
    def sample_shape(self) -> tuple:
        return tuple(self.data.shape[1:])

    def next_batch(self, size: int, rng: torch.Generator) -> torch.Tensor:
        """I.i.d. with-replacement draw of ``size`` samples."""
        if size == 0:
            return self.data[:0]
        idx = torch.randint(len(self), (size,), generator=rng)
        return self.data[idx]

    def denormalize(self, x: torch.Tensor) -> torch.Tensor:
        return (x - self.norm_offset) * self.norm_scale


def make_dataset(spec: DatasetSpec) -> Dataset:
    """Instantiate a dataset; same seed, same sample order."""
    if spec.kind == "image_folder":
        raw = _load_image_folder(spec)
        data = torch.as_tensor(raw / 127.5 - 1.0, dtype=DTYPE)
        return Dataset(spec, data, norm_scale=127.5, norm_offset=-1.0)
    rng = np.random.default_rng(spec.seed)
    maker = {"gauss8": _make_gauss8, "checkerboard": _make_checkerboard,
             "swissroll": _make_swissroll}[spec.kind]
    return Dataset(spec, torch.as_tensor(maker(spec, rng), dtype=DTYPE))
