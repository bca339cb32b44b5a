import math

import pytest
import torch

from actlab.augmentation import apply_flip
from actlab.discriminator import (Discriminator, log_one_minus_sigmoid,
                                  log_sigmoid)
from actlab.networks import DTYPE
from conftest import mlp_spec, randomize_


class TestStableLogs:
    def test_log_sigmoid_matches_naive_in_safe_range(self):
        logits = torch.linspace(-20, 20, 41, dtype=DTYPE)
        naive = torch.log(torch.sigmoid(logits))
        assert torch.allclose(log_sigmoid(logits), naive, atol=1e-12)

    def test_log_one_minus_sigmoid_matches_naive_in_safe_range(self):
        logits = torch.linspace(-20, 20, 41, dtype=DTYPE)
        naive = torch.log(1 - torch.sigmoid(logits))
        assert torch.allclose(log_one_minus_sigmoid(logits), naive, atol=1e-12)

    def test_finite_at_extreme_logits(self):
        logits = torch.tensor([-500.0, 500.0], dtype=DTYPE)
        assert torch.isfinite(log_sigmoid(logits)).all()
        assert torch.isfinite(log_one_minus_sigmoid(logits)).all()

    def test_zero_logit_gives_log_half(self):
        z = torch.zeros(1, dtype=DTYPE)
        assert float(log_sigmoid(z)) == pytest.approx(math.log(0.5), abs=1e-12)


class TestVariants:
    def test_rejects_unknown_variant(self):
        with pytest.raises(ValueError):
            Discriminator(mlp_spec(), variant="spectral")

    def test_zero_head_probability_half(self):
        d = Discriminator(mlp_spec())
        d.trunk.zero_head_()
        x = torch.randn(10, 2, dtype=DTYPE)
        assert torch.allclose(d.discriminate(x, 1.0), torch.full((10,), 0.5, dtype=DTYPE))

    def test_time_cond_depends_on_time(self):
        d = Discriminator(mlp_spec())
        randomize_(d.trunk, seed=2)
        x = torch.randn(10, 2, dtype=DTYPE)
        assert not torch.allclose(d.logit(x, 0.1), d.logit(x, 50.0))

    def test_time_blind_ignores_time(self):
        d = Discriminator(mlp_spec(), variant="time_blind")
        randomize_(d.trunk, seed=2)
        x = torch.randn(10, 2, dtype=DTYPE)
        assert torch.equal(d.logit(x, 0.1), d.logit(x, 50.0))

    def test_conditional_requires_cond(self):
        d = Discriminator(mlp_spec(), variant="conditional")
        x = torch.randn(4, 2, dtype=DTYPE)
        with pytest.raises(ValueError):
            d.logit(x, 1.0)
        out = d.logit(x, 1.0, cond=torch.randn(4, 2, dtype=DTYPE))
        assert out.shape == (4,)

    def test_unconditional_rejects_cond(self):
        d = Discriminator(mlp_spec())
        x = torch.randn(4, 2, dtype=DTYPE)
        with pytest.raises(ValueError):
            d.logit(x, 1.0, cond=x)


class TestAugmentedPath:
    def _flip_disc(self):
        # treat the 2-vector as a (1, 1, 2) image so flip swaps coordinates
        spec = mlp_spec()
        d = Discriminator(spec, aug_enabled=True,
                          aug_pipeline=lambda x, p, rng: apply_flip(
                              x.reshape(-1, 1, 1, 2), p, rng).reshape(-1, 2))
        randomize_(d.trunk, seed=4)
        return d

    def test_p_aug_zero_is_identity(self):
        d = self._flip_disc()
        x = torch.randn(6, 2, dtype=DTYPE)
        rng = torch.Generator().manual_seed(0)
        assert torch.equal(d.discriminate_augmented(x, 1.0, 0.0, rng),
                           d.discriminate(x, 1.0))

    def test_p_aug_one_symmetric_input_unchanged(self):
        d = self._flip_disc()
        x = torch.full((6, 2), 0.7, dtype=DTYPE)  # symmetric under the swap
        rng = torch.Generator().manual_seed(0)
        assert torch.allclose(d.discriminate_augmented(x, 1.0, 1.0, rng),
                              d.discriminate(x, 1.0))

    def test_p_aug_one_asymmetric_input_equals_flipped(self):
        d = self._flip_disc()
        x = torch.tensor([[1.0, -3.0]], dtype=DTYPE)
        rng = torch.Generator().manual_seed(0)
        assert torch.allclose(d.discriminate_augmented(x, 1.0, 1.0, rng),
                              d.discriminate(x.flip(-1), 1.0))

    def test_missing_pipeline_raises(self):
        d = Discriminator(mlp_spec(), aug_enabled=True, aug_pipeline=None)
        x = torch.randn(2, 2, dtype=DTYPE)
        with pytest.raises(RuntimeError):
            d.logit_augmented(x, 1.0, 0.5, torch.Generator())


class TestStateArrays:
    def test_round_trip(self):
        d = Discriminator(mlp_spec())
        randomize_(d.trunk, seed=9)
        other = Discriminator(mlp_spec())
        other.load_arrays(d.state_arrays())
        x = torch.randn(5, 2, dtype=DTYPE)
        assert torch.equal(d.logit(x, 2.0), other.logit(x, 2.0))
