import numpy as np
import pytest
import torch
from PIL import Image

from actlab.data import Dataset, DatasetSpec, gauss8_centers, make_dataset


class TestGauss8:
    def test_degenerate_size8_is_exactly_the_centers(self):
        ds = make_dataset(DatasetSpec(kind="gauss8", size=8, sigma=0.0))
        got = np.sort(ds.data.numpy().round(12), axis=0)
        want = np.sort(gauss8_centers().round(12), axis=0)
        assert np.allclose(got, want, atol=1e-12)

    def test_centers_on_radius_two_ring(self):
        c = gauss8_centers()
        assert c.shape == (8, 2)
        assert np.allclose(np.linalg.norm(c, axis=1), 2.0)

    def test_empirical_mean_near_origin(self):
        # CLT: mixture mean is the origin; mixture std is ~2 per coordinate
        ds = make_dataset(DatasetSpec(kind="gauss8", size=100_000, seed=1))
        mean = ds.data.mean(dim=0).numpy()
        assert np.all(np.abs(mean) < 3 * 2.0 / np.sqrt(100_000) + 0.01)

    def test_same_seed_same_data(self):
        a = make_dataset(DatasetSpec(kind="gauss8", size=64, seed=5))
        b = make_dataset(DatasetSpec(kind="gauss8", size=64, seed=5))
        assert torch.equal(a.data, b.data)

    def test_modes_balanced(self):
        ds = make_dataset(DatasetSpec(kind="gauss8", size=800, seed=0))
        c = torch.as_tensor(gauss8_centers())
        nearest = torch.cdist(ds.data, c).argmin(dim=1)
        counts = torch.bincount(nearest, minlength=8)
        assert torch.all(counts == 100)


class TestOtherToys:
    def test_checkerboard_in_box(self):
        ds = make_dataset(DatasetSpec(kind="checkerboard", size=512))
        assert ds.data.shape == (512, 2)
        assert float(ds.data.abs().max()) <= 4.0 + 1e-9

    def test_swissroll_shape(self):
        ds = make_dataset(DatasetSpec(kind="swissroll", size=256))
        assert ds.data.shape == (256, 2)

    def test_rejects_unknown_kind(self):
        with pytest.raises(ValueError):
            DatasetSpec(kind="spiral")


class TestBatching:
    def test_zero_size_batch(self):
        ds = make_dataset(DatasetSpec(kind="gauss8", size=32))
        batch = ds.next_batch(0, torch.Generator())
        assert batch.shape == (0, 2)

    def test_fixed_rng_reproducible(self):
        ds = make_dataset(DatasetSpec(kind="gauss8", size=32))
        a = ds.next_batch(16, torch.Generator().manual_seed(7))
        b = ds.next_batch(16, torch.Generator().manual_seed(7))
        assert torch.equal(a, b)

    def test_with_replacement_draw(self):
        ds = make_dataset(DatasetSpec(kind="gauss8", size=4))
        batch = ds.next_batch(64, torch.Generator().manual_seed(0))
        assert batch.shape == (64, 2)


class TestImageFolder:
    def _write_pngs(self, folder, sizes):
        folder.mkdir(exist_ok=True)
        rng = np.random.default_rng(0)
        for i, (h, w) in enumerate(sizes):
            arr = rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8)
            Image.fromarray(arr).save(folder / f"img{i}.png")

    def test_load_and_normalize(self, tmp_path):
        self._write_pngs(tmp_path / "imgs", [(8, 8)] * 4)
        ds = make_dataset(DatasetSpec(kind="image_folder", path=str(tmp_path / "imgs")))
        assert ds.data.shape == (4, 3, 8, 8)
        assert float(ds.data.min()) >= -1.0 and float(ds.data.max()) <= 1.0
        batch = ds.next_batch(2, torch.Generator().manual_seed(0))
        assert batch.shape == (2, 3, 8, 8)

    def test_denormalize_round_trip(self, tmp_path):
        self._write_pngs(tmp_path / "imgs", [(8, 8)] * 2)
        ds = make_dataset(DatasetSpec(kind="image_folder", path=str(tmp_path / "imgs")))
        raw = ds.denormalize(ds.data)
        assert float(raw.min()) >= 0.0 and float(raw.max()) <= 255.0
        assert torch.allclose(raw.round(), raw, atol=1e-9)

    def test_mixed_resolutions_rejected_with_names(self, tmp_path):
        self._write_pngs(tmp_path / "imgs", [(8, 8), (8, 8), (16, 8)])
        with pytest.raises(ValueError, match="img2"):
            make_dataset(DatasetSpec(kind="image_folder", path=str(tmp_path / "imgs")))

    def test_missing_folder(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            make_dataset(DatasetSpec(kind="image_folder", path=str(tmp_path / "nope")))

    def test_empty_folder(self, tmp_path):
        (tmp_path / "imgs").mkdir()
        with pytest.raises(ValueError):
            make_dataset(DatasetSpec(kind="image_folder", path=str(tmp_path / "imgs")))
