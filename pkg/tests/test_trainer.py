import math
import pickle

import pytest
import torch

from actlab import losses as L
from actlab.config import RunConfig
from actlab.networks import DTYPE
from actlab.schedules import adversarial_weight, build_grid, ema_decay, step_count
from actlab.trainer import (CHECKPOINT_VERSION, CheckpointError,
                            TrainingDiverged, build_state, dataset_from_config,
                            load_checkpoint, run_training, save_checkpoint,
                            train_step)


def toy_cfg(**overrides) -> RunConfig:
    base = dict(s1=10, learning_rate=1e-3, batch_size=16,
                training_iterations=200, dataset="gauss8", dataset_size=256,
                lambda_mode="constant", lambda_const=0.3, w_gp=1.0,
                widths=(16, 16), d_widths=(16, 16), seed=0, I_gp=4)
    base.update(overrides)
    return RunConfig(**base)


def fresh(cfg):
    ds = dataset_from_config(cfg)
    return build_state(cfg, ds.sample_shape), ds


class TestBuildState:
    def test_discriminator_omitted_for_pure_ct(self):
        state, _ = fresh(toy_cfg(lambda_const=0.0))
        assert state.disc is None and state.opt_d is None

    def test_discriminator_present_otherwise(self):
        state, _ = fresh(toy_cfg())
        assert state.disc is not None and state.opt_d is not None

    def test_online_equals_ema_at_start(self):
        state, _ = fresh(toy_cfg())
        for a, b in zip(state.model.net.parameters(),
                        state.model.ema_net.parameters()):
            assert torch.equal(a, b)

    def test_seed_determines_everything(self):
        a, ds = fresh(toy_cfg(seed=3))
        b, _ = fresh(toy_cfg(seed=3))
        ra = train_step(a, ds)
        rb = train_step(b, ds)
        assert ra == rb


class TestTrainStep:
    def test_report_invariants(self):
        state, ds = fresh(toy_cfg())
        rep = train_step(state, ds)
        assert rep.l_f == pytest.approx(
            (1 - rep.lambda_used) * rep.l_ct + rep.lambda_used * rep.l_g)
        assert rep.t_pair[0] < rep.t_pair[1]
        assert 1 <= rep.n_index

    def test_lambda_matches_schedule(self):
        cfg = toy_cfg(lambda_mode="schedule", w=0.6, w_mid=0.2)
        state, ds = fresh(cfg)
        sched = cfg.schedule_config()
        for _ in range(30):
            k = state.k
            N = step_count(min(k, cfg.training_iterations), sched)
            rep = train_step(state, ds)
            expect = adversarial_weight(min(rep.n_index + 1, N - 1), N, sched)
            assert rep.lambda_used == pytest.approx(expect, abs=1e-15)

    def test_gp_only_on_schedule(self):
        state, ds = fresh(toy_cfg(I_gp=4))
        for _ in range(12):
            train_step(state, ds)
        assert state.n_second_order_evals == 3  # steps 0, 4, 8

    def test_ema_moves_toward_online(self):
        state, ds = fresh(toy_cfg())
        for _ in range(5):
            train_step(state, ds)
        with torch.no_grad():
            gaps = [float((a - b).abs().sum()) for a, b in
                    zip(state.model.net.parameters(), state.model.ema_net.parameters())]
        assert sum(gaps) > 0

    def test_losses_finite_over_many_steps(self):
        state, ds = fresh(toy_cfg())
        reps = run_training(state, ds, 50)
        assert all(math.isfinite(r.l_f) and math.isfinite(r.l_d) for r in reps)

    def test_divergence_raises(self, tmp_path):
        state, ds = fresh(toy_cfg())
        with torch.no_grad():
            for p in state.model.net.parameters():
                p.fill_(float("nan"))
        with pytest.raises(TrainingDiverged):
            run_training(state, ds, 1, checkpoint_dir=tmp_path)
        assert list(tmp_path.glob("diverged-*.pkl"))


class TestAlgorithmReductions:
    def test_lambda_zero_bit_identical_to_pure_ct_reference(self):
        """A lambda=0 ACT run must follow the exact arithmetic of an
        independently written consistency-training loop on the same seeds."""
        cfg = toy_cfg(lambda_const=0.0)
        state, ds = fresh(cfg)
        sched = cfg.schedule_config()
        distance = L.DISTANCES[cfg.distance]

        ref_state, ref_ds = fresh(cfg)
        ref_model, rng = ref_state.model, ref_state.rng_g
        opt = ref_state.opt_g
        grids = {}

        for step in range(100):
            rep = train_step(state, ds)

            N = step_count(step, sched)
            if N not in grids:
                grids[N] = build_grid(N, sched)
            grid = grids[N]
            x0 = ref_ds.next_batch(cfg.batch_size, rng)
            n = int(torch.randint(1, N, (1,), generator=rng))
            z = torch.randn(x0.shape, generator=rng, dtype=DTYPE)
            t_hi, t_lo = float(grid.times[n]), float(grid.times[n - 1])
            online = ref_model.forward(x0 + t_hi * z, t_hi, which="online")
            l_ct = L.consistency_loss(ref_model, x0, z, t_hi, t_lo,
                                      distance=distance, online_out=online)
            loss = (1.0 - 0.0) * l_ct + 0.0 * torch.zeros(())
            opt.zero_grad(set_to_none=True)
            loss.backward()
            opt.step()
            ref_model.ema_update(ema_decay(N, sched))

            assert rep.l_ct == float(l_ct.detach())
            assert rep.l_g == 0.0 and rep.l_d == 0.0

        for a, b in zip(state.model.net.parameters(), ref_model.net.parameters()):
            assert torch.equal(a, b)
        for a, b in zip(state.model.ema_net.parameters(), ref_model.ema_net.parameters()):
            assert torch.equal(a, b)

    def test_lambda_one_never_builds_ct_gradient(self):
        state, ds = fresh(toy_cfg(lambda_const=1.0))
        for _ in range(100):
            train_step(state, ds)
        assert state.n_ct_grad_evals == 0

    def test_lambda_zero_discriminator_never_updates(self):
        state, ds = fresh(toy_cfg(lambda_const=0.0))
        for _ in range(20):
            rep = train_step(state, ds)
            assert rep.l_d == 0.0
        assert state.n_d_updates == 0


class TestAugmentedTraining:
    def test_controller_advances_only_on_gp_steps(self):
        state, ds = fresh(toy_cfg(aug=True, I_gp=4))
        seen = []
        for _ in range(9):
            train_step(state, ds)
            seen.append(state.aug.p_aug)
        # updates at k = 0, 4, 8: three distinct controller moves
        assert seen[0] == pytest.approx(0.05)
        assert seen[3] == seen[0]
        assert seen[4] in (0.0, pytest.approx(0.1))

    def test_p_aug_flows_into_report(self):
        state, ds = fresh(toy_cfg(aug=True, I_gp=1))
        train_step(state, ds)  # controller moves p_aug to 0.05
        rep = train_step(state, ds)
        assert rep.p_aug == pytest.approx(0.05)


class TestCheckpoints:
    def test_round_trip_next_step_identical(self, tmp_path):
        state, ds = fresh(toy_cfg())
        for _ in range(10):
            train_step(state, ds)
        path = tmp_path / "ckpt.pkl"
        save_checkpoint(state, path)
        restored = load_checkpoint(path)
        a = train_step(state, ds)
        b = train_step(restored, ds)
        assert a == b

    def test_save_load_save_byte_identical(self, tmp_path):
        state, ds = fresh(toy_cfg(aug=True))
        for _ in range(5):
            train_step(state, ds)
        p1, p2 = tmp_path / "a.pkl", tmp_path / "b.pkl"
        save_checkpoint(state, p1)
        save_checkpoint(load_checkpoint(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_controller_state_round_trip(self, tmp_path):
        state, ds = fresh(toy_cfg(aug=True))
        state.aug.p_aug = 0.35
        state.aug.l_gp_ema = 0.61
        path = tmp_path / "c.pkl"
        save_checkpoint(state, path)
        restored = load_checkpoint(path)
        assert restored.aug.p_aug == 0.35
        assert restored.aug.l_gp_ema == 0.61

    def test_version_mismatch_rejected(self, tmp_path):
        state, _ = fresh(toy_cfg())
        path = tmp_path / "v.pkl"
        save_checkpoint(state, path)
        payload = pickle.loads(path.read_bytes())
        payload["version"] = "someone-elses-format"
        path.write_bytes(pickle.dumps(payload))
        with pytest.raises(CheckpointError, match="someone-elses-format"):
            load_checkpoint(path)

    def test_corrupt_file_rejected(self, tmp_path):
        path = tmp_path / "junk.pkl"
        path.write_bytes(b"not a pickle")
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_backbone_mismatch_rejected(self, tmp_path):
        state, _ = fresh(toy_cfg())
        path = tmp_path / "m.pkl"
        save_checkpoint(state, path)
        with pytest.raises(CheckpointError, match="spec mismatch"):
            load_checkpoint(path, expect_cfg=toy_cfg(widths=(8, 8)))

    def test_resume_matches_straight_run(self, tmp_path):
        cfg = toy_cfg()
        straight, ds = fresh(cfg)
        curve_straight = [train_step(straight, ds).l_f for _ in range(200)]

        split, _ = fresh(cfg)
        curve_a = [train_step(split, ds).l_f for _ in range(100)]
        path = tmp_path / "mid.pkl"
        save_checkpoint(split, path)
        resumed = load_checkpoint(path)
        curve_b = [train_step(resumed, ds).l_f for _ in range(100)]
        assert curve_a + curve_b == curve_straight


class TestRunTraining:
    def test_csv_stream(self, tmp_path):
        state, ds = fresh(toy_cfg())
        csv = tmp_path / "losses.csv"
        run_training(state, ds, 5, csv_path=csv)
        lines = csv.read_text().strip().splitlines()
        assert lines[0] == L.LossReport.CSV_HEADER
        assert len(lines) == 6

    def test_periodic_checkpoints(self, tmp_path):
        state, ds = fresh(toy_cfg(checkpoint_every=3))
        run_training(state, ds, 7, checkpoint_dir=tmp_path)
        assert len(list(tmp_path.glob("ckpt-*.pkl"))) == 2
