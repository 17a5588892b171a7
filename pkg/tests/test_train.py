import math
import struct

import numpy as np
import pytest

from convrank import autodiff as ad
from convrank.model import DropoutConfig, LegConfig, LegParameters, SiameseRanker
from convrank.train import (
    AdamState,
    CheckpointError,
    ConfigurationError,
    TrainConfig,
    adam_step,
    load_checkpoint,
    new_model,
    read_tensors,
    save_checkpoint,
    siamese_loss,
    train,
    write_loss_log,
)
from oracles import adam_reference
from synth import keyword_pairs, make_table


def small_model(seed=0, hidden=6, heads=2):
    return new_model(make_table(dim=8), seed, hidden=hidden, heads=heads)


class TestConfig:
    def test_defaults(self):
        c = TrainConfig()
        assert (c.epochs, c.learning_rate, c.clip_norm, c.dropout_rate) == (10, 0.001, 1.0, 0.15)
        assert c.batch_size == 32

    def test_rejects_bad_dropout(self):
        with pytest.raises(ConfigurationError):
            TrainConfig(dropout_rate=1.0)


class TestAdam:
    def test_zero_gradient_no_change(self):
        theta = {"w": np.array([0.3, -0.2])}
        out, _ = adam_step(theta, {"w": np.zeros(2)}, AdamState(), 0.001)
        np.testing.assert_array_equal(out["w"], theta["w"])

    def test_first_step(self):
        out, state = adam_step({"w": np.array([0.0])}, {"w": np.array([1.0])}, AdamState(), 0.001)
        assert out["w"][0] == pytest.approx(-0.001 / (1 + 1e-8), abs=1e-15)
        assert state.t == 1

    def test_matches_reference_recurrence(self):
        grads = [0.7, 0.7]
        theta = {"w": np.array([0.25])}
        state = AdamState()
        for g in grads:
            theta, state = adam_step(theta, {"w": np.array([g])}, state, 0.001)
        assert abs(theta["w"][0] - adam_reference(0.25, grads, 0.001)) <= 1e-9

    def test_varying_gradients(self):
        grads = [0.5, -1.5, 2.0, 0.01]
        theta, state = {"w": np.array([1.0])}, AdamState()
        for g in grads:
            theta, state = adam_step(theta, {"w": np.array([g])}, state, 0.01)
        assert abs(theta["w"][0] - adam_reference(1.0, grads, 0.01)) <= 1e-12


class TestSiameseLoss:
    def test_equal_outputs_ln2(self):
        model = small_model()
        loss = siamese_loss("w1 w2", "w1 w2", "B", model)
        assert loss.value[0] == pytest.approx(math.log(2), abs=1e-6)

    def test_swap_symmetry(self):
        model = small_model(seed=3)
        a, b = "court w1 w2", "w5 w6 w7 w8"
        l1 = siamese_loss(a, b, "A", model).value[0]
        l2 = siamese_loss(b, a, "B", model).value[0]
        assert l1 == pytest.approx(l2, abs=1e-7)

    def test_constant_c_gives_ln2(self):
        config = LegConfig(dim=8, hidden=2, heads=1)
        params = LegParameters.initialize(config, np.random.default_rng(0))
        params["out.W"].value[:, 0] = 0
        model = SiameseRanker(make_table(), params)
        assert siamese_loss("w1", "w2", "A", model).value[0] == pytest.approx(math.log(2))

    def test_large_margin_limit(self):
        model = small_model(seed=6)
        a, b = "court court w1", "w7 w8 w9"
        winner = "A" if model.leg_forward(a).C > model.leg_forward(b).C else "B"
        base = model.params["out.W"].value.copy()
        losses = []
        for s in (1.0, 1e2, 1e4, 1e6):
            model.params["out.W"].value = base * np.float32(s)
            losses.append(float(siamese_loss(a, b, winner, model).value[0]))
        assert losses == sorted(losses, reverse=True)
        assert losses[-1] < 1e-3

    def test_bad_winner(self):
        with pytest.raises(ValueError):
            siamese_loss("w1", "w2", "C", small_model())


class TestTraining:
    def test_empty_set_rejected(self):
        with pytest.raises(ConfigurationError):
            train([], TrainConfig(), small_model())

    def test_loss_decreases_on_separable_task(self):
        data = keyword_pairs(80, seed=11)
        model = small_model(seed=2)
        result = train(data, TrainConfig(epochs=3, batch_size=8, learning_rate=0.01, seed=2), model)
        losses = [e.mean_loss for e in result.log]
        assert losses[0] > losses[1] > losses[2]

    def test_clip_bound_each_step(self):
        norms = []
        model = small_model(seed=3)
        train(keyword_pairs(24, seed=3), TrainConfig(epochs=2, batch_size=4, clip_norm=0.05, seed=3), model,
              on_step=lambda g: norms.append(ad.global_norm(list(g.values()))))
        assert len(norms) == 12
        assert max(norms) <= 0.05 + 1e-6

    def test_weight_sharing_single_parameter_set(self):
        model = small_model()
        loss = siamese_loss("court w1", "w2 w3", "A", model)
        leaves = set()
        stack = [loss]
        seen = set()
        while stack:
            n = stack.pop()
            if id(n) in seen:
                continue
            seen.add(id(n))
            if n.requires_grad and not n.parents:
                leaves.add(id(n))
            stack.extend(n.parents)
        assert leaves == {id(node) for node in model.params.nodes.values()}

    def test_dropout_changes_training_forward_only(self):
        model = small_model()
        cfg = DropoutConfig(0.5, np.random.Generator(np.random.Philox(0)), True)
        trained = model.logits("court w1 w2 w3", cfg).value
        plain = model.logits("court w1 w2 w3").value
        assert not np.array_equal(trained, plain)
        assert np.array_equal(plain, model.logits("court w1 w2 w3").value)


class TestCheckpoint:
    def test_round_trip_bit_exact(self, tmp_path):
        model = small_model(seed=4)
        path = tmp_path / "m.evck"
        save_checkpoint(model, path, TrainConfig())
        back = load_checkpoint(path, model.table)
        for name, arr in model.params.arrays().items():
            assert back.params[name].value.tobytes() == arr.tobytes()
        assert back.config == model.config

    def test_layout(self, tmp_path):
        path = tmp_path / "m.evck"
        save_checkpoint(small_model(), path)
        data = path.read_bytes()
        assert data[:4] == b"EVCK"
        version, count = struct.unpack_from("<II", data, 4)
        assert version == 1
        assert count == len(read_tensors(path))

    def test_wrong_magic(self, tmp_path):
        path = tmp_path / "m.evck"
        save_checkpoint(small_model(), path)
        data = bytearray(path.read_bytes())
        data[:4] = b"XXXX"
        path.write_bytes(bytes(data))
        with pytest.raises(CheckpointError, match="magic"):
            load_checkpoint(path, make_table(dim=8))

    def test_version_mismatch(self, tmp_path):
        path = tmp_path / "m.evck"
        save_checkpoint(small_model(), path)
        data = bytearray(path.read_bytes())
        data[4:8] = struct.pack("<I", 99)
        path.write_bytes(bytes(data))
        with pytest.raises(CheckpointError, match="version"):
            load_checkpoint(path, make_table(dim=8))

    @pytest.mark.parametrize("cut", [1, 9, 200])
    def test_truncated(self, tmp_path, cut):
        path = tmp_path / "m.evck"
        save_checkpoint(small_model(), path)
        path.write_bytes(path.read_bytes()[:-cut])
        with pytest.raises(CheckpointError):
            load_checkpoint(path, make_table(dim=8))

    def test_flipped_payload_byte(self, tmp_path):
        path = tmp_path / "m.evck"
        save_checkpoint(small_model(), path)
        data = bytearray(path.read_bytes())
        data[len(data) // 2] ^= 0xFF
        path.write_bytes(bytes(data))
        with pytest.raises(CheckpointError, match="checksum"):
            load_checkpoint(path, make_table(dim=8))

    def test_mismatched_config_names_tensor(self, tmp_path):
        path = tmp_path / "m.evck"
        save_checkpoint(small_model(hidden=6, heads=2), path)
        with pytest.raises(ad.DimensionError, match=r"'fwd\.W_i'"):
            load_checkpoint(path, make_table(dim=8), LegConfig(dim=8, hidden=128, heads=100))

    def test_loss_log_format(self, tmp_path):
        model = small_model()
        result = train(keyword_pairs(8, seed=0), TrainConfig(epochs=2, batch_size=4), model)
        write_loss_log(result.log, tmp_path / "log.tsv")
        lines = (tmp_path / "log.tsv").read_text().splitlines()
        assert lines[0] == "epoch\tmean_loss\ttrain_accuracy"
        assert [ln.split("\t")[0] for ln in lines[1:]] == ["1", "2"]
