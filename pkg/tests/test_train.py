"""Training harness: split, SGD protocol, history, determinism, resume."""

import json

import numpy as np
import pytest

import realbogus.train as training
from realbogus.errors import ConfigurationError, DataError
from realbogus.nn.network import build_nodia_architecture


def quick_config(**kw):
    base = dict(epochs=2, learning_rate=0.01, batch_size=16, seed=0,
                dtype="float32")
    base.update(kw)
    return training.TrainConfig(**base)


class TestTrainConfig:
    def test_defaults_match_protocol(self):
        cfg = training.TrainConfig()
        assert cfg.learning_rate == 0.01
        assert cfg.batch_size == 128
        assert training.DEFAULT_EPOCHS == {"dia": 400, "nodia": 700}

    def test_validation(self):
        with pytest.raises(ConfigurationError):
            training.TrainConfig(epochs=0)
        with pytest.raises(ConfigurationError):
            training.TrainConfig(learning_rate=-0.1)
        with pytest.raises(ConfigurationError):
            training.TrainConfig(batch_size=0)


class TestSplit:
    def test_80_20_stratified(self, small_triplets):
        train_set, val_set = training.split_dataset(small_triplets, 0.8, seed=0)
        assert len(train_set) == 48 and len(val_set) == 12
        train_labels = [c.label for c in train_set]
        assert train_labels.count(0) == 24 and train_labels.count(1) == 24

    def test_disjoint_and_complete(self, small_triplets):
        train_set, val_set = training.split_dataset(small_triplets, 0.8, seed=0)
        ids = {c.id for c in train_set} | {c.id for c in val_set}
        assert len(ids) == len(small_triplets)

    def test_deterministic(self, small_triplets):
        a = training.split_dataset(small_triplets, 0.8, seed=3)
        b = training.split_dataset(small_triplets, 0.8, seed=3)
        assert [c.id for c in a[0]] == [c.id for c in b[0]]

    def test_seed_changes_assignment(self, small_triplets):
        a, _ = training.split_dataset(small_triplets, 0.8, seed=3)
        b, _ = training.split_dataset(small_triplets, 0.8, seed=4)
        assert [c.id for c in a] != [c.id for c in b]

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            training.split_dataset([], 0.8, seed=0)

    def test_bad_fraction(self, small_triplets):
        with pytest.raises(ConfigurationError):
            training.split_dataset(small_triplets, 1.0, seed=0)


class TestTrain:
    def test_lr_zero_leaves_parameters(self, small_pairs):
        net = build_nodia_architecture(seed=0)
        before = [p.copy() for p in net.parameters()]
        train_set, val_set = training.split_dataset(small_pairs, 0.8, seed=0)
        cfg = quick_config(epochs=1, learning_rate=0.0, dtype="float64")
        training.train(net, train_set, val_set, cfg)
        for a, b in zip(before, net.parameters()):
            np.testing.assert_array_equal(a, b)

    def test_history_structure(self, small_pairs):
        net = build_nodia_architecture(seed=0)
        train_set, val_set = training.split_dataset(small_pairs, 0.8, seed=0)
        net, history = training.train(net, train_set, val_set, quick_config(epochs=3))
        assert [r.epoch for r in history] == [1, 2, 3]
        for r in history:
            assert np.isfinite([r.train_loss, r.train_acc,
                                r.val_loss, r.val_acc]).all()
            assert 0.0 <= r.train_acc <= 1.0

    def test_width_mismatch_rejected(self, small_triplets):
        net = build_nodia_architecture(seed=0)
        train_set, val_set = training.split_dataset(small_triplets, 0.8, seed=0)
        with pytest.raises(ConfigurationError):
            training.train(net, train_set, val_set, quick_config())

    def test_bitwise_determinism(self, small_pairs):
        train_set, val_set = training.split_dataset(small_pairs, 0.8, seed=1)
        results = []
        for _ in range(2):
            net = build_nodia_architecture(seed=1)
            net, history = training.train(net, train_set, val_set,
                                          quick_config(seed=1))
            results.append(([p.copy() for p in net.parameters()],
                            [(r.train_loss, r.val_loss) for r in history]))
        for a, b in zip(results[0][0], results[1][0]):
            np.testing.assert_array_equal(a, b)
        assert results[0][1] == results[1][1]

    def test_resume_matches_uninterrupted(self, small_pairs):
        train_set, val_set = training.split_dataset(small_pairs, 0.8, seed=2)
        straight = build_nodia_architecture(seed=2)
        straight, hist4 = training.train(straight, train_set, val_set,
                                         quick_config(epochs=4, seed=2))
        resumed = build_nodia_architecture(seed=2)
        resumed, hist2 = training.train(resumed, train_set, val_set,
                                        quick_config(epochs=2, seed=2))
        resumed, hist_r = training.train(resumed, train_set, val_set,
                                         quick_config(epochs=4, seed=2),
                                         start_epoch=3, history=hist2)
        for a, b in zip(straight.parameters(), resumed.parameters()):
            np.testing.assert_array_equal(a, b)
        assert [r.epoch for r in hist_r] == [1, 2, 3, 4]
        assert hist_r[-1].train_loss == hist4[-1].train_loss

    def test_overfit_small_set(self, small_pairs):
        # 32-sample overfit oracle: training accuracy reaches 1.0
        subset = small_pairs[:32]
        net = build_nodia_architecture(seed=0)
        net, history = training.train(
            net, subset, subset,
            quick_config(epochs=60, learning_rate=0.05, batch_size=32))
        accs = [r.val_acc for r in history]
        assert max(accs) == 1.0

    def test_checkpoints_written(self, small_pairs, tmp_path):
        net = build_nodia_architecture(seed=0)
        train_set, val_set = training.split_dataset(small_pairs, 0.8, seed=0)
        cfg = quick_config(epochs=4, checkpoint_interval=2,
                           checkpoint_dir=str(tmp_path))
        training.train(net, train_set, val_set, cfg)
        assert (tmp_path / "checkpoint-epoch00002.rbnn").exists()
        assert (tmp_path / "checkpoint-epoch00004.rbnn").exists()
        assert (tmp_path / "history.jsonl").exists()


class TestEvaluate:
    def test_scores_are_p_real(self, small_pairs):
        net = build_nodia_architecture(seed=0)
        acc, loss, scores, preds, labels = training.evaluate(net.eval_mode(),
                                                             small_pairs)
        assert scores.shape == (60,)
        assert ((scores >= 0) & (scores <= 1)).all()
        # argmax consistency: score > 0.5 iff predicted real (label 0)
        np.testing.assert_array_equal(preds == 0, scores > 0.5)
        assert acc == pytest.approx((preds == labels).mean())

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            training.evaluate(build_nodia_architecture(), [])


class TestHistoryIo:
    def test_roundtrip(self, tmp_path):
        history = [training.EpochRecord(1, 0.6, 0.5, 0.7, 0.4),
                   training.EpochRecord(2, 0.5, 0.6, 0.6, 0.6)]
        path = tmp_path / "history.jsonl"
        training.write_history(history, path)
        lines = path.read_text().splitlines()
        assert len(lines) == 2
        assert json.loads(lines[0])["epoch"] == 1
        assert training.read_history(path) == history

    def test_bad_record_rejected(self, tmp_path):
        path = tmp_path / "history.jsonl"
        path.write_text('{"epoch": 1}\n')
        with pytest.raises(DataError):
            training.read_history(path)
