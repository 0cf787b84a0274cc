"""Training protocol: split, epoch loop, history, checkpointing.

Single-threaded and bitwise-reproducible for a fixed seed: the epoch
shuffle, the dropout masks, and the parameter initialization all derive
from named PCG64 streams of the configured seed.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from realbogus import data_io
from realbogus.errors import ConfigurationError, DataError, NumericError
from realbogus.nn import ops
from realbogus.nn.network import predict

DEFAULT_EPOCHS = {"dia": 400, "nodia": 700}


@dataclass
class TrainConfig:
    epochs: int = 400
    learning_rate: float = 0.01
    batch_size: int = 128
    seed: int = 0
    shuffle: bool = True
    checkpoint_interval: int = 0       # 0 disables checkpoints
    checkpoint_dir: str = ""
    dtype: str = "float64"             # float32 trades accuracy for throughput

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigurationError(f"epochs must be >= 1, got {self.epochs}")
        if self.learning_rate < 0:
            raise ConfigurationError(f"learning rate must be >= 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch size must be >= 1, got {self.batch_size}")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float


History = list  # of EpochRecord


def split_dataset(sets, fraction=0.8, seed=0):
    """Deterministic stratified split into (train, validation)."""
    if not sets:
        raise DataError("cannot split an empty dataset")
    if not 0.0 < fraction < 1.0:
        raise ConfigurationError(f"fraction must be in (0, 1), got {fraction}")
    rng = np.random.default_rng([seed, 0x5911])
    order = rng.permutation(len(sets))
    # stratify: walk the shuffled order per class so proportions carry over
    by_class = {}
    for i in order:
        by_class.setdefault(_label_of(sets[i]), []).append(i)
    train_idx, val_idx = [], []
    for indices in by_class.values():
        cut = round(len(indices) * fraction)
        train_idx.extend(indices[:cut])
        val_idx.extend(indices[cut:])
    # re-shuffle so classes interleave within each part
    train_idx = [train_idx[i] for i in rng.permutation(len(train_idx))]
    val_idx = [val_idx[i] for i in rng.permutation(len(val_idx))]
    return [sets[i] for i in train_idx], [sets[i] for i in val_idx]


def _label_of(item):
    return item.label


def as_arrays(composites):
    """Stack CompositeImages into (X, y) network-ready arrays."""
    x = np.stack([c.as_input() for c in composites])
    y = np.array([c.label for c in composites], dtype=int)
    return x, y


def _epoch_pass(network, x, y, lr, batch_size, rng):
    """One shuffled training epoch.

    Returns (mean per-batch loss, running train accuracy). Accuracy is
    accumulated from the dropout-active minibatch forward passes, the
    same running metric the reference framework reports during fitting.
    """
    order = rng.permutation(len(x))
    losses = []
    n_correct = 0
    network.train_mode()
    for start in range(0, len(x), batch_size):
        idx = order[start:start + batch_size]
        probs = network.forward(x[idx], rng=rng)
        loss, grad_logits = ops.sparse_categorical_crossentropy(probs, y[idx])
        if not np.isfinite(loss):
            raise NumericError(f"non-finite training loss {loss}")
        n_correct += int((probs.argmax(axis=1) == y[idx]).sum())
        network.backward(grad_logits, need_input_grad=False)
        ops.sgd_step(network.parameters(), network.gradients(), lr)
        losses.append(loss)
    return float(np.mean(losses)), n_correct / len(x)


def evaluate(network, composites, batch_size=256):
    """Eval-mode accuracy plus per-example P(real) scores and predictions."""
    if len(composites) == 0:
        raise DataError("cannot evaluate an empty set")
    x, y = as_arrays(composites)
    network.eval_mode()
    scores = np.empty(len(x))
    preds = np.empty(len(x), dtype=int)
    losses = np.empty(len(x))
    for start in range(0, len(x), batch_size):
        probs = predict(network, x[start:start + batch_size])
        yb = y[start:start + batch_size]
        scores[start:start + batch_size] = probs[:, 0]   # P(real), label 0
        preds[start:start + batch_size] = probs.argmax(axis=1)
        picked = np.clip(probs[np.arange(len(yb)), yb], ops.LOSS_CLAMP, None)
        losses[start:start + batch_size] = -np.log(picked)
    accuracy = float((preds == y).mean())
    return accuracy, float(losses.mean()), scores, preds, y


def train(network, train_set, val_set, config, start_epoch=1, history=None):
    """Minibatch SGD per the configured protocol; returns (network, history).

    Each epoch draws from its own seeded rng stream, so resuming from a
    checkpoint at start_epoch > 1 replays exactly the epochs an
    uninterrupted run would have executed.
    """
    width = network.input_shape[1]
    for c in list(train_set) + list(val_set):
        if c.width != width:
            raise ConfigurationError(
                f"composite width {c.width} != network input width {width}")
    if start_epoch < 1:
        raise ConfigurationError(f"start_epoch must be >= 1, got {start_epoch}")
    network.astype(np.dtype(config.dtype))
    x, y = as_arrays(train_set)
    x = x.astype(network.dtype)
    history = list(history or [])
    for epoch in range(start_epoch, config.epochs + 1):
        rng = np.random.default_rng([config.seed, 0x7247, epoch])
        train_loss, train_acc = _epoch_pass(network, x, y, config.learning_rate,
                                            config.batch_size, rng)
        val_acc, val_loss, _, _, _ = evaluate(network, val_set)
        network.train_mode()
        history.append(EpochRecord(epoch, train_loss, train_acc, val_loss, val_acc))
        if config.checkpoint_interval and epoch % config.checkpoint_interval == 0:
            _write_checkpoint(network, history, config, epoch)
    network.eval_mode()
    return network, history


def _write_checkpoint(network, history, config, epoch):
    out = Path(config.checkpoint_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    data_io.save_model(network, out / f"checkpoint-epoch{epoch:05d}.rbnn")
    write_history(history, out / "history.jsonl")


def write_history(history, path):
    with open(path, "w") as fh:
        for rec in history:
            fh.write(json.dumps({
                "epoch": rec.epoch,
                "train_loss": rec.train_loss,
                "train_acc": rec.train_acc,
                "val_loss": rec.val_loss,
                "val_acc": rec.val_acc,
            }) + "\n")


def read_history(path):
    """Load a history.jsonl sidecar back into EpochRecords."""
    records = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
            records.append(EpochRecord(**raw))
        except (ValueError, TypeError) as exc:
            raise DataError(f"{path}:{lineno}: bad history record: {exc}")
    return records
