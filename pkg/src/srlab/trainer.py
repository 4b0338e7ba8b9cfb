"""MLP construction, the SGD training loop, evaluation metrics, and
checkpointing.

Training minimizes the batch-mean sharpened objective (loss plus the
scheduled lp penalty when sparse regularization is enabled) with SGD,
momentum, decoupled weight decay and optional cosine learning-rate
annealing. Runs are fully deterministic per (seeds, config): shuffling
uses a generator seeded with (run seed, epoch).
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .autodiff import DEGENERATE_NORM_EPS, Graph, as_matrix, backward, evaluate, forward
from .data import LabeledDataset
from .losses import LossSpec, SRConfig, attach_objective, lambda_at

CHECKPOINT_MAGIC = b"SRLM"
CHECKPOINT_VERSION = 1

# Fixed sparse-rate measurement protocol: normalized logits sharpened at
# tau=0.1; a row counts as sparse when its max probability exceeds 1-0.01.
SPARSE_RATE_TAU = 0.1
SPARSE_RATE_THRESHOLD = 1.0 - 0.01


class TrainingDiverged(RuntimeError):
    """Objective became non-finite; carries the epoch and batch index."""

    def __init__(self, epoch: int, batch: int, value: float):
        super().__init__(
            f"non-finite objective {value!r} at epoch {epoch}, batch {batch}"
        )
        self.epoch = epoch
        self.batch = batch


class CheckpointFormatError(ValueError):
    """Unreadable checkpoint: bad magic, unsupported version, truncation."""


@dataclass(frozen=True)
class MLPConfig:
    """Layer widths (input d, hidden ..., output k); relu activations."""

    layer_widths: tuple
    activation: str = "relu"
    seed: int = 0

    def __post_init__(self):
        widths = tuple(int(w) for w in self.layer_widths)
        if len(widths) < 2 or any(w < 1 for w in widths):
            raise ValueError(f"need at least (input, output) widths, got {widths}")
        if self.activation != "relu":
            raise ValueError(f"unsupported activation {self.activation!r}")
        object.__setattr__(self, "layer_widths", widths)


@dataclass(frozen=True)
class OptimizerConfig:
    lr0: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 1e-4
    epochs: int = 50
    batch_size: int = 128
    cosine_annealing: bool = True
    seed: int = 0

    def __post_init__(self):
        if not self.lr0 > 0.0:
            raise ValueError(f"lr0 must be positive, got {self.lr0}")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.weight_decay < 0.0:
            raise ValueError("weight_decay must be nonnegative")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")


@dataclass(frozen=True)
class EpochMetrics:
    epoch: int
    lam: float
    lr: float
    train_objective: float
    train_accuracy: float
    test_accuracy: float
    sparse_rate: float


@dataclass
class RunRecord:
    """Per-epoch metric rows plus the trained model and config snapshot."""

    rows: list
    model: "MLPModel"
    loss: LossSpec
    sr: SRConfig | None
    optimizer: OptimizerConfig

    @property
    def final_test_accuracy(self) -> float:
        return self.rows[-1].test_accuracy if self.rows else float("nan")

    @property
    def final_sparse_rate(self) -> float:
        return self.rows[-1].sparse_rate if self.rows else float("nan")


def _append_mlp(g: Graph, widths) -> int:
    h = g.input("x", widths[0])
    n_layers = len(widths) - 1
    for i in range(n_layers):
        w = g.param(f"w{i + 1}", widths[i], widths[i + 1])
        b = g.param(f"b{i + 1}", 1, widths[i + 1])
        h = g.affine(h, w, b, name=f"layer{i + 1}")
        if i < n_layers - 1:
            h = g.relu(h)
    return h


class MLPModel:
    """Fully-connected relu network over a shared parameter store."""

    def __init__(self, widths, params: dict):
        self.widths = tuple(int(w) for w in widths)
        self.params = params
        self.graph = Graph(params_store=params)
        _append_mlp(self.graph, self.widths)

    @property
    def k(self) -> int:
        return self.widths[-1]

    @property
    def d(self) -> int:
        return self.widths[0]

    def logits(self, features) -> np.ndarray:
        return evaluate(self.graph, as_matrix(features))

    def set_param(self, name: str, values) -> None:
        self.graph.set_param(name, values)


def init_mlp(cfg: MLPConfig) -> MLPModel:
    """Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)); biases zero."""
    rng = np.random.default_rng(cfg.seed)
    params: dict = {}
    widths = cfg.layer_widths
    model = MLPModel(widths, params)
    for i in range(len(widths) - 1):
        bound = 1.0 / math.sqrt(widths[i])
        model.set_param(f"w{i + 1}", rng.uniform(-bound, bound,
                                                 (widths[i], widths[i + 1])))
        model.set_param(f"b{i + 1}", np.zeros((1, widths[i + 1])))
    return model


def cosine_lr(t: int, total_epochs: int, lr0: float) -> float:
    """lr0 * 0.5 * (1 + cos(pi * t / T))."""
    if not 0 <= t < total_epochs:
        raise ValueError(f"epoch {t} out of range [0, {total_epochs})")
    return lr0 * 0.5 * (1.0 + math.cos(math.pi * t / total_epochs))


def predict_probs(model: MLPModel, features, sr: SRConfig | None = None) -> np.ndarray:
    """Simplex rows: sharpened (and optionally normalized) when SR is
    configured, plain softmax otherwise."""
    z = model.logits(features)
    if sr is not None:
        if sr.l2_normalize_logits:
            z, _ = K.l2norm_rows_fwd(z, DEGENERATE_NORM_EPS)
        return K.softmax_tau_fwd(np.ascontiguousarray(z), sr.tau)
    return K.softmax_tau_fwd(z, 1.0)


def sparse_rate(probs, threshold: float) -> float:
    """Fraction of rows whose maximum entry exceeds the threshold."""
    probs = np.asarray(probs, dtype=np.float64)
    if probs.size == 0:
        return 0.0
    return float((probs.max(axis=1) > threshold).mean())


def sparse_rate_protocol(model: MLPModel, features) -> float:
    """Measurement protocol, identical for every method: l2-normalized
    logits sharpened at tau=0.1; threshold 1-0.01 (so a sparse row is
    within sqrt(2)*0.01 of a one-hot vertex in l2 distance)."""
    z = model.logits(features)
    z, _ = K.l2norm_rows_fwd(z, DEGENERATE_NORM_EPS)
    probs = K.softmax_tau_fwd(z, SPARSE_RATE_TAU)
    return sparse_rate(probs, SPARSE_RATE_THRESHOLD)


def accuracy(model: MLPModel, ds: LabeledDataset) -> float:
    preds = model.logits(ds.features).argmax(axis=1)
    return float((preds == ds.labels).mean())


def train(model: MLPModel, train_ds: LabeledDataset, test_ds: LabeledDataset,
          spec: LossSpec, sr: SRConfig | None,
          opt: OptimizerConfig) -> RunRecord:
    """SGD with momentum, decoupled weight decay and cosine annealing.

    Per epoch: shuffle with a (run seed, epoch)-seeded generator, sweep
    mini-batches of the sharpened objective with lambda = lambda_at(epoch),
    then record metrics. Raises TrainingDiverged on a non-finite objective.
    """
    if train_ds.d != model.d or test_ds.d != model.d:
        raise ValueError(
            f"feature width mismatch: model expects {model.d}, "
            f"got train {train_ds.d} / test {test_ds.d}"
        )
    if train_ds.k != model.k or test_ds.k != model.k:
        raise ValueError("class count mismatch between datasets and model")

    obj_graph = Graph(params_store=model.params)
    logits_node = _append_mlp(obj_graph, model.widths)
    attach_objective(obj_graph, logits_node, spec, sr)

    velocity = {name: np.zeros(shape)
                for name, shape in obj_graph.param_shapes.items()}
    n = len(train_ds)
    rows = []
    for epoch in range(opt.epochs):
        lr = cosine_lr(epoch, opt.epochs, opt.lr0) if opt.cosine_annealing else opt.lr0
        lam = lambda_at(epoch, sr) if sr is not None else 0.0
        order = np.random.default_rng([opt.seed, epoch]).permutation(n)
        objective_sum = 0.0
        for batch_index, start in enumerate(range(0, n, opt.batch_size)):
            idx = order[start:start + opt.batch_size]
            inputs = {
                "x": np.ascontiguousarray(train_ds.features[idx]),
                "y": train_ds.labels[idx].astype(np.float64)[:, None],
            }
            if sr is not None:
                inputs["lam"] = np.array([[lam]])
            acts = forward(obj_graph, inputs)
            value = float(acts.output[0, 0])
            if not np.isfinite(value):
                raise TrainingDiverged(epoch, batch_index, value)
            objective_sum += value * idx.size
            grads = backward(obj_graph, acts)
            for name, grad in grads.items():
                g = grad + opt.weight_decay * model.params[name]
                velocity[name] = opt.momentum * velocity[name] + g
                updated = model.params[name] - lr * velocity[name]
                if not np.all(np.isfinite(updated)):
                    raise TrainingDiverged(epoch, batch_index, float("nan"))
                obj_graph.set_param(name, updated)
        rows.append(EpochMetrics(
            epoch=epoch,
            lam=lam,
            lr=lr,
            train_objective=objective_sum / n,
            train_accuracy=accuracy(model, train_ds),
            test_accuracy=accuracy(model, test_ds),
            sparse_rate=sparse_rate_protocol(model, train_ds.features),
        ))
    return RunRecord(rows=rows, model=model, loss=spec, sr=sr, optimizer=opt)


# -- checkpointing ---------------------------------------------------------


def checkpoint_save(model: MLPModel, path) -> None:
    """Self-describing binary: magic, version, layer count, then per layer
    the shape (u32 d_in, u32 d_out) and little-endian float64 W then b."""
    n_layers = len(model.widths) - 1
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", CHECKPOINT_VERSION, n_layers))
        for i in range(n_layers):
            w = model.params[f"w{i + 1}"]
            b = model.params[f"b{i + 1}"]
            fh.write(struct.pack("<II", w.shape[0], w.shape[1]))
            fh.write(w.astype("<f8").tobytes())
            fh.write(b.astype("<f8").tobytes())


def _read_checkpoint_exact(fh, count: int, what: str) -> bytes:
    data = fh.read(count)
    if len(data) != count:
        raise CheckpointFormatError(
            f"truncated checkpoint while reading {what}: expected {count} "
            f"bytes, got {len(data)}"
        )
    return data


def checkpoint_load(path) -> MLPModel:
    """Inverse of checkpoint_save; round-trips parameters bit-exactly."""
    with open(path, "rb") as fh:
        magic = _read_checkpoint_exact(fh, 4, "magic")
        if magic != CHECKPOINT_MAGIC:
            raise CheckpointFormatError(
                f"bad magic {magic!r}, expected {CHECKPOINT_MAGIC!r}"
            )
        version, n_layers = struct.unpack(
            "<II", _read_checkpoint_exact(fh, 8, "header"))
        if version != CHECKPOINT_VERSION:
            raise CheckpointFormatError(
                f"unsupported checkpoint version {version}, "
                f"expected {CHECKPOINT_VERSION}"
            )
        widths = []
        layers = []
        for i in range(n_layers):
            d_in, d_out = struct.unpack(
                "<II", _read_checkpoint_exact(fh, 8, f"layer {i + 1} shape"))
            if widths and d_in != widths[-1]:
                raise CheckpointFormatError(
                    f"layer {i + 1} input width {d_in} does not chain "
                    f"with previous output {widths[-1]}"
                )
            w = np.frombuffer(
                _read_checkpoint_exact(fh, 8 * d_in * d_out, f"layer {i + 1} weights"),
                dtype="<f8").reshape(d_in, d_out)
            b = np.frombuffer(
                _read_checkpoint_exact(fh, 8 * d_out, f"layer {i + 1} bias"),
                dtype="<f8").reshape(1, d_out)
            layers.append((w, b))
            if i == 0:
                widths.append(d_in)
            widths.append(d_out)
        trailing = fh.read(1)
        if trailing:
            raise CheckpointFormatError("trailing bytes after final layer")
    model = MLPModel(widths, {})
    for i, (w, b) in enumerate(layers):
        model.set_param(f"w{i + 1}", w)
        model.set_param(f"b{i + 1}", b)
    return model
