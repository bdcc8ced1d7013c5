"""Incremental classifiers: a small MLP trained with Adam, plus helpers.

Everything runs on float64 numpy so analytic gradients can be validated
against central finite differences.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .memory import EmptyMemoryError, LabeledInstance, find_nearest
from .replay import oversample_balance, sample_replay

CHECKPOINT_MAGIC = b"RSBM"
CHECKPOINT_VERSION = 1


class TrainingDivergedError(RuntimeError):
    pass


@dataclass
class ClassifierSpec:
    input_dim: int
    hidden_sizes: tuple = (128, 64, 32)
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    epochs_per_batch: int = 10
    minibatch_size: int = 32

    def __post_init__(self):
        if self.input_dim <= 0:
            raise ValueError("input_dim must be positive")
        self.hidden_sizes = tuple(int(h) for h in self.hidden_sizes)
        if any(h <= 0 for h in self.hidden_sizes):
            raise ValueError("hidden sizes must be positive")
        if self.epochs_per_batch <= 0 or self.minibatch_size <= 0:
            raise ValueError("epochs_per_batch and minibatch_size must be positive")


@dataclass
class TrainRecord:
    batch_index: int
    epoch_losses: list = field(default_factory=list)
    instances_consumed: int = 0
    replay_consumed: int = 0


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _relu(z):
    return np.maximum(z, 0.0)


class MlpClassifier:
    """Fully connected ReLU net with a 2-way softmax head, trained by Adam."""

    def __init__(self, spec: ClassifierSpec, rng: np.random.Generator | None = None):
        self.spec = spec
        rng = rng if rng is not None else np.random.default_rng(0)
        dims = [spec.input_dim, *spec.hidden_sizes, 2]
        self.dims = dims
        self.W = [rng.normal(0.0, np.sqrt(2.0 / dims[i]), size=(dims[i], dims[i + 1]))
                  for i in range(len(dims) - 1)]
        self.b = [np.zeros(dims[i + 1]) for i in range(len(dims) - 1)]
        self._m = [np.zeros_like(p) for p in self.W + self.b]
        self._v = [np.zeros_like(p) for p in self.W + self.b]
        self._t = 0

    def _forward(self, X):
        acts = [X]
        for i, (W, b) in enumerate(zip(self.W, self.b)):
            z = acts[-1] @ W + b
            acts.append(_relu(z) if i < len(self.W) - 1 else z)
        return acts

    def predict_proba(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.spec.input_dim:
            raise ValueError(f"expected input dim {self.spec.input_dim}, got {X.shape[1]}")
        return _softmax(self._forward(X)[-1])

    def predict_labels(self, X) -> np.ndarray:
        return self.predict_proba(X).argmax(axis=1)

    def predict(self, x) -> tuple[int, tuple[float, float]]:
        p = self.predict_proba(np.asarray(x, dtype=np.float64).reshape(1, -1))[0]
        return int(p.argmax()), (float(p[0]), float(p[1]))

    def loss_and_grads(self, X, y):
        """Mean cross-entropy and analytic gradients, ordered as W then b."""
        n = X.shape[0]
        acts = self._forward(X)
        probs = _softmax(acts[-1])
        eps = 1e-12
        loss = float(-np.log(probs[np.arange(n), y] + eps).mean())
        delta = probs.copy()
        delta[np.arange(n), y] -= 1.0
        delta /= n
        gW = [None] * len(self.W)
        gb = [None] * len(self.b)
        for i in range(len(self.W) - 1, -1, -1):
            gW[i] = acts[i].T @ delta
            gb[i] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ self.W[i].T) * (acts[i] > 0)
        return loss, gW + gb

    def adam_step(self, grads):
        self._t += 1
        s = self.spec
        params = self.W + self.b
        for k, (p, g) in enumerate(zip(params, grads)):
            self._m[k] = s.beta1 * self._m[k] + (1 - s.beta1) * g
            self._v[k] = s.beta2 * self._v[k] + (1 - s.beta2) * g * g
            m_hat = self._m[k] / (1 - s.beta1 ** self._t)
            v_hat = self._v[k] / (1 - s.beta2 ** self._t)
            p -= s.learning_rate * m_hat / (np.sqrt(v_hat) + s.eps)

    def train_minibatch(self, X, y) -> float:
        loss, grads = self.loss_and_grads(X, y)
        if not np.isfinite(loss):
            raise TrainingDivergedError(f"non-finite training loss: {loss}")
        self.adam_step(grads)
        return loss

    def n_params(self) -> int:
        return sum(p.size for p in self.W + self.b)


def _to_arrays(batch):
    X = np.stack([inst.features for inst in batch])
    y = np.array([inst.label for inst in batch], dtype=np.int64)
    return X, y


def fit_batch(model: MlpClassifier, batch, memory=None, replay_enabled=False,
              rng: np.random.Generator | None = None, batch_index: int = 0) -> TrainRecord:
    """Train on one stream batch, optionally augmented with replay.

    The memory absorbs every raw instance exactly once, before any
    gradient epoch runs.
    """
    if not batch:
        raise ValueError("batch must be non-empty")
    rng = rng if rng is not None else np.random.default_rng(0)
    if memory is not None:
        for inst in batch:
            memory.ingest(inst)
    X, y = _to_arrays(batch)
    spec = model.spec
    record = TrainRecord(batch_index, instances_consumed=len(batch))
    for _ in range(spec.epochs_per_batch):
        order = rng.permutation(len(batch))
        losses = []
        for start in range(0, len(batch), spec.minibatch_size):
            idx = order[start:start + spec.minibatch_size]
            bx, by = X[idx], y[idx]
            if replay_enabled and memory is not None:
                extra = oversample_balance(sample_replay(memory, rng), rng)
                if extra.instances:
                    ex, ey = _to_arrays(extra.instances)
                    bx = np.vstack([bx, ex])
                    by = np.concatenate([by, ey])
                    record.replay_consumed += len(extra)
            losses.append(model.train_minibatch(bx, by))
        record.epoch_losses.append(float(np.mean(losses)))
    return record


def fit_offline(spec: ClassifierSpec, instances, rng: np.random.Generator | None = None) -> MlpClassifier:
    """Train a fresh model from scratch on everything presented so far."""
    if not instances:
        raise ValueError("need at least one instance")
    rng = rng if rng is not None else np.random.default_rng(0)
    model = MlpClassifier(spec, rng)
    fit_batch(model, list(instances), memory=None, replay_enabled=False, rng=rng)
    return model


def gradient_check(model: MlpClassifier, X, y, h: float = 1e-5) -> float:
    """Max relative error between analytic and central finite-difference gradients."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    _, grads = model.loss_and_grads(X, y)
    params = model.W + model.b
    worst = 0.0
    for p, g in zip(params, grads):
        flat = p.reshape(-1)
        gflat = g.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + h
            lp, _ = model.loss_and_grads(X, y)
            flat[k] = orig - h
            lm, _ = model.loss_and_grads(X, y)
            flat[k] = orig
            numeric = (lp - lm) / (2 * h)
            denom = max(abs(gflat[k]), abs(numeric), 1e-6)
            worst = max(worst, abs(gflat[k] - numeric) / denom)
    return worst


def nearest_centroid_predict(memory, x) -> int:
    """Label of the closest centroid; raises on an empty memory."""
    centroids = list(memory.all_centroids())
    if not centroids:
        raise EmptyMemoryError("memory holds no centroids")
    return find_nearest(centroids, np.asarray(x, dtype=np.float64)).label


def save_checkpoint(model: MlpClassifier, path):
    """Flat binary: magic, version, layer dims, then row-major f64 weights and biases."""
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", CHECKPOINT_VERSION, len(model.dims)))
        fh.write(struct.pack(f"<{len(model.dims)}I", *model.dims))
        for W, b in zip(model.W, model.b):
            fh.write(np.ascontiguousarray(W, dtype=np.float64).tobytes())
            fh.write(np.ascontiguousarray(b, dtype=np.float64).tobytes())


def load_checkpoint(path, spec_overrides=None) -> MlpClassifier:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"bad checkpoint magic: {magic!r}")
        version, ndims = struct.unpack("<II", fh.read(8))
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        dims = struct.unpack(f"<{ndims}I", fh.read(4 * ndims))
        kwargs = dict(spec_overrides or {})
        spec = ClassifierSpec(input_dim=dims[0], hidden_sizes=tuple(dims[1:-1]), **kwargs)
        model = MlpClassifier(spec)
        for i in range(len(dims) - 1):
            wsize = dims[i] * dims[i + 1]
            model.W[i] = np.frombuffer(fh.read(8 * wsize), dtype=np.float64).reshape(dims[i], dims[i + 1]).copy()
            model.b[i] = np.frombuffer(fh.read(8 * dims[i + 1]), dtype=np.float64).copy()
    return model
