"""Stacked LSTM sequence classifier: forward pass, BPTT, Adam, and model io.

Everything is float64 numpy. Gate pre-activations are stored per layer in
one (4H,) block ordered [input, forget, candidate, output]; the cell
update is the standard

    i, f, o = sigmoid gates    g = tanh candidate
    c' = f*c + i*g             h' = o * tanh(c')

The readout is the final top-layer hidden state through a rectified dense
layer (H -> H) and a softmax output head (H -> C).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from armsense.frames import MotionType
from armsense.dataset import NUM_CLASSES, SplitDataset

Params = dict[str, np.ndarray]


class LstmConfigError(ValueError):
    pass


class ModelFormatError(ValueError):
    pass


class TrainingError(RuntimeError):
    pass


class TrainingDivergedError(TrainingError):
    """Loss became non-finite; carries the history recorded so far."""

    def __init__(self, message: str, history: "TrainingHistory"):
        super().__init__(message)
        self.history = history


@dataclass(frozen=True)
class LstmConfig:
    features: int
    window: int
    layers: int = 2
    hidden: int = 64
    classes: int = NUM_CLASSES
    epochs: int = 50
    batch_size: int = 32
    learning_rate: float = 1e-3
    clip_norm: float | None = 5.0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        for name in ("features", "window", "layers", "hidden", "classes", "epochs", "batch_size"):
            if getattr(self, name) < 1:
                raise LstmConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.learning_rate <= 0:
            raise LstmConfigError("learning_rate must be positive")
        if self.clip_norm is not None and self.clip_norm <= 0:
            raise LstmConfigError("clip_norm must be positive or None")

    def to_json_dict(self) -> dict:
        doc = {k: getattr(self, k) for k in self.__dataclass_fields__}
        return doc

    @classmethod
    def from_json_dict(cls, doc: dict) -> "LstmConfig":
        known = {k: doc[k] for k in cls.__dataclass_fields__ if k in doc}
        missing = set(cls.__dataclass_fields__) - set(known) - {"clip_norm"}
        if missing:
            raise ModelFormatError(f"config missing fields: {sorted(missing)}")
        return cls(**known)


def param_shapes(config: LstmConfig) -> dict[str, tuple[int, ...]]:
    """Canonical parameter tensors and shapes, in a fixed iteration order."""
    h, c = config.hidden, config.classes
    shapes: dict[str, tuple[int, ...]] = {}
    for layer in range(config.layers):
        in_dim = config.features if layer == 0 else h
        shapes[f"layer{layer}.W"] = (4 * h, in_dim)
        shapes[f"layer{layer}.U"] = (4 * h, h)
        shapes[f"layer{layer}.b"] = (4 * h,)
    shapes["dense.W"] = (h, h)
    shapes["dense.b"] = (h,)
    shapes["out.W"] = (c, h)
    shapes["out.b"] = (c,)
    return shapes


def init_params(config: LstmConfig, rng: np.random.Generator) -> Params:
    """Uniform fan-in-scaled weights; forget-gate bias slice starts at 1."""
    h = config.hidden
    params: Params = {}
    for name, shape in param_shapes(config).items():
        if name.endswith(".b"):
            params[name] = np.zeros(shape, dtype=np.float64)
            if ".b" in name and name.startswith("layer"):
                params[name][h : 2 * h] = 1.0
        else:
            scale = 1.0 / math.sqrt(shape[1])
            params[name] = rng.uniform(-scale, scale, size=shape).astype(np.float64)
    return params


def zero_params(config: LstmConfig) -> Params:
    return {name: np.zeros(shape, dtype=np.float64) for name, shape in param_shapes(config).items()}


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def cell_forward(
    x: np.ndarray,
    h: np.ndarray,
    c: np.ndarray,
    w: np.ndarray,
    u: np.ndarray,
    b: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """One LSTM cell step for a single (unbatched) input vector."""
    hidden = h.shape[-1]
    z = w @ x + u @ h + b
    i = _sigmoid(z[:hidden])
    f = _sigmoid(z[hidden : 2 * hidden])
    g = np.tanh(z[2 * hidden : 3 * hidden])
    o = _sigmoid(z[3 * hidden :])
    c_next = f * c + i * g
    h_next = o * np.tanh(c_next)
    return h_next, c_next


@dataclass
class _LayerCache:
    x: np.ndarray        # (B, T, in_dim) layer input sequence
    i: np.ndarray        # (B, T, H)
    f: np.ndarray
    g: np.ndarray
    o: np.ndarray
    c: np.ndarray        # cell states after each step
    tanh_c: np.ndarray
    h: np.ndarray        # hidden sequence (B, T, H)


@dataclass
class _ForwardCache:
    layers: list[_LayerCache]
    h_last: np.ndarray    # (B, H)
    dense_pre: np.ndarray  # (B, H)
    dense_out: np.ndarray  # (B, H)
    logits: np.ndarray     # (B, C)
    log_probs: np.ndarray  # (B, C)


def _run_layer(x_seq: np.ndarray, w: np.ndarray, u: np.ndarray, b: np.ndarray, hidden: int) -> _LayerCache:
    batch, steps, _ = x_seq.shape
    # One big GEMM for the input projection of every timestep.
    zx = x_seq.reshape(batch * steps, -1) @ w.T
    zx = zx.reshape(batch, steps, 4 * hidden) + b

    i_seq = np.empty((batch, steps, hidden))
    f_seq = np.empty((batch, steps, hidden))
    g_seq = np.empty((batch, steps, hidden))
    o_seq = np.empty((batch, steps, hidden))
    c_seq = np.empty((batch, steps, hidden))
    tanh_c_seq = np.empty((batch, steps, hidden))
    h_seq = np.empty((batch, steps, hidden))

    h = np.zeros((batch, hidden))
    c = np.zeros((batch, hidden))
    for t in range(steps):
        z = zx[:, t] + h @ u.T
        i = _sigmoid(z[:, :hidden])
        f = _sigmoid(z[:, hidden : 2 * hidden])
        g = np.tanh(z[:, 2 * hidden : 3 * hidden])
        o = _sigmoid(z[:, 3 * hidden :])
        c = f * c + i * g
        tc = np.tanh(c)
        h = o * tc
        i_seq[:, t], f_seq[:, t], g_seq[:, t], o_seq[:, t] = i, f, g, o
        c_seq[:, t], tanh_c_seq[:, t], h_seq[:, t] = c, tc, h

    return _LayerCache(x=x_seq, i=i_seq, f=f_seq, g=g_seq, o=o_seq, c=c_seq, tanh_c=tanh_c_seq, h=h_seq)


def forward_batch(x: np.ndarray, params: Params, config: LstmConfig) -> _ForwardCache:
    """Unroll the full stack over a (B, T, F) batch."""
    if x.ndim != 3 or x.shape[1] != config.window or x.shape[2] != config.features:
        raise LstmConfigError(
            f"input shape {x.shape} does not match (batch, {config.window}, {config.features})"
        )
    layers: list[_LayerCache] = []
    seq = np.asarray(x, dtype=np.float64)
    for layer in range(config.layers):
        cache = _run_layer(
            seq,
            params[f"layer{layer}.W"],
            params[f"layer{layer}.U"],
            params[f"layer{layer}.b"],
            config.hidden,
        )
        layers.append(cache)
        seq = cache.h

    h_last = layers[-1].h[:, -1]
    dense_pre = h_last @ params["dense.W"].T + params["dense.b"]
    dense_out = np.maximum(dense_pre, 0.0)
    logits = dense_out @ params["out.W"].T + params["out.b"]

    m = logits.max(axis=1, keepdims=True)
    lse = m + np.log(np.exp(logits - m).sum(axis=1, keepdims=True))
    log_probs = logits - lse

    return _ForwardCache(
        layers=layers,
        h_last=h_last,
        dense_pre=dense_pre,
        dense_out=dense_out,
        logits=logits,
        log_probs=log_probs,
    )


def forward(window: np.ndarray, params: Params, config: LstmConfig) -> np.ndarray:
    """Class probabilities for one already-normalized (T, F) window."""
    cache = forward_batch(np.asarray(window, dtype=np.float64)[None, :, :], params, config)
    return np.exp(cache.log_probs[0])


def global_grad_norm(grads: Params) -> float:
    return math.sqrt(sum(float((g * g).sum()) for g in grads.values()))


def loss_and_grads(
    x: np.ndarray,
    y: np.ndarray,
    params: Params,
    config: LstmConfig,
) -> tuple[float, Params]:
    """Mean cross-entropy over the batch and gradients for every parameter.

    Gradients are computed by backpropagation through all timesteps and
    layers, then jointly rescaled if their global norm exceeds
    config.clip_norm.
    """
    batch = x.shape[0]
    if batch == 0:
        raise TrainingError("batch must be non-empty")
    cache = forward_batch(x, params, config)
    y = np.asarray(y)
    if y.ndim == 2:  # one-hot labels
        y = y.argmax(axis=1)
    y = y.astype(np.int64)

    loss = -float(cache.log_probs[np.arange(batch), y].mean())

    probs = np.exp(cache.log_probs)
    dlogits = probs.copy()
    dlogits[np.arange(batch), y] -= 1.0
    dlogits /= batch

    grads: Params = {}
    grads["out.W"] = dlogits.T @ cache.dense_out
    grads["out.b"] = dlogits.sum(axis=0)
    d_dense = dlogits @ params["out.W"]
    d_dense_pre = d_dense * (cache.dense_pre > 0.0)
    grads["dense.W"] = d_dense_pre.T @ cache.h_last
    grads["dense.b"] = d_dense_pre.sum(axis=0)

    hidden = config.hidden
    steps = config.window
    # Gradient flowing into each layer's hidden sequence; only the last
    # step of the top layer receives head gradient directly.
    dh_seq = np.zeros_like(cache.layers[-1].h)
    dh_seq[:, -1] = d_dense_pre @ params["dense.W"]

    for layer in range(config.layers - 1, -1, -1):
        lc = cache.layers[layer]
        w = params[f"layer{layer}.W"]
        u = params[f"layer{layer}.U"]

        dz_seq = np.empty((batch, steps, 4 * hidden))
        dh_rec = np.zeros((batch, hidden))
        dc_rec = np.zeros((batch, hidden))
        for t in range(steps - 1, -1, -1):
            dh = dh_seq[:, t] + dh_rec
            i, f, g, o = lc.i[:, t], lc.f[:, t], lc.g[:, t], lc.o[:, t]
            tc = lc.tanh_c[:, t]
            c_prev = lc.c[:, t - 1] if t > 0 else np.zeros((batch, hidden))

            do = dh * tc
            dc = dh * o * (1.0 - tc * tc) + dc_rec
            di = dc * g
            dg = dc * i
            df = dc * c_prev
            dc_rec = dc * f

            dz = dz_seq[:, t]
            dz[:, :hidden] = di * i * (1.0 - i)
            dz[:, hidden : 2 * hidden] = df * f * (1.0 - f)
            dz[:, 2 * hidden : 3 * hidden] = dg * (1.0 - g * g)
            dz[:, 3 * hidden :] = do * o * (1.0 - o)
            dh_rec = dz @ u

        h_prev = np.concatenate([np.zeros((batch, 1, hidden)), lc.h[:, :-1]], axis=1)
        flat_dz = dz_seq.reshape(batch * steps, 4 * hidden)
        grads[f"layer{layer}.W"] = flat_dz.T @ lc.x.reshape(batch * steps, -1)
        grads[f"layer{layer}.U"] = flat_dz.T @ h_prev.reshape(batch * steps, hidden)
        grads[f"layer{layer}.b"] = flat_dz.sum(axis=0)
        if layer > 0:
            dh_seq = (flat_dz @ w).reshape(batch, steps, hidden)

    if config.clip_norm is not None:
        norm = global_grad_norm(grads)
        if norm > config.clip_norm:
            scale = config.clip_norm / norm
            for g in grads.values():
                g *= scale

    return loss, grads


@dataclass
class AdamState:
    m: Params
    v: Params
    step: int = 0

    @classmethod
    def for_params(cls, params: Params) -> "AdamState":
        return cls(
            m={k: np.zeros_like(v) for k, v in params.items()},
            v={k: np.zeros_like(v) for k, v in params.items()},
        )


def adam_update(params: Params, grads: Params, state: AdamState, config: LstmConfig) -> None:
    state.step += 1
    b1, b2, eps = config.beta1, config.beta2, config.adam_eps
    lr = config.learning_rate
    correction1 = 1.0 - b1**state.step
    correction2 = 1.0 - b2**state.step
    for name, grad in grads.items():
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * grad
        v *= b2
        v += (1.0 - b2) * grad * grad
        params[name] -= lr * (m / correction1) / (np.sqrt(v / correction2) + eps)


@dataclass(frozen=True)
class EpochMetrics:
    epoch: int
    train_loss: float
    train_acc: float
    test_loss: float
    test_acc: float


@dataclass
class TrainingHistory:
    epochs: list[EpochMetrics] = field(default_factory=list)

    def to_csv(self) -> str:
        lines = ["epoch,train_loss,train_acc,test_loss,test_acc"]
        for e in self.epochs:
            lines.append(
                f"{e.epoch},{e.train_loss!r},{e.train_acc!r},{e.test_loss!r},{e.test_acc!r}"
            )
        return "\n".join(lines) + "\n"

    @property
    def final(self) -> EpochMetrics:
        return self.epochs[-1]


@dataclass
class LstmModel:
    """Trained classifier bundle: architecture, weights, and input contract."""

    config: LstmConfig
    params: Params
    feature_names: tuple[str, ...]
    feature_mean: np.ndarray
    feature_std: np.ndarray

    def normalize(self, window: np.ndarray) -> np.ndarray:
        return (np.asarray(window, dtype=np.float64) - self.feature_mean) / (
            self.feature_std + 1e-8
        )


def _batch_metrics(
    x: np.ndarray, y: np.ndarray, params: Params, config: LstmConfig, chunk: int = 256
) -> tuple[float, float]:
    total_loss = 0.0
    correct = 0
    n = x.shape[0]
    for start in range(0, n, chunk):
        part = x[start : start + chunk]
        labels = y[start : start + chunk]
        cache = forward_batch(part, params, config)
        total_loss += -float(cache.log_probs[np.arange(part.shape[0]), labels].sum())
        correct += int((cache.log_probs.argmax(axis=1) == labels).sum())
    return total_loss / n, correct / n


def train(
    split: SplitDataset,
    config: LstmConfig,
) -> tuple[LstmModel, TrainingHistory]:
    """Train on the split's train windows; deterministic for a given seed.

    History records metrics of the post-epoch model on both sets. Raises
    TrainingDivergedError (with partial history) on a non-finite loss.
    """
    x_train, y_train = split.train_arrays()
    x_test, y_test = split.test_arrays()
    if x_train.shape[0] == 0:
        raise TrainingError("training set is empty")
    if x_test.shape[0] == 0:
        raise TrainingError("test set is empty; split with a smaller ratio")
    if x_train.shape[2] != config.features or len(split.feature_names) != config.features:
        raise TrainingError(
            f"feature count mismatch: split has {x_train.shape[2]}, config expects {config.features}"
        )
    if x_train.shape[1] != config.window:
        raise TrainingError(f"window mismatch: split has {x_train.shape[1]}, config expects {config.window}")

    rng = np.random.Generator(np.random.PCG64(config.seed))
    params = init_params(config, rng)
    state = AdamState.for_params(params)
    history = TrainingHistory()

    n = x_train.shape[0]
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            loss, grads = loss_and_grads(x_train[idx], y_train[idx], params, config)
            if not math.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, batch offset {start}", history
                )
            adam_update(params, grads, state, config)

        train_loss, train_acc = _batch_metrics(x_train, y_train, params, config)
        test_loss, test_acc = _batch_metrics(x_test, y_test, params, config)
        if not (math.isfinite(train_loss) and math.isfinite(test_loss)):
            raise TrainingDivergedError(f"non-finite evaluation loss after epoch {epoch}", history)
        history.epochs.append(
            EpochMetrics(
                epoch=epoch,
                train_loss=train_loss,
                train_acc=train_acc,
                test_loss=test_loss,
                test_acc=test_acc,
            )
        )

    model = LstmModel(
        config=config,
        params=params,
        feature_names=tuple(split.feature_names),
        feature_mean=split.feature_mean.copy(),
        feature_std=split.feature_std.copy(),
    )
    return model, history


@dataclass(frozen=True)
class EvalResult:
    accuracy: float
    precision: tuple[float, ...]
    recall: tuple[float, ...]
    confusion: np.ndarray  # (C, C), rows = true class, columns = predicted
    support: tuple[int, ...]


def evaluate_arrays(params: Params, config: LstmConfig, x: np.ndarray, y: np.ndarray) -> EvalResult:
    if x.shape[0] == 0:
        raise TrainingError("cannot evaluate an empty set")
    c = config.classes
    confusion = np.zeros((c, c), dtype=np.int64)
    for start in range(0, x.shape[0], 256):
        cache = forward_batch(x[start : start + 256], params, config)
        predicted = cache.log_probs.argmax(axis=1)
        for true, pred in zip(y[start : start + 256], predicted):
            confusion[int(true), int(pred)] += 1

    accuracy = float(np.trace(confusion)) / float(confusion.sum())
    col = confusion.sum(axis=0)
    row = confusion.sum(axis=1)
    precision = tuple(
        float(confusion[k, k] / col[k]) if col[k] else 0.0 for k in range(c)
    )
    recall = tuple(float(confusion[k, k] / row[k]) if row[k] else 0.0 for k in range(c))
    return EvalResult(
        accuracy=accuracy,
        precision=precision,
        recall=recall,
        confusion=confusion,
        support=tuple(int(v) for v in row),
    )


def evaluate(model: LstmModel, windows: Sequence, labels: Sequence[MotionType] | None = None) -> EvalResult:
    """Evaluate on raw windows; normalization uses the model's stored stats."""
    if labels is None:
        labels = [w.label for w in windows]
        values = [w.values for w in windows]
    else:
        values = list(windows)
    x = model.normalize(np.stack(values))
    y = np.array([m.index for m in labels], dtype=np.int64)
    return evaluate_arrays(model.params, model.config, x, y)


def predict(model: LstmModel, window: np.ndarray) -> tuple[MotionType, float]:
    """Classify one raw (T, F) window; ties break toward the lowest index."""
    if model.config.classes != NUM_CLASSES:
        raise LstmConfigError("predict requires a model trained on the 9 motion classes")
    window = np.asarray(window, dtype=np.float64)
    if window.shape != (model.config.window, model.config.features):
        raise LstmConfigError(
            f"window shape {window.shape} does not match ({model.config.window}, {model.config.features})"
        )
    probs = forward(model.normalize(window), model.params, model.config)
    index = int(probs.argmax())
    return MotionType.from_index(index), float(probs[index])


MODEL_SCHEMA_VERSION = 1


def save_model(model: LstmModel, path: str | Path) -> None:
    doc = {
        "schema_version": MODEL_SCHEMA_VERSION,
        "config": model.config.to_json_dict(),
        "feature_names": list(model.feature_names),
        "normalization": {
            "mean": model.feature_mean.tolist(),
            "std": model.feature_std.tolist(),
        },
        "params": {name: model.params[name].tolist() for name in param_shapes(model.config)},
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> LstmModel:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"unreadable model file: {exc}") from exc

    version = doc.get("schema_version")
    if version != MODEL_SCHEMA_VERSION:
        raise ModelFormatError(
            f"incompatible model schema_version {version!r}; this build reads version {MODEL_SCHEMA_VERSION}"
        )
    try:
        config = LstmConfig.from_json_dict(doc["config"])
        feature_names = tuple(doc["feature_names"])
        mean = np.array(doc["normalization"]["mean"], dtype=np.float64)
        std = np.array(doc["normalization"]["std"], dtype=np.float64)
        raw_params = doc["params"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"malformed model document: {exc}") from exc

    if len(feature_names) != config.features:
        raise ModelFormatError(
            f"feature_names length {len(feature_names)} does not match config features {config.features}"
        )
    if mean.shape != (config.features,) or std.shape != (config.features,):
        raise ModelFormatError("normalization vectors must have one entry per feature")

    params: Params = {}
    for name, shape in param_shapes(config).items():
        if name not in raw_params:
            raise ModelFormatError(f"missing parameter tensor {name!r}")
        try:
            tensor = np.array(raw_params[name], dtype=np.float64)
        except ValueError as exc:
            raise ModelFormatError(f"parameter tensor {name!r} is malformed: {exc}") from exc
        if tensor.shape != shape:
            raise ModelFormatError(f"parameter tensor {name!r} has shape {tensor.shape}, expected {shape}")
        if not np.all(np.isfinite(tensor)):
            raise ModelFormatError(f"parameter tensor {name!r} contains non-finite values")
        params[name] = tensor

    return LstmModel(
        config=config,
        params=params,
        feature_names=feature_names,
        feature_mean=mean,
        feature_std=std,
    )
