"""Dense feedforward classifier engine.

Networks are plain lists of (weights, bias) arrays with GELU on hidden
layers and a softmax output. Forward, input gradients, and parameter
gradients are exact (no autograd); training runs mini-batch Adam from a
seeded generator so a run is bit-reproducible given (seed, data order).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import erf

from .errors import ConfigError, DivergenceError, ShapeError

MODEL_FORMAT = "fadkit-model"
MODEL_FORMAT_VERSION = 1

GRADIENT_TARGETS = ("probability", "logit")

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _gelu(x):
    # exact erf form, not the tanh approximation
    return x * 0.5 * (1.0 + erf(x / _SQRT2))


def _gelu_grad(x):
    cdf = 0.5 * (1.0 + erf(x / _SQRT2))
    pdf = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
    return cdf + x * pdf


def gelu(x):
    """x * Phi(x) with Phi the standard normal CDF, evaluated through erf.

    Accepts a scalar or an array; raises ValueError on non-finite input.
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("gelu requires finite input")
    out = _gelu(arr)
    return float(out) if arr.ndim == 0 else out


def softmax(logits):
    """Row-wise numerically stable softmax."""
    z = np.asarray(logits, dtype=float)
    z = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


@dataclass
class DenseNetwork:
    """Feedforward classifier: GELU hidden layers, softmax over class logits.

    ``layers`` holds (weights, bias) pairs with weights shaped
    (fan_in, fan_out). ``gradient_target`` selects what input_gradient
    differentiates: the softmax probability of the target class
    ("probability", default) or its raw logit ("logit").
    """

    layers: list
    gradient_target: str = "probability"

    def __post_init__(self):
        if not self.layers:
            raise ConfigError("network needs at least one layer")
        if self.gradient_target not in GRADIENT_TARGETS:
            raise ConfigError(f"unknown gradient target {self.gradient_target!r}")
        self.layers = [
            (np.asarray(w, dtype=float), np.asarray(b, dtype=float))
            for w, b in self.layers
        ]
        for k, (w, b) in enumerate(self.layers):
            if w.ndim != 2 or b.ndim != 1 or w.shape[1] != b.shape[0]:
                raise ShapeError(
                    f"layer {k}: weights {w.shape} incompatible with bias {b.shape}"
                )
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {k} has non-finite parameters")
        for k in range(len(self.layers) - 1):
            out_dim = self.layers[k][0].shape[1]
            in_dim = self.layers[k + 1][0].shape[0]
            if out_dim != in_dim:
                raise ShapeError(
                    f"layer {k} emits {out_dim} values but layer {k + 1} expects {in_dim}"
                )

    @property
    def input_dim(self) -> int:
        return self.layers[0][0].shape[0]

    @property
    def class_count(self) -> int:
        return self.layers[-1][0].shape[1]

    @property
    def hidden_dims(self) -> tuple:
        return tuple(w.shape[1] for w, _ in self.layers[:-1])

    @property
    def parameter_count(self) -> int:
        return int(sum(w.size + b.size for w, b in self.layers))

    def copy(self) -> "DenseNetwork":
        return DenseNetwork(
            [(w.copy(), b.copy()) for w, b in self.layers],
            gradient_target=self.gradient_target,
        )


def init_network(input_dim, hidden_dims, class_count, seed,
                 gradient_target="probability") -> DenseNetwork:
    """He-style fan-in scaled uniform weights from the seeded RNG, zero biases."""
    if input_dim < 1:
        raise ConfigError("input_dim must be positive")
    if class_count < 2:
        raise ConfigError("need at least two classes")
    if any(h < 1 for h in hidden_dims):
        raise ConfigError("hidden widths must be positive")
    rng = np.random.default_rng(seed)
    dims = [int(input_dim), *[int(h) for h in hidden_dims], int(class_count)]
    layers = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = math.sqrt(6.0 / fan_in)
        w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        layers.append((w, np.zeros(fan_out)))
    return DenseNetwork(layers, gradient_target=gradient_target)


def _as_batch(net: DenseNetwork, x):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    batch = np.atleast_2d(x)
    if batch.ndim != 2 or batch.shape[1] != net.input_dim:
        raise ShapeError(
            f"input has shape {x.shape}, network expects {net.input_dim} features"
        )
    return batch, single


def logits(net: DenseNetwork, x):
    """Pre-softmax class scores for one vector (d,) or a batch (n, d)."""
    batch, single = _as_batch(net, x)
    a = batch
    for w, b in net.layers[:-1]:
        a = _gelu(a @ w + b)
    w, b = net.layers[-1]
    z = a @ w + b
    return z[0] if single else z


def forward(net: DenseNetwork, x):
    """Class probabilities for one vector (d,) or a batch (n, d)."""
    return softmax(logits(net, x))


def predict(net: DenseNetwork, x):
    """Argmax class index per instance (ties go to the lowest index)."""
    z = logits(net, x)
    return int(np.argmax(z)) if z.ndim == 1 else np.argmax(z, axis=1)


def input_gradient(net: DenseNetwork, x, target_class: int, target=None):
    """Gradient of the target-class output with respect to each input feature.

    ``target`` overrides the network's gradient_target; the returned array
    matches the input's shape ((d,) or (n, d)).
    """
    batch, single = _as_batch(net, x)
    if not 0 <= target_class < net.class_count:
        raise IndexError(
            f"class index {target_class} out of range for {net.class_count} classes"
        )
    mode = net.gradient_target if target is None else target
    if mode not in GRADIENT_TARGETS:
        raise ConfigError(f"unknown gradient target {mode!r}")

    pre_acts = []
    a = batch
    for w, b in net.layers[:-1]:
        z = a @ w + b
        pre_acts.append(z)
        a = _gelu(z)
    w_out, b_out = net.layers[-1]
    out_logits = a @ w_out + b_out

    if mode == "probability":
        probs = softmax(out_logits)
        pt = probs[:, target_class:target_class + 1]
        dlogits = -pt * probs
        dlogits[:, target_class] += pt[:, 0]
    else:
        dlogits = np.zeros_like(out_logits)
        dlogits[:, target_class] = 1.0

    delta = dlogits @ w_out.T
    for (w, _), z in zip(reversed(net.layers[:-1]), reversed(pre_acts)):
        delta = (delta * _gelu_grad(z)) @ w.T
    return delta[0] if single else delta


def cross_entropy(net: DenseNetwork, x, labels) -> float:
    """Mean cross-entropy of the softmax output against integer labels."""
    batch, _ = _as_batch(net, x)
    y = np.asarray(labels, dtype=int).reshape(-1)
    if y.shape[0] != batch.shape[0]:
        raise ShapeError("labels length does not match instance count")
    z = logits(net, batch)
    shifted = z - z.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_norm
    return -float(np.mean(log_probs[np.arange(len(y)), y]))


def accuracy(net: DenseNetwork, x, labels) -> float:
    y = np.asarray(labels, dtype=int).reshape(-1)
    return float(np.mean(predict(net, x) == y))


def _loss_and_param_grads(net, batch, labels):
    """Mean batch cross-entropy plus the gradient of every parameter."""
    acts = [batch]
    pre_acts = []
    a = batch
    for w, b in net.layers[:-1]:
        z = a @ w + b
        pre_acts.append(z)
        a = _gelu(z)
        acts.append(a)
    w_out, b_out = net.layers[-1]
    out_logits = a @ w_out + b_out

    shifted = out_logits - out_logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_norm
    n = batch.shape[0]
    idx = np.arange(n)
    loss = -float(np.mean(log_probs[idx, labels]))

    delta = np.exp(log_probs)
    delta[idx, labels] -= 1.0
    delta /= n
    grads = [None] * len(net.layers)
    grads[-1] = (acts[-1].T @ delta, delta.sum(axis=0))
    delta = delta @ w_out.T
    for k in range(len(net.layers) - 2, -1, -1):
        delta = delta * _gelu_grad(pre_acts[k])
        grads[k] = (acts[k].T @ delta, delta.sum(axis=0))
        if k:
            delta = delta @ net.layers[k][0].T
    return loss, grads


@dataclass(frozen=True)
class TrainConfig:
    """Adam training hyperparameters (defaults: lr 1e-3, betas 0.9/0.999,
    eps 1e-8, batch 32, 100 epochs)."""

    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: int = 32
    epochs: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ConfigError("beta1 and beta2 must lie in [0, 1)")
        if self.epsilon <= 0:
            raise ConfigError("epsilon must be positive")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be positive")
        if self.epochs < 0:
            raise ConfigError("epochs must be nonnegative")

    def with_seed(self, seed: int) -> "TrainConfig":
        return replace(self, seed=int(seed))


@dataclass
class AdamState:
    """First/second moment accumulators, one pair per parameter array."""

    m: list
    v: list
    step: int = 0

    @classmethod
    def for_network(cls, net: DenseNetwork) -> "AdamState":
        zeros = lambda: [(np.zeros_like(w), np.zeros_like(b)) for w, b in net.layers]
        return cls(m=zeros(), v=zeros())


def adam_step(net: DenseNetwork, state: AdamState, grads, config: TrainConfig):
    """One bias-corrected Adam update, applied in place. Returns (net, state)."""
    if len(grads) != len(net.layers):
        raise ShapeError("gradient list does not match layer count")
    state.step += 1
    t = state.step
    b1, b2 = config.beta1, config.beta2
    corr1 = 1.0 - b1 ** t
    corr2 = 1.0 - b2 ** t
    lr = config.learning_rate
    for k in range(len(net.layers)):
        for part in (0, 1):
            p = net.layers[k][part]
            g = np.asarray(grads[k][part], dtype=float)
            if g.shape != p.shape:
                raise ShapeError(
                    f"gradient shape {g.shape} does not match parameter {p.shape}"
                )
            m = state.m[k][part]
            v = state.v[k][part]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            p -= lr * (m / corr1) / (np.sqrt(v / corr2) + config.epsilon)
    return net, state


@dataclass(frozen=True)
class NetSpec:
    """Architecture for a new network; class_count is inferred from labels
    when left as None."""

    hidden_dims: tuple = (32,)
    class_count: int | None = None
    gradient_target: str = "probability"


@dataclass
class TrainResult:
    network: DenseNetwork
    train_loss: list
    val_loss: list
    best_epoch: int | None = None


def train(features, labels, spec: NetSpec, config: TrainConfig,
          validation=None) -> TrainResult:
    """Mini-batch Adam training with optional lowest-validation-loss selection.

    Batches are drawn by seeded shuffling each epoch; the last short batch is
    kept. With a ``validation`` pair (features, labels) the returned network
    is the epoch snapshot with the lowest validation loss, otherwise the
    final-epoch parameters. epochs=0 returns the freshly initialized network.
    """
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=int).reshape(-1)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ConfigError("training data must be a nonempty (n, d) matrix")
    if X.shape[0] != y.shape[0]:
        raise ShapeError("features and labels disagree on instance count")
    if not np.all(np.isfinite(X)):
        raise ValueError("training features must be finite")

    class_count = spec.class_count
    if class_count is None:
        class_count = int(y.max()) + 1
    present = np.unique(y)
    if present.min() < 0 or present.max() >= class_count:
        raise ConfigError("labels out of range for class_count")
    if len(present) < class_count:
        missing = sorted(set(range(class_count)) - set(present.tolist()))
        raise ConfigError(f"classes {missing} have no training instances")

    net = init_network(X.shape[1], spec.hidden_dims, class_count,
                       seed=config.seed, gradient_target=spec.gradient_target)
    if config.epochs == 0:
        return TrainResult(net, train_loss=[], val_loss=[])

    if validation is not None:
        val_X = np.asarray(validation[0], dtype=float)
        val_y = np.asarray(validation[1], dtype=int).reshape(-1)

    state = AdamState.for_network(net)
    rng = np.random.default_rng(config.seed)
    n = X.shape[0]
    train_trace = []
    val_trace = []
    best_loss = math.inf
    best_epoch = None
    best_layers = None

    for epoch in range(config.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            sel = order[start:start + config.batch_size]
            loss, grads = _loss_and_param_grads(net, X[sel], y[sel])
            if not math.isfinite(loss):
                raise DivergenceError(epoch)
            epoch_loss += loss * len(sel)
            adam_step(net, state, grads, config)
        train_trace.append(epoch_loss / n)

        if validation is not None:
            vloss = cross_entropy(net, val_X, val_y)
            if not math.isfinite(vloss):
                raise DivergenceError(epoch)
            val_trace.append(vloss)
            if vloss < best_loss:
                best_loss = vloss
                best_epoch = epoch
                best_layers = [(w.copy(), b.copy()) for w, b in net.layers]

    if best_layers is not None:
        net = DenseNetwork(best_layers, gradient_target=spec.gradient_target)
    return TrainResult(net, train_loss=train_trace, val_loss=val_trace,
                       best_epoch=best_epoch)


def to_json_dict(net: DenseNetwork) -> dict:
    """Versioned JSON document: layer dims, row-major weights, biases, tags."""
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_FORMAT_VERSION,
        "activation": "gelu",
        "gradient_target": net.gradient_target,
        "input_dim": net.input_dim,
        "class_count": net.class_count,
        "layer_dims": [net.input_dim, *net.hidden_dims, net.class_count],
        "layers": [
            {"weights": w.tolist(), "bias": b.tolist()} for w, b in net.layers
        ],
    }


def from_json_dict(doc: dict) -> DenseNetwork:
    if doc.get("format") != MODEL_FORMAT:
        raise ConfigError("not a model document")
    if doc.get("version") != MODEL_FORMAT_VERSION:
        raise ConfigError(f"unsupported model version {doc.get('version')!r}")
    if doc.get("activation") != "gelu":
        raise ConfigError(f"unsupported activation {doc.get('activation')!r}")
    layers = [
        (np.asarray(entry["weights"], dtype=float),
         np.asarray(entry["bias"], dtype=float))
        for entry in doc["layers"]
    ]
    net = DenseNetwork(layers, gradient_target=doc.get("gradient_target",
                                                       "probability"))
    dims = [net.input_dim, *net.hidden_dims, net.class_count]
    if doc.get("layer_dims") != dims:
        raise ConfigError("layer_dims do not match the stored weights")
    return net


def save_model(net: DenseNetwork, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(to_json_dict(net), fh, sort_keys=True)
        fh.write("\n")


def load_model(path) -> DenseNetwork:
    with open(path, encoding="utf-8") as fh:
        return from_json_dict(json.load(fh))
