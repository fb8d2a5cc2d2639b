"""Two-layer graph convolutional network, from scratch in float64.

Each layer propagates node features through the normalized operator S, then
applies a learned linear map:

    H1 = relu((S @ drop(X)) @ W1 + b1)
    P  = softmax((S @ drop(H1)) @ W2 + b2)

Training minimizes masked mean cross-entropy over the labeled nodes with
exact reverse-mode gradients and full-batch Adam (or plain gradient
descent). Everything is deterministic in (inputs, seed).
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .dataset import FeatureMatrix, LabelMask, LabelVector
from .errors import DivergenceError, EmptyMask, InvalidConfig, ShapeError
from .graph import GraphConfig, PropagationOperator, build_graph
from .seeding import derive_seed
from .serialize import read_json, write_json

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class Hyperparams:
    """Training knobs. Defaults follow the experimental setup this package
    reproduces: 2 layers, 32 hidden units, 2000 epochs, lr 0.001, dropout 0.1."""

    hidden: int = 32
    epochs: int = 2000
    learning_rate: float = 0.001
    dropout: float = 0.1
    weight_decay: float = 0.0
    optimizer: str = "adam"  # "adam" | "gd"
    layers: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.layers != 2:
            raise InvalidConfig("only the 2-layer architecture is supported")
        if self.hidden < 1:
            raise InvalidConfig(f"hidden must be >= 1, got {self.hidden}")
        if self.epochs < 0:
            raise InvalidConfig(f"epochs must be >= 0, got {self.epochs}")
        if not 0.0 <= self.dropout < 1.0:
            raise InvalidConfig(f"dropout must be in [0,1), got {self.dropout}")
        if self.weight_decay < 0.0:
            raise InvalidConfig("weight_decay must be >= 0")
        if self.optimizer not in ("adam", "gd"):
            raise InvalidConfig(f"unknown optimizer {self.optimizer!r}")


@dataclass
class GcnModel:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray

    @property
    def dims(self) -> tuple:
        return (self.W1.shape[0], self.W1.shape[1], self.W2.shape[1])

    def params(self) -> dict:
        return {"W1": self.W1, "b1": self.b1, "W2": self.W2, "b2": self.b2}

    def copy(self) -> "GcnModel":
        return GcnModel(self.W1.copy(), self.b1.copy(), self.W2.copy(), self.b2.copy())


@dataclass
class TrainingTrace:
    losses: np.ndarray
    final_train_accuracy: float
    wall_time: float


@dataclass
class ForwardCache:
    """Intermediates retained for the backward pass; dropout masks are stored
    pre-scaled so the backward replay is exact."""

    S: PropagationOperator
    P1: np.ndarray  # S @ drop(X)
    Z1: np.ndarray  # pre-activation of layer 1
    P2: np.ndarray  # S @ drop(H1)
    logits: np.ndarray
    probs: np.ndarray
    drop_scale2: np.ndarray | None  # mask2 / keep_prob, None in eval mode


# ---------------------------------------------------------------------------
# coercion helpers


def _feature_array(X) -> np.ndarray:
    if isinstance(X, FeatureMatrix):
        return X.values
    return np.ascontiguousarray(X, dtype=np.float64)


def _label_array(labels, num_classes=None):
    if isinstance(labels, LabelVector):
        return labels.labels, labels.C
    if isinstance(labels, tuple) and len(labels) == 2:
        y, C = labels
        return np.asarray(y, dtype=np.int64), int(C)
    y = np.asarray(labels, dtype=np.int64)
    if num_classes is None:
        raise InvalidConfig("num_classes is required when labels is a plain array")
    return y, int(num_classes)


def _mask_array(mask) -> np.ndarray:
    if isinstance(mask, LabelMask):
        return mask.mask
    return np.asarray(mask, dtype=bool)


# ---------------------------------------------------------------------------
# model and passes


def init_model(d: int, hidden: int, C: int, seed: int) -> GcnModel:
    """Glorot-uniform weights, zero biases, deterministic in seed."""
    if min(d, hidden, C) < 1:
        raise InvalidConfig("all model dimensions must be >= 1")
    rng = np.random.default_rng(seed)
    lim1 = np.sqrt(6.0 / (d + hidden))
    W1 = rng.uniform(-lim1, lim1, size=(d, hidden))
    lim2 = np.sqrt(6.0 / (hidden + C))
    W2 = rng.uniform(-lim2, lim2, size=(hidden, C))
    return GcnModel(W1, np.zeros(hidden), W2, np.zeros(C))


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _log_softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def forward(
    S: PropagationOperator,
    X,
    model: GcnModel,
    dropout_rate: float = 0.0,
    rng: np.random.Generator | None = None,
):
    """Run the network; returns (probabilities, cache).

    Inverted dropout is applied to the input of each graph convolution only
    when an rng is supplied (training mode) and the rate is positive.
    """
    Xv = _feature_array(X)
    d, h, C = model.dims
    if Xv.shape[0] != S.n:
        raise ShapeError(f"feature rows {Xv.shape[0]} != operator size {S.n}")
    if Xv.shape[1] != d:
        raise ShapeError(f"feature dim {Xv.shape[1]} != model input dim {d}")
    training = rng is not None and dropout_rate > 0.0
    keep = 1.0 - dropout_rate

    if training:
        m1 = (rng.random(Xv.shape) >= dropout_rate) / keep
        Xd = Xv * m1
    else:
        Xd = Xv
    P1 = S.matmul(Xd)
    Z1 = P1 @ model.W1 + model.b1
    H1 = np.maximum(Z1, 0.0)

    if training:
        m2 = (rng.random(H1.shape) >= dropout_rate) / keep
        H1d = H1 * m2
    else:
        m2 = None
        H1d = H1
    P2 = S.matmul(H1d)
    logits = P2 @ model.W2 + model.b2
    probs = _softmax_rows(logits)
    cache = ForwardCache(S=S, P1=P1, Z1=Z1, P2=P2, logits=logits, probs=probs, drop_scale2=m2)
    return probs, cache


def masked_cross_entropy(probabilities, labels, mask, logits=None, num_classes=None):
    """Mean negative log-probability of the true class over masked nodes.

    When ``logits`` is given the loss is evaluated in log-space from them
    (log-sum-exp), which avoids log(0) for saturated predictions; the
    training loop always uses that route via the forward cache.
    """
    y, C = _label_array(labels, num_classes)
    m = _mask_array(mask)
    idx = np.flatnonzero(m)
    if idx.size == 0:
        raise EmptyMask("mask selects no nodes")
    if logits is not None:
        logp = _log_softmax_rows(np.asarray(logits, dtype=np.float64))
        picked = logp[idx, y[idx]]
    else:
        p = np.asarray(probabilities, dtype=np.float64)
        picked = np.log(p[idx, y[idx]])
    return float(-picked.mean()), int(idx.size)


def backward(cache: ForwardCache, labels, mask, model: GcnModel, weight_decay: float = 0.0, num_classes=None) -> dict:
    """Exact gradients of the masked loss (plus the 0.5*wd*||W||^2 terms)
    with respect to W1, b1, W2, b2. Dropout masks replay from the cache."""
    y, C = _label_array(labels, num_classes)
    m = _mask_array(mask)
    n = cache.probs.shape[0]
    d, h, Cm = model.dims
    if cache.probs.shape[1] != Cm or cache.P1.shape[1] != d or cache.Z1.shape[1] != h:
        raise ShapeError("cache does not match model dimensions")
    if y.size != n or m.size != n:
        raise ShapeError("labels/mask length does not match cached batch")
    idx = np.flatnonzero(m)
    if idx.size == 0:
        raise EmptyMask("mask selects no nodes")

    G2 = np.zeros_like(cache.probs)
    G2[idx] = cache.probs[idx]
    G2[idx, y[idx]] -= 1.0
    G2[idx] /= idx.size

    dW2 = cache.P2.T @ G2
    db2 = G2.sum(axis=0)
    dP2 = G2 @ model.W2.T
    dH1d = cache.S.t_matmul(dP2)
    dH1 = dH1d if cache.drop_scale2 is None else dH1d * cache.drop_scale2
    dZ1 = dH1 * (cache.Z1 > 0.0)
    dW1 = cache.P1.T @ dZ1
    db1 = dZ1.sum(axis=0)
    if weight_decay:
        dW1 = dW1 + weight_decay * model.W1
        dW2 = dW2 + weight_decay * model.W2
    return {"W1": dW1, "b1": db1, "W2": dW2, "b2": db2}


# ---------------------------------------------------------------------------
# training


def train(S: PropagationOperator, X, labels, mask, hyper: Hyperparams, num_classes=None):
    """Full-batch training for exactly ``hyper.epochs`` steps.

    Initialization and the per-epoch dropout stream both derive from
    hyper.seed, so identical calls give bit-identical models and traces.
    Raises DivergenceError naming the epoch if the loss goes NaN.
    """
    Xv = _feature_array(X)
    y, C = _label_array(labels, num_classes)
    m = _mask_array(mask)
    if not m.any():
        raise EmptyMask("training mask selects no nodes")
    if Xv.shape[0] != S.n or y.size != S.n or m.size != S.n:
        raise ShapeError("features, labels, mask and operator disagree on n")

    t0 = time.perf_counter()
    model = init_model(Xv.shape[1], hyper.hidden, C, seed=derive_seed(hyper.seed, "init"))
    drop_rng = np.random.default_rng(derive_seed(hyper.seed, "dropout"))
    losses = np.empty(hyper.epochs)

    adam_m = {k: np.zeros_like(v) for k, v in model.params().items()}
    adam_v = {k: np.zeros_like(v) for k, v in model.params().items()}

    for epoch in range(hyper.epochs):
        probs, cache = forward(S, Xv, model, hyper.dropout, drop_rng)
        loss, _ = masked_cross_entropy(probs, (y, C), m, logits=cache.logits)
        if hyper.weight_decay:
            loss += 0.5 * hyper.weight_decay * (
                float(np.sum(model.W1 * model.W1)) + float(np.sum(model.W2 * model.W2))
            )
        if np.isnan(loss):
            raise DivergenceError(f"loss became NaN at epoch {epoch}")
        losses[epoch] = loss
        grads = backward(cache, (y, C), m, model, hyper.weight_decay)

        params = model.params()
        if hyper.optimizer == "adam":
            t = epoch + 1
            bc1 = 1.0 - ADAM_BETA1**t
            bc2 = 1.0 - ADAM_BETA2**t
            for key, p in params.items():
                g = grads[key]
                adam_m[key] = ADAM_BETA1 * adam_m[key] + (1.0 - ADAM_BETA1) * g
                adam_v[key] = ADAM_BETA2 * adam_v[key] + (1.0 - ADAM_BETA2) * (g * g)
                m_hat = adam_m[key] / bc1
                v_hat = adam_v[key] / bc2
                p -= hyper.learning_rate * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
        else:
            for key, p in params.items():
                p -= hyper.learning_rate * grads[key]

    pred = predict(model, S, Xv)
    train_idx = np.flatnonzero(m)
    final_acc = float((pred[train_idx] == y[train_idx]).mean())
    trace = TrainingTrace(losses, final_acc, time.perf_counter() - t0)
    return model, trace


def predict(model: GcnModel, S: PropagationOperator, X) -> np.ndarray:
    """Eval-mode argmax class per node; ties resolve to the lowest index."""
    probs, _ = forward(S, X, model)
    return np.argmax(probs, axis=1).astype(np.int64)


# ---------------------------------------------------------------------------
# gradient verification


@dataclass
class GradCheckResult:
    max_rel_error: float
    worst_block: str
    per_block: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.max_rel_error < 1e-4


def finite_difference_gradients(loss_fn, model: GcnModel, step: float = 1e-5) -> dict:
    """Central finite differences of loss_fn over every parameter entry."""
    grads = {}
    for key, p in model.params().items():
        g = np.zeros_like(p)
        flat = p.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            hi = loss_fn(model)
            flat[i] = orig - step
            lo = loss_fn(model)
            flat[i] = orig
            gflat[i] = (hi - lo) / (2.0 * step)
        grads[key] = g
    return grads


def gradient_check(
    n: int = 12,
    d: int = 5,
    hidden: int = 4,
    C: int = 3,
    k: int = 2,
    seed: int = 0,
    step: float = 1e-5,
    weight_decay: float = 0.0,
    corrupt: bool = False,
) -> GradCheckResult:
    """Analytic backward vs central finite differences on a random instance
    (dropout off). Relative error uses a 1e-6 floor in the denominator to
    keep the finite-difference noise floor from dominating tiny gradients.

    ``corrupt`` perturbs one analytic entry; it exists so the failure path
    of the CLI verb stays testable.
    """
    rng = np.random.default_rng(derive_seed(seed, "gradcheck"))
    X = rng.normal(size=(n, d))
    y = rng.permutation(np.concatenate([np.arange(C), rng.integers(0, C, size=n - C)]))
    mask = np.zeros(n, dtype=bool)
    mask[rng.permutation(n)[: max(1, (6 * n) // 10)]] = True

    features = FeatureMatrix(X)
    _, S = build_graph(features, "semi_supervised", config=GraphConfig(k=k))
    model = init_model(d, hidden, C, seed=derive_seed(seed, "init"))

    def loss_fn(mdl):
        probs, cache = forward(S, X, mdl)
        loss, _ = masked_cross_entropy(probs, (y, C), mask, logits=cache.logits)
        if weight_decay:
            loss += 0.5 * weight_decay * (
                float(np.sum(mdl.W1 * mdl.W1)) + float(np.sum(mdl.W2 * mdl.W2))
            )
        return loss

    _, cache = forward(S, X, model)
    analytic = backward(cache, (y, C), mask, model, weight_decay)
    if corrupt:
        analytic["W1"] = analytic["W1"].copy()
        analytic["W1"][0, 0] += 1e-2
    numeric = finite_difference_gradients(loss_fn, model, step)

    per_block = {}
    for key in analytic:
        a, f = analytic[key], numeric[key]
        denom = np.maximum(np.maximum(np.abs(a), np.abs(f)), 1e-6)
        per_block[key] = float(np.max(np.abs(a - f) / denom))
    worst = max(per_block, key=per_block.get)
    return GradCheckResult(per_block[worst], worst, per_block)


# ---------------------------------------------------------------------------
# model persistence


def save_model(model: GcnModel, path) -> None:
    d, h, C = model.dims
    write_json(
        {"dims": [d, h, C], "W1": model.W1, "b1": model.b1, "W2": model.W2, "b2": model.b2},
        path,
    )


def load_model(path) -> GcnModel:
    doc = read_json(path)
    model = GcnModel(
        np.asarray(doc["W1"], dtype=np.float64),
        np.asarray(doc["b1"], dtype=np.float64),
        np.asarray(doc["W2"], dtype=np.float64),
        np.asarray(doc["b2"], dtype=np.float64),
    )
    if list(model.dims) != list(doc["dims"]):
        raise ShapeError("model dims field does not match stored matrices")
    return model
