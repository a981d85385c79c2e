"""Binary infested / not-infested classifiers and their optimizer.

Five variants: logistic regression and a linear SVM (both trained with
mini-batch RMSprop), a CART decision tree, a bagged random forest, and the
small convolutional net from palmsonic.cnn. The shallow models consume
vectorized combined images; the net consumes the images directly.

Training is deterministic for a fixed seed: one seeded generator drives
initialization, shuffling, and resampling, and everything runs single
threaded. Forest vote ties resolve to infested so a borderline clip raises
an alarm rather than staying silent.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import cnn as cnn_mod
from . import trees
from .imaging import CombinedImage

LABELS = ("not_infested", "infested")
POSITIVE = "infested"

MODEL_MAGIC = b"PSMD"
MODEL_VERSION = 1
_VARIANT_TAGS = {"logistic": 1, "linear_svm": 2, "decision_tree": 3, "random_forest": 4, "small_cnn": 5}
_TAG_VARIANTS = {v: k for k, v in _VARIANT_TAGS.items()}

__all__ = [
    "LABELS",
    "POSITIVE",
    "FeatureVector",
    "TrainConfig",
    "ModelParams",
    "Prediction",
    "DegenerateDataError",
    "vectorize",
    "rmsprop_step",
    "sgd_step",
    "logistic_loss_grad",
    "hinge_loss_grad",
    "train_logistic",
    "train_linear_svm",
    "train_decision_tree",
    "train_random_forest",
    "train_small_cnn",
    "predict",
    "save_model",
    "load_model",
]


class DegenerateDataError(ValueError):
    """Training data is missing one of the two classes."""


class ModelFormatError(ValueError):
    """Model file is corrupt or from an unsupported format version."""


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    source: str = ""
    label: str | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or not np.all(np.isfinite(v)):
            raise ValueError("feature vector must be 1-D and finite")
        if self.label is not None and self.label not in LABELS:
            raise ValueError(f"unknown label {self.label!r}")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    learning_rate: float = 1e-4
    optimizer: str = "rmsprop"
    rmsprop_decay: float = 0.9
    rmsprop_epsilon: float = 1e-8
    batch_size: int = 32
    seed: int = 0
    svm_l2: float = 1e-4
    max_depth: int = 12
    min_samples_split: int = 2
    n_trees: int = 25
    feature_subsample: str = "sqrt"  # "sqrt" or "all"
    bootstrap: bool = True

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.optimizer not in ("rmsprop", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.feature_subsample not in ("sqrt", "all"):
            raise ValueError(f"unknown feature_subsample {self.feature_subsample!r}")

    def digest(self) -> str:
        parts = [f"{f.name}={getattr(self, f.name)!r}" for f in fields(self)]
        return hashlib.sha256(";".join(parts).encode()).hexdigest()[:16]


@dataclass
class ModelParams:
    variant: str
    params: dict
    train_config_digest: str = ""


@dataclass(frozen=True)
class Prediction:
    label: str
    score: float  # probability-like confidence that the clip is infested

    def __post_init__(self):
        if not np.isfinite(self.score):
            raise ValueError("score must be finite")


def vectorize(img, downsample: int) -> FeatureVector:
    """Grayscale, block-average, flatten, and standardize a combined image.

    downsample must divide 224 (and therefore the combined width). A
    constant image standardizes to the zero vector.
    """
    h, w = img.pixels.shape[:2]
    if downsample < 1 or h % downsample or w % downsample:
        raise ValueError(f"downsample {downsample} must divide image size {h}x{w}")
    gray = img.pixels.astype(np.float64).mean(axis=2)
    pooled = gray.reshape(h // downsample, downsample, w // downsample, downsample).mean(axis=(1, 3))
    v = pooled.reshape(-1)
    std = v.std()
    v = (v - v.mean()) / std if std > 0 else np.zeros_like(v)
    return FeatureVector(values=v, source=getattr(img, "clip_id", ""))


def rmsprop_step(params, grads, state, cfg: TrainConfig):
    """One RMSprop update: s' = rho*s + (1-rho)*g^2, theta' = theta - lr*g/sqrt(s'+eps)."""
    _check_shapes(params, grads, state)
    rho = cfg.rmsprop_decay
    new_state = [rho * s + (1.0 - rho) * g * g for s, g in zip(state, grads)]
    new_params = [
        p - cfg.learning_rate * g / np.sqrt(s + cfg.rmsprop_epsilon)
        for p, g, s in zip(params, grads, new_state)
    ]
    return new_params, new_state


def sgd_step(params, grads, cfg: TrainConfig):
    _check_shapes(params, grads, grads)
    return [p - cfg.learning_rate * g for p, g in zip(params, grads)]


def _check_shapes(params, grads, state):
    if not (len(params) == len(grads) == len(state)):
        raise ValueError("params, grads, and state must have matching layout")
    for p, g, s in zip(params, grads, state):
        if np.shape(p) != np.shape(g) or np.shape(p) != np.shape(s):
            raise ValueError(f"shape mismatch {np.shape(p)} vs {np.shape(g)} vs {np.shape(s)}")


def logistic_loss_grad(w, b, x, y):
    """Mean binary cross-entropy with a sigmoid link, and its gradient.

    Stable form: loss = mean(softplus(z) - y*z) with z = xw + b.
    """
    z = x @ w + b
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
    sig = 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))
    err = sig - y
    return loss, x.T @ err / y.size, float(np.mean(err))


def hinge_loss_grad(w, b, x, y_pm, l2):
    """L2-regularized mean hinge loss and its subgradient; y_pm is +-1."""
    f = x @ w + b
    margins = 1.0 - y_pm * f
    active = margins > 0
    loss = float(np.mean(np.maximum(margins, 0.0)) + l2 * (w @ w))
    coeff = np.where(active, -y_pm, 0.0) / y_pm.size
    return loss, x.T @ coeff + 2.0 * l2 * w, float(coeff.sum())


def _stack_vectors(data):
    if not data:
        raise DegenerateDataError("no training data")
    dims = {fv.values.size for fv in data}
    if len(dims) != 1:
        raise ValueError(f"inconsistent feature dimensions: {sorted(dims)}")
    x = np.stack([fv.values for fv in data])
    labels = [fv.label for fv in data]
    if any(lbl is None for lbl in labels):
        raise ValueError("all training vectors need labels")
    y = np.array([1 if lbl == POSITIVE else 0 for lbl in labels], dtype=np.int64)
    if y.min() == y.max():
        raise DegenerateDataError("training data contains a single class")
    return x, y


def _minibatches(n, batch_size, rng):
    order = rng.permutation(n)
    for lo in range(0, n, batch_size):
        yield order[lo : lo + batch_size]


def _train_linear(data, cfg, loss_grad, variant, epoch_hook):
    x, y = _stack_vectors(data)
    rng = np.random.default_rng(cfg.seed)
    w = np.zeros(x.shape[1])
    b = 0.0
    state = [np.zeros_like(w), np.zeros(())]
    for epoch in range(cfg.epochs):
        for batch in _minibatches(y.size, cfg.batch_size, rng):
            _, gw, gb = loss_grad(w, b, x[batch], y[batch])
            if cfg.optimizer == "rmsprop":
                (w, b), state = rmsprop_step([w, b], [gw, np.asarray(gb)], state, cfg)
            else:
                w, b = sgd_step([w, b], [gw, np.asarray(gb)], cfg)
            b = float(b)
        if epoch_hook is not None:
            epoch_hook(epoch, ModelParams(variant, {"weights": w, "bias": b}, cfg.digest()))
    return ModelParams(variant, {"weights": w, "bias": float(b)}, cfg.digest())


def train_logistic(data, cfg: TrainConfig, epoch_hook=None) -> ModelParams:
    """Mini-batch RMSprop on mean binary cross-entropy."""

    def lg(w, b, xb, yb):
        return logistic_loss_grad(w, b, xb, yb)

    return _train_linear(data, cfg, lg, "logistic", epoch_hook)


def train_linear_svm(data, cfg: TrainConfig, epoch_hook=None) -> ModelParams:
    """Subgradient RMSprop on L2-regularized hinge loss (labels as +-1)."""

    def hg(w, b, xb, yb):
        return hinge_loss_grad(w, b, xb, 2.0 * yb - 1.0, cfg.svm_l2)

    return _train_linear(data, cfg, hg, "linear_svm", epoch_hook)


def train_decision_tree(data, cfg: TrainConfig) -> ModelParams:
    x, y = _stack_tree_data(data)
    tree = trees.build_tree(x, y, cfg.max_depth, cfg.min_samples_split)
    return ModelParams("decision_tree", tree, cfg.digest())


def train_random_forest(data, cfg: TrainConfig) -> ModelParams:
    x, y = _stack_tree_data(data)
    rng = np.random.default_rng(cfg.seed)
    d = x.shape[1]
    n_sub = d if cfg.feature_subsample == "all" else trees.sqrt_feature_count(d)
    grown = []
    for _ in range(cfg.n_trees):
        idx = rng.integers(0, y.size, y.size) if cfg.bootstrap else np.arange(y.size)
        grown.append(
            trees.build_tree(
                x[idx],
                y[idx],
                cfg.max_depth,
                cfg.min_samples_split,
                rng=rng,
                n_candidate_features=n_sub,
            )
        )
    return ModelParams("random_forest", {"trees": grown}, cfg.digest())


def _stack_tree_data(data):
    # trees tolerate single-class data (single leaf), so skip the class check
    if not data:
        raise DegenerateDataError("no training data")
    x = np.stack([fv.values for fv in data])
    y = np.array([1 if fv.label == POSITIVE else 0 for fv in data], dtype=np.int64)
    return x, y


def train_small_cnn(images_with_labels, cfg: TrainConfig, epoch_hook=None) -> ModelParams:
    """Train the fixed conv net on labeled combined images."""
    images = [img for img, _ in images_with_labels]
    y = np.array(
        [1 if lbl == POSITIVE else 0 for _, lbl in images_with_labels], dtype=np.int64
    )
    if len(y) == 0 or y.min() == y.max():
        raise DegenerateDataError("need at least one example per class")
    x = cnn_mod.images_to_batch(images)
    input_hw = x.shape[2:]
    rng = np.random.default_rng(cfg.seed)
    params = cnn_mod.init_params(rng, input_hw)
    state = [np.zeros_like(p) for p in params]
    for epoch in range(cfg.epochs):
        for batch in _minibatches(y.size, cfg.batch_size, rng):
            _, grads = cnn_mod.cnn_loss_grad(params, x[batch], y[batch])
            if cfg.optimizer == "rmsprop":
                params, state = rmsprop_step(params, grads, state, cfg)
            else:
                params = sgd_step(params, grads, cfg)
        if epoch_hook is not None:
            epoch_hook(epoch, _cnn_model(params, input_hw, cfg))
    return _cnn_model(params, input_hw, cfg)


def _cnn_model(params, input_hw, cfg):
    return ModelParams(
        "small_cnn",
        {"tensors": [p.copy() for p in params], "input_hw": tuple(int(v) for v in input_hw)},
        cfg.digest(),
    )


def _sigmoid(z: float) -> float:
    return float(1.0 / (1.0 + np.exp(-np.clip(z, -500, 500))))


def predict(model: ModelParams, inp) -> Prediction:
    """Deterministic label + infested-probability-style score."""
    if model.variant in ("logistic", "linear_svm"):
        if not isinstance(inp, FeatureVector):
            raise ValueError(f"{model.variant} expects a FeatureVector")
        w = model.params["weights"]
        if inp.values.size != w.size:
            raise ValueError(
                f"dimension mismatch: model {w.size}, input {inp.values.size}"
            )
        score = _sigmoid(float(inp.values @ w + model.params["bias"]))
        return Prediction(LABELS[int(score >= 0.5)], score)
    if model.variant == "decision_tree":
        _check_vector(model.params["feature"], inp)
        score = float(trees.tree_scores(model.params, inp.values)[0])
        return Prediction(LABELS[int(score >= 0.5)], score)
    if model.variant == "random_forest":
        votes = []
        for tree in model.params["trees"]:
            _check_vector(tree["feature"], inp)
            votes.append(trees.tree_scores(tree, inp.values)[0] >= 0.5)
        score = float(np.mean(votes))
        return Prediction(LABELS[int(score >= 0.5)], score)
    if model.variant == "small_cnn":
        if not isinstance(inp, CombinedImage):
            raise ValueError("small_cnn expects a CombinedImage")
        x = cnn_mod.images_to_batch([inp])
        if x.shape[2:] != tuple(model.params["input_hw"]):
            raise ValueError(
                f"image shape {x.shape[2:]} does not match trained "
                f"input {tuple(model.params['input_hw'])}"
            )
        probs = cnn_mod.forward(model.params["tensors"], x)[0]
        score = float(probs[1])
        return Prediction(LABELS[int(np.argmax(probs))], score)
    raise ValueError(f"unknown model variant {model.variant!r}")


def _check_vector(feature_array, inp):
    if not isinstance(inp, FeatureVector):
        raise ValueError("tree models expect a FeatureVector")
    used = feature_array[feature_array >= 0]
    if used.size and used.max() >= inp.values.size:
        raise ValueError(
            f"dimension mismatch: tree references feature {int(used.max())}, "
            f"input has {inp.values.size}"
        )


# --- binary model envelope ------------------------------------------------
# PSMD v1: magic, u32 version, u8 variant tag, u16 digest length + digest,
# then a variant payload of little-endian i64/f64 arrays.


def save_model(model: ModelParams, path) -> Path:
    blob = MODEL_MAGIC + struct.pack("<IB", MODEL_VERSION, _VARIANT_TAGS[model.variant])
    digest = model.train_config_digest.encode()
    blob += struct.pack("<H", len(digest)) + digest
    blob += _payload(model)
    path = Path(path)
    path.write_bytes(blob)
    return path


def _payload(model):
    v = model.variant
    if v in ("logistic", "linear_svm"):
        w = np.asarray(model.params["weights"], dtype="<f8")
        return struct.pack("<Q", w.size) + w.tobytes() + struct.pack("<d", model.params["bias"])
    if v == "decision_tree":
        return _tree_payload(model.params)
    if v == "random_forest":
        out = struct.pack("<Q", len(model.params["trees"]))
        return out + b"".join(_tree_payload(t) for t in model.params["trees"])
    if v == "small_cnn":
        h, w = model.params["input_hw"]
        out = struct.pack("<QQQ", h, w, len(model.params["tensors"]))
        for t in model.params["tensors"]:
            t = np.asarray(t, dtype="<f8")
            out += struct.pack("<B", t.ndim) + struct.pack(f"<{t.ndim}Q", *t.shape)
            out += t.tobytes()
        return out
    raise ValueError(f"unknown model variant {v!r}")


def _tree_payload(tree):
    n = tree["feature"].size
    out = struct.pack("<Q", n)
    out += tree["feature"].astype("<i8").tobytes()
    out += tree["threshold"].astype("<f8").tobytes()
    out += tree["left"].astype("<i8").tobytes()
    out += tree["right"].astype("<i8").tobytes()
    out += tree["score"].astype("<f8").tobytes()
    return out


class _Reader:
    def __init__(self, blob):
        self.blob = blob
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.blob):
            raise ModelFormatError("model file truncated")
        out = self.blob[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def array(self, dtype, count):
        return np.frombuffer(self.take(8 * count), dtype=dtype).copy()


def load_model(path) -> ModelParams:
    r = _Reader(Path(path).read_bytes())
    if r.take(4) != MODEL_MAGIC:
        raise ModelFormatError(f"{path}: not a palmsonic model file")
    (version, tag) = r.unpack("<IB")
    if version != MODEL_VERSION:
        raise ModelFormatError(
            f"{path}: model format version {version} not supported (expected {MODEL_VERSION})"
        )
    if tag not in _TAG_VARIANTS:
        raise ModelFormatError(f"{path}: unknown variant tag {tag}")
    variant = _TAG_VARIANTS[tag]
    (dlen,) = r.unpack("<H")
    digest = r.take(dlen).decode()

    if variant in ("logistic", "linear_svm"):
        (dim,) = r.unpack("<Q")
        w = r.array("<f8", dim)
        (bias,) = r.unpack("<d")
        params = {"weights": w, "bias": bias}
    elif variant == "decision_tree":
        params = _read_tree(r)
    elif variant == "random_forest":
        (n_trees,) = r.unpack("<Q")
        params = {"trees": [_read_tree(r) for _ in range(n_trees)]}
    else:
        h, w, n_tensors = r.unpack("<QQQ")
        tensors = []
        for _ in range(n_tensors):
            (ndim,) = r.unpack("<B")
            shape = r.unpack(f"<{ndim}Q")
            count = int(np.prod(shape)) if ndim else 1
            tensors.append(r.array("<f8", count).reshape(shape))
        params = {"tensors": tensors, "input_hw": (int(h), int(w))}
    return ModelParams(variant, params, digest)


def _read_tree(r):
    (n,) = r.unpack("<Q")
    return {
        "feature": r.array("<i8", n),
        "threshold": r.array("<f8", n),
        "left": r.array("<i8", n),
        "right": r.array("<i8", n),
        "score": r.array("<f8", n),
    }
