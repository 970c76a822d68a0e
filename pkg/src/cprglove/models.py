"""Lightweight statistical classifiers with a uniform train/predict/evaluate
interface: linear discriminant analysis, ridge regression on one-hot targets,
and multinomial logistic regression. All three are implemented directly on
numpy linear algebra; no learning framework involved.
"""

from __future__ import annotations

import base64
import json
import time
from dataclasses import dataclass, field

import numpy as np

from .core import CprgloveError
from .preprocess import PcaProjection, apply_pca

BUNDLE_VERSION = 1


class MissingClass(CprgloveError):
    pass


class NonFinite(CprgloveError):
    pass


class SingularSystem(CprgloveError):
    pass


class DimensionMismatch(CprgloveError):
    pass


@dataclass
class TrainConfig:
    lda_shrinkage: float = 1e-6
    ridge_lambda: float = 1.0
    logistic_lr: float = 0.1
    logistic_max_iter: int = 2000
    logistic_tol: float = 1e-8
    seed: int = 0


@dataclass
class TrainedModel:
    method: str                 # "lda" | "ridge" | "logistic"
    task: str                   # "force" | "pose"
    classes: list
    params: dict                # method-specific dense arrays
    param_count: int
    trained_on: str = ""
    pca: PcaProjection | None = None
    predict_times_ms: list = field(default_factory=list, repr=False)


def _check_matrix(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if not np.all(np.isfinite(X)):
        raise NonFinite("feature matrix contains non-finite values")
    if X.ndim != 2 or X.shape[0] != len(y):
        raise DimensionMismatch("X must be n x d with one label per row")
    return X, y


def _one_hot(y, classes):
    idx = {c: i for i, c in enumerate(classes)}
    Y = np.zeros((len(y), len(classes)))
    for n, label in enumerate(y):
        Y[n, idx[label]] = 1.0
    return Y


def _fit_lda(X, y, classes, cfg):
    n, d = X.shape
    means = np.stack([X[y == c].mean(axis=0) for c in classes])
    priors = np.array([(y == c).sum() / n for c in classes])
    pooled = np.zeros((d, d))
    for i, c in enumerate(classes):
        Xc = X[y == c] - means[i]
        pooled += Xc.T @ Xc
    pooled /= max(n - len(classes), 1)
    reg = cfg.lda_shrinkage * (np.trace(pooled) / d)
    if reg == 0.0 and cfg.lda_shrinkage > 0.0:
        reg = cfg.lda_shrinkage  # zero-variance data still needs a usable system
    cov = pooled + reg * np.eye(d)
    try:
        weights = np.linalg.solve(cov, means.T)  # (d, C)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    bias = -0.5 * np.einsum("cd,dc->c", means, weights) + np.log(priors)
    return {
        "means": means,
        "pooled_cov": cov,
        "priors": priors,
        "weights": weights,
        "bias": bias,
    }, len(classes) * d + d * (d + 1) // 2 + len(classes)


def _fit_ridge(X, y, classes, cfg):
    n, d = X.shape
    if cfg.ridge_lambda <= 0:
        raise SingularSystem("ridge_lambda must be positive")
    Y = _one_hot(y, classes)
    A = X.T @ X + cfg.ridge_lambda * np.eye(d)
    W = np.linalg.solve(A, X.T @ Y)  # (d, C)
    return {"weights": W}, d * len(classes)


def _softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _fit_logistic(X, y, classes, cfg):
    n, d = X.shape
    C = len(classes)
    Y = _one_hot(y, classes)
    Xb = np.hstack([X, np.ones((n, 1))])
    W = np.zeros((d + 1, C))
    lr = cfg.logistic_lr

    def loss_of(Wm):
        P = _softmax(Xb @ Wm)
        return -np.mean(np.log(np.clip(P[Y.astype(bool)], 1e-300, None)))

    loss = loss_of(W)
    loss_trace = [loss]
    for _ in range(cfg.logistic_max_iter):
        P = _softmax(Xb @ W)
        grad = Xb.T @ (P - Y) / n
        gnorm = np.linalg.norm(grad)
        if gnorm < cfg.logistic_tol:
            break
        # backtracking keeps the loss trace non-increasing
        while True:
            W_new = W - lr * grad
            new_loss = loss_of(W_new)
            if new_loss <= loss or lr < 1e-12:
                break
            lr *= 0.5
        if new_loss > loss:
            break
        W, loss = W_new, new_loss
        loss_trace.append(loss)
    return {
        "weights": W[:-1],
        "bias": W[-1],
        "loss_trace": np.array(loss_trace),
    }, (d + 1) * C


_FITTERS = {"lda": _fit_lda, "ridge": _fit_ridge, "logistic": _fit_logistic}


def fit(method: str, task: str, X, y, cfg: TrainConfig | None = None,
        pca: PcaProjection | None = None, trained_on: str = "") -> TrainedModel:
    """Train one classifier. X is n x d (already PCA-reduced if `pca` is
    given, in which case predict() applies the same projection to raw
    inputs). Every class must appear in y with at least two samples each."""
    cfg = cfg or TrainConfig()
    if method not in _FITTERS:
        raise ValueError(f"unknown method {method!r}")
    X, y = _check_matrix(X, y)
    classes = sorted(set(y.tolist()))
    if len(classes) < 2:
        raise MissingClass("need at least two classes")
    if X.shape[0] < 2 * len(classes):
        raise MissingClass(
            f"need at least {2 * len(classes)} samples for {len(classes)} classes"
        )
    np.random.seed(cfg.seed)
    params, param_count = _FITTERS[method](X, np.asarray(y), classes, cfg)
    return TrainedModel(
        method=method,
        task=task,
        classes=classes,
        params=params,
        param_count=param_count,
        trained_on=trained_on,
        pca=pca,
    )


def scores(model: TrainedModel, x) -> np.ndarray:
    """Per-class decision scores for one (raw) feature vector."""
    x = np.asarray(x, dtype=np.float64)
    if model.pca is not None:
        x = apply_pca(model.pca, x)
    if not np.all(np.isfinite(x)):
        raise NonFinite("input contains non-finite values")
    p = model.params
    d = p["weights"].shape[0]
    if x.shape[-1] != d:
        raise DimensionMismatch(f"expected {d} features, got {x.shape[-1]}")
    s = x @ p["weights"]
    if "bias" in p:
        s = s + p["bias"]
    return s


def predict(model: TrainedModel, x):
    """Returns (label, {class: score}). Score ties break toward the lowest
    class index; wall-clock per call is recorded for latency reporting."""
    t0 = time.perf_counter()
    s = scores(model, x)
    label = model.classes[int(np.argmax(s))]  # argmax returns the first max
    model.predict_times_ms.append((time.perf_counter() - t0) * 1e3)
    return label, dict(zip(model.classes, s.tolist()))


def evaluate(model: TrainedModel, X, y) -> dict:
    X, y = _check_matrix(X, y)
    C = len(model.classes)
    idx = {c: i for i, c in enumerate(model.classes)}
    confusion = np.zeros((C, C), dtype=int)
    times = []
    correct = 0
    for xi, yi in zip(X, y):
        n_before = len(model.predict_times_ms)
        label, _ = predict(model, xi)
        times.append(model.predict_times_ms[n_before])
        confusion[idx[yi], idx[label]] += 1
        correct += label == yi
    return {
        "accuracy": correct / len(y),
        "confusion": confusion,
        "classes": list(model.classes),
        "inference_ms_mean": float(np.mean(times)),
        "inference_ms_std": float(np.std(times)),
    }


# ---------------------------------------------------------------------------
# Bundle persistence: JSON header, base64 little-endian float64 payloads.

def _enc(arr) -> dict:
    arr = np.ascontiguousarray(np.asarray(arr, dtype="<f8"))
    return {"shape": list(arr.shape), "data": base64.b64encode(arr.tobytes()).decode()}


def _dec(obj) -> np.ndarray:
    arr = np.frombuffer(base64.b64decode(obj["data"]), dtype="<f8")
    return arr.reshape(obj["shape"]).copy()


def save_bundle(model: TrainedModel, path):
    doc = {
        "v": BUNDLE_VERSION,
        "method": model.method,
        "task": model.task,
        "classes": list(model.classes),
        "param_count": model.param_count,
        "trained_on": model.trained_on,
        "params": {k: _enc(v) for k, v in model.params.items()},
    }
    if model.pca is not None:
        doc["pca"] = {
            "mean": _enc(model.pca.mean),
            "components": _enc(model.pca.components),
            "explained_ratio": _enc(model.pca.explained_ratio),
        }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_bundle(path) -> TrainedModel:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("v") != BUNDLE_VERSION:
        raise ValueError(f"unsupported bundle version {doc.get('v')!r}")
    pca = None
    if "pca" in doc:
        pca = PcaProjection(
            mean=_dec(doc["pca"]["mean"]),
            components=_dec(doc["pca"]["components"]),
            explained_ratio=_dec(doc["pca"]["explained_ratio"]),
        )
    return TrainedModel(
        method=doc["method"],
        task=doc["task"],
        classes=doc["classes"],
        params={k: _dec(v) for k, v in doc["params"].items()},
        param_count=doc["param_count"],
        trained_on=doc["trained_on"],
        pca=pca,
    )
