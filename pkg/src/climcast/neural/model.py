"""Whole-model forward/backward, loss and the finite-difference oracle."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigurationError, ShapeError
from .layers import (
    attention_backward,
    attention_forward,
    dense_head_backward,
    dense_head_forward,
    gru_backward,
    gru_forward,
    lstm_backward,
    lstm_forward,
)
from .params import ModelParams, tensor_shapes


def _as_batch(x_seq) -> tuple[np.ndarray, bool]:
    X = np.asarray(x_seq, dtype=float)
    if X.ndim == 2:
        return X[None], True
    if X.ndim != 3:
        raise ShapeError(f"x_seq must be (T, F) or (B, T, F), got shape {X.shape}")
    return X, False


def model_forward(x_seq, params: ModelParams, mode: str = "eval", rng: np.random.Generator | None = None):
    """Predict from sequences; a single (T, F) input returns a float, a batch returns (B,)."""
    if mode not in ("train", "eval"):
        raise ConfigurationError(f"mode must be 'train' or 'eval', got {mode!r}")
    X, single = _as_batch(x_seq)
    if X.shape[2] != params.dims.F:
        raise ShapeError(f"x_seq has {X.shape[2]} features, params expect F={params.dims.F}")
    expected = set(tensor_shapes(params.variant, params.dims))
    if set(params.tensors) != expected:
        raise ConfigurationError(f"parameters do not match variant {params.variant!r}")
    t = params.tensors
    cache = {"variant": params.variant, "mode": mode}
    if params.variant == "gru":
        H, cache["rnn"] = gru_forward(X, t)
    else:
        H, cache["rnn"] = lstm_forward(X, t)
    if params.variant == "attention_lstm":
        context, alpha, cache["attention"] = attention_forward(H, t)
        cache["alpha"] = alpha
    else:
        context = H[:, -1]
    cache["H"] = H
    y, cache["head"] = dense_head_forward(context, t, mode, rng, params.head_dropout_rate)
    return (float(y[0]) if single else y), cache


def backward(cache: dict, dpred, params: ModelParams) -> dict[str, np.ndarray]:
    """Reverse-mode gradients of every parameter tensor given dLoss/dprediction."""
    if cache.get("variant") != params.variant:
        raise ConfigurationError(
            f"cache from a {cache.get('variant')!r} forward cannot drive {params.variant!r} params")
    t = params.tensors
    dy = np.atleast_1d(np.asarray(dpred, dtype=float))
    H = cache["H"]
    if dy.shape[0] != H.shape[0]:
        raise ShapeError(f"loss gradient has {dy.shape[0]} entries for a batch of {H.shape[0]}")
    dcontext, grads = dense_head_backward(dy, cache["head"], t)
    if params.variant == "attention_lstm":
        dH, g = attention_backward(dcontext, cache["attention"], t)
        grads.update(g)
    else:
        dH = np.zeros_like(H)
        dH[:, -1] = dcontext
    if params.variant == "gru":
        grads.update(gru_backward(dH, cache["rnn"]))
    else:
        grads.update(lstm_backward(dH, cache["rnn"]))
    return {name: grads[name] for name in params.tensors}


def mse_loss(pred, target) -> tuple[float, np.ndarray]:
    p = np.atleast_1d(np.asarray(pred, dtype=float))
    y = np.atleast_1d(np.asarray(target, dtype=float))
    if p.shape != y.shape or p.size == 0:
        raise ShapeError(f"pred shape {p.shape} and target shape {y.shape} must match and be non-empty")
    diff = p - y
    return float(np.mean(diff * diff)), 2.0 * diff / diff.size


def loss_and_grads(X, y, params: ModelParams, mode: str = "eval", rng=None):
    pred, cache = model_forward(X, params, mode, rng)
    loss, dpred = mse_loss(pred, y)
    return loss, backward(cache, dpred, params)


def finite_difference_grad(x_seq, params: ModelParams, target, eps: float = 1e-5) -> dict[str, np.ndarray]:
    """Central differences of the eval-mode MSE for every scalar parameter."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    X, _ = _as_batch(x_seq)
    y = np.atleast_1d(np.asarray(target, dtype=float))
    probe = params.copy()

    def loss() -> float:
        pred, _ = model_forward(X, probe, "eval")
        return mse_loss(pred, y)[0]

    grads = {}
    for name, arr in probe.tensors.items():
        g = np.zeros_like(arr)
        flat, gflat = arr.reshape(-1), g.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + eps
            up = loss()
            flat[j] = orig - eps
            down = loss()
            flat[j] = orig
            gflat[j] = (up - down) / (2.0 * eps)
        grads[name] = g
    return grads


def max_relative_error(analytic: dict, numeric: dict, floor: float = 1e-6) -> dict[str, float]:
    """Per-tensor max of ``|a - n| / max(|a|, |n|, floor)``."""
    out = {}
    for name in analytic:
        a, n = analytic[name], numeric[name]
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        out[name] = float(np.max(np.abs(a - n) / denom)) if a.size else 0.0
    return out
