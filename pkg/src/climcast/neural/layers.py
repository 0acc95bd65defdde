"""Forward and reverse-mode passes for the recurrent cells, attention and dense head.

All passes operate on a leading batch axis; samples never interact, so a
batch is equivalent to looping over samples and summing.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError


def sigmoid(z: np.ndarray) -> np.ndarray:
    # tanh form never overflows
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _check(name: str, arr: np.ndarray, shape: tuple) -> None:
    if arr.shape != shape:
        raise ShapeError(f"{name} has shape {arr.shape}, expected {shape}")


def _init_state(name: str, state, B: int, d_h: int) -> np.ndarray:
    if state is None:
        return np.zeros((B, d_h))
    state = np.asarray(state, dtype=float)
    if state.ndim == 1:
        state = np.broadcast_to(state, (B, d_h)).copy()
    _check(name, state, (B, d_h))
    return state


def lstm_forward(X: np.ndarray, tensors: dict, h0=None, C0=None):
    """Run the LSTM over ``X`` of shape (B, T, F); returns hidden states (B, T, d_h) and a cache."""
    B, T, F = X.shape
    d_h = tensors["b_f"].shape[0]
    W = np.concatenate([tensors["W_f"], tensors["W_i"], tensors["W_C"], tensors["W_o"]], axis=0)
    b = np.concatenate([tensors["b_f"], tensors["b_i"], tensors["b_C"], tensors["b_o"]])
    if W.shape[1] != d_h + F:
        raise ShapeError(f"x_seq has {F} features but W_f expects {W.shape[1] - d_h} (W_f shape {tensors['W_f'].shape})")
    h = _init_state("h0", h0, B, d_h)
    C = _init_state("C0", C0, B, d_h)
    H = np.empty((B, T, d_h))
    HX = np.empty((B, T, d_h + F))
    gates = np.empty((B, T, 4, d_h))
    Cs = np.empty((B, T + 1, d_h))
    Cs[:, 0] = C
    for t in range(T):
        hx = np.concatenate([h, X[:, t]], axis=1)
        z = hx @ W.T + b
        f = sigmoid(z[:, :d_h])
        i = sigmoid(z[:, d_h:2 * d_h])
        g = np.tanh(z[:, 2 * d_h:3 * d_h])
        o = sigmoid(z[:, 3 * d_h:])
        C = f * C + i * g
        h = o * np.tanh(C)
        HX[:, t] = hx
        gates[:, t, 0], gates[:, t, 1], gates[:, t, 2], gates[:, t, 3] = f, i, g, o
        Cs[:, t + 1] = C
        H[:, t] = h
    return H, {"HX": HX, "gates": gates, "C": Cs, "W": W, "d_h": d_h}


def lstm_backward(dH: np.ndarray, cache: dict) -> dict[str, np.ndarray]:
    HX, gates, Cs, W, d_h = cache["HX"], cache["gates"], cache["C"], cache["W"], cache["d_h"]
    B, T, _ = dH.shape
    dZ = np.empty((B, T, 4 * d_h))
    dh_next = np.zeros((B, d_h))
    dc_next = np.zeros((B, d_h))
    for t in reversed(range(T)):
        f, i, g, o = gates[:, t, 0], gates[:, t, 1], gates[:, t, 2], gates[:, t, 3]
        tc = np.tanh(Cs[:, t + 1])
        dh = dH[:, t] + dh_next
        dC = dc_next + dh * o * (1.0 - tc * tc)
        dZ[:, t, :d_h] = dC * Cs[:, t] * f * (1.0 - f)
        dZ[:, t, d_h:2 * d_h] = dC * g * i * (1.0 - i)
        dZ[:, t, 2 * d_h:3 * d_h] = dC * i * (1.0 - g * g)
        dZ[:, t, 3 * d_h:] = dh * tc * o * (1.0 - o)
        dc_next = dC * f
        dh_next = dZ[:, t] @ W[:, :d_h]
    flatZ = dZ.reshape(B * T, 4 * d_h)
    dW = flatZ.T @ HX.reshape(B * T, -1)
    db = flatZ.sum(axis=0)
    grads = {}
    for k, gname in enumerate(("f", "i", "C", "o")):
        grads[f"W_{gname}"] = dW[k * d_h:(k + 1) * d_h]
        grads[f"b_{gname}"] = db[k * d_h:(k + 1) * d_h]
    return grads


def gru_forward(X: np.ndarray, tensors: dict, h0=None):
    """Standard GRU: update gate z, reset gate r, candidate n over ``[r*h, x]``."""
    B, T, F = X.shape
    d_h = tensors["b_z"].shape[0]
    Wzr = np.concatenate([tensors["W_z"], tensors["W_r"]], axis=0)
    bzr = np.concatenate([tensors["b_z"], tensors["b_r"]])
    Wn, bn = tensors["W_n"], tensors["b_n"]
    if Wzr.shape[1] != d_h + F:
        raise ShapeError(f"x_seq has {F} features but W_z expects {Wzr.shape[1] - d_h} (W_z shape {tensors['W_z'].shape})")
    h = _init_state("h0", h0, B, d_h)
    H = np.empty((B, T, d_h))
    Hprev = np.empty((B, T, d_h))
    zs = np.empty((B, T, d_h))
    rs = np.empty((B, T, d_h))
    ns = np.empty((B, T, d_h))
    for t in range(T):
        x = X[:, t]
        Hprev[:, t] = h
        zr = sigmoid(np.concatenate([h, x], axis=1) @ Wzr.T + bzr)
        z, r = zr[:, :d_h], zr[:, d_h:]
        n = np.tanh(np.concatenate([r * h, x], axis=1) @ Wn.T + bn)
        h = (1.0 - z) * h + z * n
        zs[:, t], rs[:, t], ns[:, t], H[:, t] = z, r, n, h
    return H, {"X": X, "Hprev": Hprev, "z": zs, "r": rs, "n": ns, "Wzr": Wzr, "Wn": Wn, "d_h": d_h}


def gru_backward(dH: np.ndarray, cache: dict) -> dict[str, np.ndarray]:
    X, Hprev, zs, rs, ns = cache["X"], cache["Hprev"], cache["z"], cache["r"], cache["n"]
    Wzr, Wn, d_h = cache["Wzr"], cache["Wn"], cache["d_h"]
    B, T, F = X.shape
    dZR = np.empty((B, T, 2 * d_h))
    dN = np.empty((B, T, d_h))
    dh_next = np.zeros((B, d_h))
    for t in reversed(range(T)):
        z, r, n, hp = zs[:, t], rs[:, t], ns[:, t], Hprev[:, t]
        dh = dH[:, t] + dh_next
        dn_pre = dh * z * (1.0 - n * n)
        dz_pre = dh * (n - hp) * z * (1.0 - z)
        d_rh = dn_pre @ Wn[:, :d_h]
        dr_pre = d_rh * hp * r * (1.0 - r)
        dZR[:, t, :d_h] = dz_pre
        dZR[:, t, d_h:] = dr_pre
        dN[:, t] = dn_pre
        dh_next = dh * (1.0 - z) + d_rh * r + dZR[:, t] @ Wzr[:, :d_h]
    HXzr = np.concatenate([Hprev, X], axis=2).reshape(B * T, -1)
    HXn = np.concatenate([rs * Hprev, X], axis=2).reshape(B * T, -1)
    flatZR = dZR.reshape(B * T, -1)
    flatN = dN.reshape(B * T, -1)
    dWzr = flatZR.T @ HXzr
    dbzr = flatZR.sum(axis=0)
    return {
        "W_z": dWzr[:d_h], "W_r": dWzr[d_h:], "W_n": flatN.T @ HXn,
        "b_z": dbzr[:d_h], "b_r": dbzr[d_h:], "b_n": flatN.sum(axis=0),
    }


def softmax(scores: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = scores - scores.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def attention_forward(H: np.ndarray, tensors: dict):
    """Additive attention over time; returns context (B, d_h), weights (B, T) and cache."""
    W_h, b_h, u = tensors["W_h"], tensors["b_h"], tensors["u"]
    if H.shape[-1] != W_h.shape[0]:
        raise ShapeError(f"hidden states have width {H.shape[-1]} but W_h has shape {W_h.shape}")
    E = np.tanh(H @ W_h + b_h)              # (B, T, d_a)
    scores = E @ u                          # (B, T)
    alpha = softmax(scores, axis=1)
    context = np.einsum("bt,btd->bd", alpha, H)
    return context, alpha, {"H": H, "E": E, "alpha": alpha}


def attention_backward(dcontext: np.ndarray, cache: dict, tensors: dict):
    """Returns (gradient w.r.t. hidden states, parameter gradients)."""
    H, E, alpha = cache["H"], cache["E"], cache["alpha"]
    W_h, u = tensors["W_h"], tensors["u"]
    dH = alpha[:, :, None] * dcontext[:, None, :]
    dalpha = np.einsum("btd,bd->bt", H, dcontext)
    dscores = alpha * (dalpha - (alpha * dalpha).sum(axis=1, keepdims=True))
    du = np.einsum("bt,bta->a", dscores, E)
    dpre = dscores[:, :, None] * u * (1.0 - E * E)
    flat = dpre.reshape(-1, dpre.shape[-1])
    dW_h = H.reshape(-1, H.shape[-1]).T @ flat
    db_h = flat.sum(axis=0)
    dH += dpre @ W_h.T
    return dH, {"W_h": dW_h, "b_h": db_h, "u": du}


def dropout_mask(rng: np.random.Generator, shape: tuple, rate: float) -> np.ndarray:
    """Inverted dropout: kept units are scaled by 1/(1-rate)."""
    if rate <= 0.0:
        return np.ones(shape)
    return (rng.random(shape) >= rate) / (1.0 - rate)


def dense_head_forward(context: np.ndarray, tensors: dict, mode: str = "eval",
                       rng: np.random.Generator | None = None, rate: float = 0.0):
    """Dense(32, ReLU) -> dropout -> Dense(16, ReLU) -> Dense(1); returns (B,) predictions."""
    W1, b1, W2, b2, W3, b3 = (tensors[k] for k in ("W_1", "b_1", "W_2", "b_2", "W_3", "b_3"))
    if context.shape[-1] != W1.shape[1]:
        raise ShapeError(f"context has width {context.shape[-1]} but W_1 has shape {W1.shape}")
    a1 = context @ W1.T + b1
    z1 = np.maximum(a1, 0.0)
    if mode == "train" and rate > 0.0:
        if rng is None:
            raise ValueError("train-mode dropout needs an rng")
        mask = dropout_mask(rng, z1.shape, rate)
    else:
        mask = None
    z1d = z1 * mask if mask is not None else z1
    a2 = z1d @ W2.T + b2
    z2 = np.maximum(a2, 0.0)
    y = (z2 @ W3.T)[:, 0] + b3[0]
    return y, {"c": context, "a1": a1, "z1d": z1d, "mask": mask, "a2": a2, "z2": z2}


def dense_head_backward(dy: np.ndarray, cache: dict, tensors: dict):
    W1, W2, W3 = tensors["W_1"], tensors["W_2"], tensors["W_3"]
    c, a1, z1d, mask, a2, z2 = (cache[k] for k in ("c", "a1", "z1d", "mask", "a2", "z2"))
    g = {"W_3": dy[None, :] @ z2, "b_3": np.array([dy.sum()])}
    da2 = (dy[:, None] @ W3) * (a2 > 0)
    g["W_2"] = da2.T @ z1d
    g["b_2"] = da2.sum(axis=0)
    dz1 = da2 @ W2
    if mask is not None:
        dz1 = dz1 * mask
    da1 = dz1 * (a1 > 0)
    g["W_1"] = da1.T @ c
    g["b_1"] = da1.sum(axis=0)
    return da1 @ W1, g
