"""Dense network mathematics: Glorot init, forward/backward, BCE, momentum.

Parameters and activations are float32 (all functions are dtype-generic, so
tests can run the same code in float64); loss and accuracy accumulate in
float64. Hidden layers are ReLU with subgradient 0 at 0, the output unit is
a sigmoid clamped away from {0, 1} before the loss.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.special import expit

PROB_EPS = 1e-7

Params = list[tuple[np.ndarray, np.ndarray]]  # (weights, biases) per layer


def glorot_uniform(fan_in: int, fan_out: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform on (-limit, limit) with limit = sqrt(6 / (fan_in + fan_out))."""
    if fan_in < 1 or fan_out < 1:
        raise ValueError("fan_in and fan_out must be >= 1")
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out)).astype(np.float32)


def init_params(layer_dims: list[int], rng: np.random.Generator) -> Params:
    """Glorot-uniform weights, zero biases, for dims [in, h1, ..., 1]."""
    if len(layer_dims) < 2 or layer_dims[-1] != 1:
        raise ValueError("layer_dims must chain to an output width of 1")
    params = []
    for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
        params.append((glorot_uniform(fan_in, fan_out, rng), np.zeros(fan_out, dtype=np.float32)))
    return params


def layer_dims(params: Params) -> list[int]:
    return [params[0][0].shape[0]] + [w.shape[1] for w, _ in params]


def _forward_full(params: Params, x: np.ndarray):
    """Forward pass keeping what backprop needs.

    Returns (raw probabilities, clamped probabilities, per-layer inputs,
    hidden ReLU masks).
    """
    acts = [x]
    masks = []
    a = x
    for w, b in params[:-1]:
        z = a @ w + b
        mask = z > 0
        a = np.maximum(z, 0)
        masks.append(mask)
        acts.append(a)
    w, b = params[-1]
    z = a @ w + b
    p_raw = expit(z[:, 0])
    p = np.clip(p_raw, PROB_EPS, 1.0 - PROB_EPS)
    return p_raw, p, acts, masks


def forward(params: Params, x: np.ndarray) -> np.ndarray:
    """Probabilities in [eps, 1-eps] for each row of ``x`` (already scaled)."""
    if x.ndim != 2 or x.shape[1] != params[0][0].shape[0]:
        raise ValueError(
            f"batch of shape {x.shape} does not match input width {params[0][0].shape[0]}"
        )
    return _forward_full(params, x)[1]


def bce_loss(y: np.ndarray, y_hat: np.ndarray) -> float:
    """Mean binary cross-entropy in nats, accumulated in float64."""
    if y.shape != y_hat.shape:
        raise ValueError(f"label/prediction length mismatch: {y.shape} vs {y_hat.shape}")
    y64 = np.asarray(y, dtype=np.float64)
    p64 = np.asarray(y_hat, dtype=np.float64)
    return float(-np.mean(y64 * np.log(p64) + (1.0 - y64) * np.log1p(-p64)))


def _grads_from_cache(params: Params, y, p_raw, p, acts, masks) -> Params:
    n = p.shape[0]
    # the clamp zeroes the gradient where it is active
    live = (p_raw > PROB_EPS) & (p_raw < 1.0 - PROB_EPS)
    delta = (np.where(live, p - y, 0) / n)[:, None]
    grads: list = [None] * len(params)
    for layer in range(len(params) - 1, -1, -1):
        w, _ = params[layer]
        grads[layer] = (acts[layer].T @ delta, delta.sum(axis=0))
        if layer > 0:
            delta = (delta @ w.T) * masks[layer - 1]
    return grads


def backward(params: Params, x: np.ndarray, y: np.ndarray) -> Params:
    """Exact mean-over-batch gradients of bce_loss(forward(x)) w.r.t. params."""
    p_raw, p, acts, masks = _forward_full(params, x)
    return _grads_from_cache(params, np.asarray(y, dtype=p.dtype), p_raw, p, acts, masks)


def loss_grads_correct(params: Params, x: np.ndarray, y: np.ndarray):
    """One fused pass for the training loop.

    Returns (sum of per-sample losses as float64, count of correct
    predictions under the p >= 0.5 rule, gradients).
    """
    p_raw, p, acts, masks = _forward_full(params, x)
    y_cast = np.asarray(y, dtype=p.dtype)
    grads = _grads_from_cache(params, y_cast, p_raw, p, acts, masks)
    loss_sum = bce_loss(y_cast, p) * len(y)
    correct = int(((p >= 0.5) == (y_cast >= 0.5)).sum())
    return loss_sum, correct, grads


def sgd_momentum_step(
    params: Params,
    grads: Params,
    velocity: Params,
    lr: float,
    momentum: float = 0.9,
    nesterov: bool = True,
) -> None:
    """In-place update: v <- mu*v - lr*g; theta += mu*v - lr*g (look-ahead form).

    With nesterov=False the classical update theta += v is applied; with
    momentum 0 both reduce to plain SGD.
    """
    for (w, b), (dw, db), (vw, vb) in zip(params, grads, velocity):
        for theta, g, v in ((w, dw, vw), (b, db, vb)):
            v *= momentum
            v -= lr * g
            if nesterov:
                theta += momentum * v
                theta -= lr * g
            else:
                theta += v


def zero_velocity(params: Params) -> Params:
    return [(np.zeros_like(w), np.zeros_like(b)) for w, b in params]


def clone_params(params: Params) -> Params:
    return [(w.copy(), b.copy()) for w, b in params]


# checkpoint file: one text header line, then the float32 little-endian
# payload (weights row-major, then biases, layer by layer)

_CKPT_TAG = "mlp-checkpoint"
_CKPT_VERSION = 1


def save_checkpoint(path: str | Path, params: Params, feature_scale: float = 255.0) -> None:
    dims = ",".join(str(d) for d in layer_dims(params))
    header = (
        f"{_CKPT_TAG} v{_CKPT_VERSION} dims={dims} hidden=relu output=sigmoid "
        f"feature_scale={feature_scale!r}\n"
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        for w, b in params:
            fh.write(np.ascontiguousarray(w, dtype="<f4").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f4").tobytes())


def load_checkpoint(path: str | Path) -> tuple[Params, float]:
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").split()
        payload = fh.read()
    if len(header) < 6 or header[0] != _CKPT_TAG or header[1] != f"v{_CKPT_VERSION}":
        raise ValueError(f"{path}: not a supported checkpoint file")
    info = dict(part.split("=", 1) for part in header[2:])
    dims = [int(d) for d in info["dims"].split(",")]
    feature_scale = float(info["feature_scale"])
    flat = np.frombuffer(payload, dtype="<f4")
    expected = sum(a * b + b for a, b in zip(dims[:-1], dims[1:]))
    if flat.size != expected:
        raise ValueError(f"{path}: payload holds {flat.size} floats, expected {expected}")
    params = []
    at = 0
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        w = flat[at : at + fan_in * fan_out].reshape(fan_in, fan_out).copy()
        at += fan_in * fan_out
        b = flat[at : at + fan_out].copy()
        at += fan_out
        params.append((w, b))
    return params, feature_scale
