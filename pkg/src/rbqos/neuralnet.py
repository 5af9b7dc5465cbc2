"""Dense feed-forward network with manual backprop and Adam, float64.

Small on purpose: the policy and multiplier networks need only affine
layers, Softplus/ReLU activations, fixed input standardization, and exact
reverse-mode gradients that survive a finite-difference audit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

ACTIVATIONS = ("softplus", "relu", "linear")


def _act(name: str, z: np.ndarray) -> np.ndarray:
    if name == "softplus":
        return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "linear":
        return z
    raise ValueError(f"unknown activation {name!r}")


def _dact(name: str, z: np.ndarray) -> np.ndarray:
    if name == "softplus":
        e = np.exp(-np.abs(z))
        return np.where(z >= 0, 1.0, e) / (1.0 + e)
    if name == "relu":
        return (z > 0).astype(float)
    if name == "linear":
        return np.ones_like(z)
    raise ValueError(f"unknown activation {name!r}")


@dataclass
class NetworkParams:
    weights: list    # weights[i]: (dims[i+1], dims[i])
    biases: list
    activations: list
    input_mean: np.ndarray
    input_std: np.ndarray
    adam_m: list = field(default_factory=list)   # paired (mW, mb) per layer
    adam_v: list = field(default_factory=list)
    adam_t: int = 0

    @property
    def dims(self):
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]


def init_network(dims, activations, seed: int) -> NetworkParams:
    """Variance-scaled uniform init (zero biases), deterministic in seed."""
    if len(dims) < 2:
        raise ValueError("need at least an input and an output dimension")
    if len(activations) != len(dims) - 1:
        raise ValueError("one activation per layer required")
    for a in activations:
        if a not in ACTIVATIONS:
            raise ValueError(f"unknown activation {a!r}")
    rng = np.random.default_rng(seed)
    weights, biases, adam_m, adam_v = [], [], [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        a = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-a, a, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
        adam_m.append((np.zeros((fan_out, fan_in)), np.zeros(fan_out)))
        adam_v.append((np.zeros((fan_out, fan_in)), np.zeros(fan_out)))
    return NetworkParams(weights, biases, list(activations),
                         np.zeros(dims[0]), np.ones(dims[0]),
                         adam_m, adam_v, 0)


def fit_standardization(params: NetworkParams, data: np.ndarray) -> None:
    """Fix per-feature standardization stats from a training matrix."""
    mean = data.mean(axis=0)
    std = data.std(axis=0)
    std[std == 0] = 1.0
    params.input_mean = mean
    params.input_std = std


def forward(params: NetworkParams, batch: np.ndarray):
    """Returns (outputs, cache); cache feeds backward()."""
    x = np.asarray(batch, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] != params.weights[0].shape[1]:
        raise ValueError("batch feature dimension mismatch")
    a = (x - params.input_mean) / params.input_std
    zs, acts = [], [a]
    for w, b, name in zip(params.weights, params.biases, params.activations):
        z = a @ w.T + b
        a = _act(name, z)
        zs.append(z)
        acts.append(a)
    return a, {"zs": zs, "acts": acts}


def backward(params: NetworkParams, cache: dict, d_out: np.ndarray):
    """Exact gradients of sum(loss) over the batch.

    Returns (grads, d_input) where grads pairs (dW, db) per layer and
    d_input is the gradient w.r.t. the raw (unstandardized) input.
    """
    zs, acts = cache["zs"], cache["acts"]
    if len(zs) != len(params.weights):
        raise ValueError("stale cache")
    delta = np.asarray(d_out, dtype=float)
    if delta.ndim == 1:
        delta = delta[None, :]
    grads = [None] * len(params.weights)
    for i in range(len(params.weights) - 1, -1, -1):
        delta = delta * _dact(params.activations[i], zs[i])
        grads[i] = (delta.T @ acts[i], delta.sum(axis=0))
        delta = delta @ params.weights[i]
    return grads, delta / params.input_std


def adam_step(params: NetworkParams, grads, lr: float, betas=(0.9, 0.999),
              eps: float = 1e-8, direction: str = "descend") -> None:
    """Standard Adam with bias correction; ascend negates the update."""
    if direction not in ("descend", "ascend"):
        raise ValueError("direction must be 'descend' or 'ascend'")
    sign = -1.0 if direction == "descend" else 1.0
    b1, b2 = betas
    params.adam_t += 1
    t = params.adam_t
    for i, (gw, gb) in enumerate(grads):
        mw, mb = params.adam_m[i]
        vw, vb = params.adam_v[i]
        mw = b1 * mw + (1 - b1) * gw
        mb = b1 * mb + (1 - b1) * gb
        vw = b2 * vw + (1 - b2) * gw**2
        vb = b2 * vb + (1 - b2) * gb**2
        params.adam_m[i] = (mw, mb)
        params.adam_v[i] = (vw, vb)
        mw_hat = mw / (1 - b1**t)
        mb_hat = mb / (1 - b1**t)
        vw_hat = vw / (1 - b2**t)
        vb_hat = vb / (1 - b2**t)
        params.weights[i] = params.weights[i] + sign * lr * mw_hat / (np.sqrt(vw_hat) + eps)
        params.biases[i] = params.biases[i] + sign * lr * mb_hat / (np.sqrt(vb_hat) + eps)


def params_to_dict(params: NetworkParams) -> dict:
    return {
        "weights": [w.tolist() for w in params.weights],
        "biases": [b.tolist() for b in params.biases],
        "activations": list(params.activations),
        "input_mean": params.input_mean.tolist(),
        "input_std": params.input_std.tolist(),
        "adam_m": [[m[0].tolist(), m[1].tolist()] for m in params.adam_m],
        "adam_v": [[v[0].tolist(), v[1].tolist()] for v in params.adam_v],
        "adam_t": params.adam_t,
    }


def params_from_dict(d: dict) -> NetworkParams:
    return NetworkParams(
        weights=[np.asarray(w, dtype=float) for w in d["weights"]],
        biases=[np.asarray(b, dtype=float) for b in d["biases"]],
        activations=list(d["activations"]),
        input_mean=np.asarray(d["input_mean"], dtype=float),
        input_std=np.asarray(d["input_std"], dtype=float),
        adam_m=[(np.asarray(m[0]), np.asarray(m[1])) for m in d["adam_m"]],
        adam_v=[(np.asarray(v[0]), np.asarray(v[1])) for v in d["adam_v"]],
        adam_t=int(d["adam_t"]),
    )


def save_checkpoint(path, payload: dict) -> None:
    """Versioned JSON checkpoint; float repr round-trips exactly."""
    doc = {"format": "rbqos-checkpoint-v1"}
    doc.update(payload)
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_checkpoint(path) -> dict:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != "rbqos-checkpoint-v1":
        raise ValueError("not an rbqos checkpoint")
    return doc
