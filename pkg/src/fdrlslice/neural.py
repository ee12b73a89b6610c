"""Minimal dense Q-network: forward, backprop for a TD loss, Adam/SGD.

Parameters live in one flat float64 vector. Layout, per layer l with
``n_in = layer_sizes[l]`` and ``n_out = layer_sizes[l+1]``: the weight matrix
W_l of shape (n_out, n_in) in row-major order, followed by the bias b_l of
length n_out. Hidden layers use ReLU; the output layer is affine.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace

import numpy as np

CHECKPOINT_MAGIC = b"FDRLNN1"

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


def param_count(layer_sizes) -> int:
    return sum(
        n_in * n_out + n_out
        for n_in, n_out in zip(layer_sizes[:-1], layer_sizes[1:])
    )


@dataclass(frozen=True)
class ModelParams:
    layer_sizes: tuple[int, ...]
    vector: np.ndarray  # flat float64, read-only

    def __post_init__(self):
        expected = param_count(self.layer_sizes)
        if self.vector.shape != (expected,):
            raise ValueError(
                f"parameter vector length {self.vector.shape} does not match "
                f"layer sizes {self.layer_sizes} (expected {expected})"
            )

    def layers(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """Views (no copies) of (W, b) per layer."""
        out = []
        off = 0
        for n_in, n_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            w = self.vector[off:off + n_in * n_out].reshape(n_out, n_in)
            off += n_in * n_out
            b = self.vector[off:off + n_out]
            off += n_out
            out.append((w, b))
        return out


@dataclass(frozen=True)
class OptState:
    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0

    @classmethod
    def zeros(cls, n: int) -> "OptState":
        return cls(np.zeros(n), np.zeros(n), 0)


def init_params(layer_sizes, rng: np.random.Generator) -> ModelParams:
    """He-uniform weights (limit sqrt(6/fan_in)), zero biases."""
    chunks = []
    for n_in, n_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        limit = np.sqrt(6.0 / n_in)
        chunks.append(rng.uniform(-limit, limit, size=n_in * n_out))
        chunks.append(np.zeros(n_out))
    return ModelParams(tuple(layer_sizes), np.concatenate(chunks))


def forward(params: ModelParams, state: np.ndarray) -> np.ndarray:
    """Q-values for a single input vector."""
    return forward_batch(params, np.asarray(state, dtype=float)[None, :])[0]


def forward_batch(params: ModelParams, states: np.ndarray) -> np.ndarray:
    x = np.asarray(states, dtype=float)
    if x.ndim != 2 or x.shape[1] != params.layer_sizes[0]:
        raise ValueError(
            f"input shape {x.shape} incompatible with input_dim "
            f"{params.layer_sizes[0]}"
        )
    layers = params.layers()
    for w, b in layers[:-1]:
        x = np.maximum(x @ w.T + b, 0.0)
    w, b = layers[-1]
    return x @ w.T + b


def backward(params: ModelParams, state, action_index: int,
             td_target: float) -> np.ndarray:
    """Gradient of (td_target - q[action_index])^2 w.r.t. the flat vector."""
    return backward_batch(
        params,
        np.asarray(state, dtype=float)[None, :],
        np.array([action_index]),
        np.array([float(td_target)]),
    )


def backward_batch(params: ModelParams, states: np.ndarray,
                   action_indices: np.ndarray,
                   td_targets: np.ndarray) -> np.ndarray:
    """Mean-over-batch gradient of the squared TD error on taken actions."""
    x = np.asarray(states, dtype=float)
    n = x.shape[0]
    layers = params.layers()
    # forward, keeping activations
    acts = [x]
    for w, b in layers[:-1]:
        x = np.maximum(x @ w.T + b, 0.0)
        acts.append(x)
    w, b = layers[-1]
    q = x @ w.T + b

    rows = np.arange(n)
    dq = np.zeros_like(q)
    dq[rows, action_indices] = 2.0 * (q[rows, action_indices] - td_targets) / n

    grads = [None] * len(layers)
    delta = dq
    for l in range(len(layers) - 1, -1, -1):
        w, _ = layers[l]
        gw = delta.T @ acts[l]
        gb = delta.sum(axis=0)
        grads[l] = (gw, gb)
        if l > 0:
            delta = (delta @ w) * (acts[l] > 0.0)
    return np.concatenate([np.concatenate([gw.ravel(), gb])
                           for gw, gb in grads])


def adam_update(params: ModelParams, grads: np.ndarray, opt: OptState,
                lr: float) -> tuple[ModelParams, OptState]:
    if grads.shape != params.vector.shape:
        raise ValueError("gradient length does not match parameter length")
    t = opt.step_count + 1
    m = ADAM_BETA1 * opt.first_moment + (1.0 - ADAM_BETA1) * grads
    v = ADAM_BETA2 * opt.second_moment + (1.0 - ADAM_BETA2) * grads * grads
    m_hat = m / (1.0 - ADAM_BETA1 ** t)
    v_hat = v / (1.0 - ADAM_BETA2 ** t)
    new_vec = params.vector - lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
    return replace(params, vector=new_vec), OptState(m, v, t)


def sgd_update(params: ModelParams, grads: np.ndarray, opt: OptState,
               lr: float) -> tuple[ModelParams, OptState]:
    """Plain SGD behind the same interface; moments stay zero."""
    return (replace(params, vector=params.vector - lr * grads),
            replace(opt, step_count=opt.step_count + 1))


# --- checkpoint format -------------------------------------------------------
#
# Little-endian binary: magic "FDRLNN1", uint32 layer count, layer sizes as
# uint32, then the parameters as float32 in the documented layout.


def checkpoint_bytes(params: ModelParams) -> bytes:
    head = CHECKPOINT_MAGIC + struct.pack("<I", len(params.layer_sizes))
    head += struct.pack(f"<{len(params.layer_sizes)}I", *params.layer_sizes)
    return head + params.vector.astype("<f4").tobytes()


def header_bytes_len(layer_sizes) -> int:
    return len(CHECKPOINT_MAGIC) + 4 + 4 * len(layer_sizes)


def model_bytes(layer_sizes) -> int:
    """On-the-wire size of one serialized model (header + 4 bytes/param)."""
    return header_bytes_len(layer_sizes) + 4 * param_count(layer_sizes)


def params_from_bytes(data: bytes) -> tuple[ModelParams, int]:
    """Parse a checkpoint; returns (params, bytes consumed)."""
    if data[:len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise ValueError("bad checkpoint magic")
    off = len(CHECKPOINT_MAGIC)
    (n_layers,) = struct.unpack_from("<I", data, off)
    off += 4
    sizes = struct.unpack_from(f"<{n_layers}I", data, off)
    off += 4 * n_layers
    n = param_count(sizes)
    vec = np.frombuffer(data, dtype="<f4", count=n, offset=off).astype(float)
    return ModelParams(tuple(int(s) for s in sizes), vec), off + 4 * n


def save_params(params: ModelParams, path) -> None:
    with open(path, "wb") as f:
        f.write(checkpoint_bytes(params))


def load_params(path) -> ModelParams:
    with open(path, "rb") as f:
        params, _ = params_from_bytes(f.read())
    return params
