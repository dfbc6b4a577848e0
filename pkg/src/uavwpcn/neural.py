"""Minimal neural substrate: an MLP with hand-written backprop, Adam, a ring
replay buffer, and a named-array checkpoint format.

Everything is float64 numpy. At the network sizes used here (a few hidden
layers of 64..256 units) this is fast, fully deterministic for a fixed rng,
and tight enough numerically for central-finite-difference gradient checks.
"""

from __future__ import annotations

import json
import zipfile
from pathlib import Path

import numpy as np

CHECKPOINT_VERSION = 1


class Mlp:
    """Fully connected net, rectifier hidden layers, linear output.

    `dims` lists neuron counts per layer, input first. Parameters live in
    `weights[l]` of shape (dims[l], dims[l+1]) and `biases[l]`.
    """

    def __init__(self, dims, rng: np.random.Generator, final_scale: float = 1.0):
        if len(dims) < 2:
            raise ValueError("need at least an input and an output layer")
        self.dims = tuple(int(d) for d in dims)
        self.weights = []
        self.biases = []
        last = len(self.dims) - 2
        for l in range(len(self.dims) - 1):
            fan_in, fan_out = self.dims[l], self.dims[l + 1]
            scale = np.sqrt(2.0 / fan_in) if l < last else np.sqrt(1.0 / fan_in) * final_scale
            self.weights.append(rng.standard_normal((fan_in, fan_out)) * scale)
            self.biases.append(np.zeros(fan_out))

    # -- parameter plumbing ------------------------------------------------

    def params(self) -> list[np.ndarray]:
        """Interleaved [W0, b0, W1, b1, ...]; references, not copies."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def set_params(self, params: list[np.ndarray]) -> None:
        it = iter(params)
        for l in range(len(self.weights)):
            self.weights[l] = np.asarray(next(it), dtype=float)
            self.biases[l] = np.asarray(next(it), dtype=float)

    def copy(self) -> "Mlp":
        dup = object.__new__(Mlp)
        dup.dims = self.dims
        dup.weights = [w.copy() for w in self.weights]
        dup.biases = [b.copy() for b in self.biases]
        return dup

    def num_params(self) -> int:
        return sum(p.size for p in self.params())

    def named_arrays(self, prefix: str = "") -> dict[str, np.ndarray]:
        out = {}
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            out[f"{prefix}w{l}"] = w
            out[f"{prefix}b{l}"] = b
        return out

    def load_named_arrays(self, arrays: dict, prefix: str = "") -> None:
        # np.array (not asarray): the source may be another live model's
        # storage, and sharing it would couple the two nets' updates.
        for l in range(len(self.weights)):
            w = np.array(arrays[f"{prefix}w{l}"], dtype=float)
            b = np.array(arrays[f"{prefix}b{l}"], dtype=float)
            if w.shape != self.weights[l].shape or b.shape != self.biases[l].shape:
                raise ValueError(
                    f"layer {l} shape mismatch: have {self.weights[l].shape}, "
                    f"checkpoint {w.shape}")
            self.weights[l] = w
            self.biases[l] = b

    # -- compute -----------------------------------------------------------

    def forward(self, x: np.ndarray):
        """Returns (output, cache). Input must be 2-D (batch, dims[0])."""
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.dims[0]:
            raise ValueError(f"expected input shape (batch, {self.dims[0]}), got {x.shape}")
        acts = [x]
        zs = []
        a = x
        last = len(self.weights) - 1
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w
            z += b
            zs.append(z)
            a = np.maximum(z, 0.0) if l < last else z
            acts.append(a)
        return a, (acts, zs)

    def backward(self, cache, grad_out: np.ndarray):
        """Reverse pass. Returns (param grads interleaved like params(), input grad)."""
        acts, zs = cache
        delta = np.asarray(grad_out, dtype=float)
        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.biases)
        for l in range(len(self.weights) - 1, -1, -1):
            grads_w[l] = acts[l].T @ delta
            grads_b[l] = delta.sum(axis=0)
            delta = delta @ self.weights[l].T
            if l > 0:
                delta *= zs[l - 1] > 0.0
        out = []
        for gw, gb in zip(grads_w, grads_b):
            out.append(gw)
            out.append(gb)
        return out, delta


class Adam:
    """Standard Adam with bias correction. Holds one moment pair per array."""

    def __init__(self, params_like, lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr = float(lr)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(np.asarray(p, dtype=float)) for p in params_like]
        self.v = [np.zeros_like(np.asarray(p, dtype=float)) for p in params_like]

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        """In-place update of every array in `params`."""
        self.t += 1
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)

    def named_arrays(self, prefix: str = "") -> dict[str, np.ndarray]:
        out = {f"{prefix}t": np.array(self.t), f"{prefix}lr": np.array(self.lr)}
        for i, (m, v) in enumerate(zip(self.m, self.v)):
            out[f"{prefix}m{i}"] = m
            out[f"{prefix}v{i}"] = v
        return out

    def load_named_arrays(self, arrays: dict, prefix: str = "") -> None:
        self.t = int(arrays[f"{prefix}t"])
        self.lr = float(arrays[f"{prefix}lr"])
        for i in range(len(self.m)):
            self.m[i] = np.array(arrays[f"{prefix}m{i}"], dtype=float)
            self.v[i] = np.array(arrays[f"{prefix}v{i}"], dtype=float)


class ReplayBuffer:
    """Fixed-capacity ring of named float rows with uniform sampling.

    `fields` maps name -> row width (an int; scalars use width 1 and come
    back as shape (batch,) on sampling).
    """

    def __init__(self, capacity: int, fields: dict[str, int]):
        self.capacity = int(capacity)
        self.fields = dict(fields)
        self.store = {k: np.zeros((self.capacity, w)) for k, w in self.fields.items()}
        self.size = 0
        self.head = 0

    def __len__(self) -> int:
        return self.size

    def push(self, **row) -> None:
        if set(row) != set(self.fields):
            raise ValueError(f"row keys {sorted(row)} != buffer fields {sorted(self.fields)}")
        for k, value in row.items():
            self.store[k][self.head] = value
        self.head = (self.head + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
        if batch_size > self.size:
            raise ValueError(f"asked for {batch_size} rows, buffer holds {self.size}")
        idx = rng.choice(self.size, size=batch_size, replace=False)
        out = {}
        for k, w in self.fields.items():
            rows = self.store[k][idx]
            out[k] = rows[:, 0] if w == 1 else rows
        return out

    def state_dict(self) -> dict[str, np.ndarray]:
        out = {"size": np.array(self.size), "head": np.array(self.head)}
        for k in self.fields:
            out[f"data_{k}"] = self.store[k][:self.size].copy()
        return out

    def load_state_dict(self, arrays: dict) -> None:
        self.size = int(arrays["size"])
        self.head = int(arrays["head"])
        for k, w in self.fields.items():
            data = np.asarray(arrays[f"data_{k}"], dtype=float)
            if data.shape[1:] != (w,):
                raise ValueError(f"buffer field {k}: width {data.shape[1:]} != {(w,)}")
            self.store[k] = np.zeros((self.capacity, w))
            self.store[k][:data.shape[0]] = data


# -- checkpoint format -----------------------------------------------------
#
# A checkpoint is an .npz of named float arrays plus a JSON metadata entry
# carrying the format version and whatever the owner wants to validate
# against (dimensions, config echoes).

def save_checkpoint(path: str | Path, arrays: dict[str, np.ndarray],
                    meta: dict | None = None) -> None:
    meta = dict(meta or {})
    meta["checkpoint_version"] = CHECKPOINT_VERSION
    payload = {k: np.asarray(v) for k, v in arrays.items()}
    payload["__meta__"] = np.frombuffer(
        json.dumps(meta, sort_keys=True).encode("utf-8"), dtype=np.uint8)
    np.savez(path, **payload)


def load_checkpoint(path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    try:
        with np.load(path) as npz:
            arrays = {k: npz[k] for k in npz.files if k != "__meta__"}
            meta_raw = bytes(npz["__meta__"]) if "__meta__" in npz.files else None
    except (zipfile.BadZipFile, OSError, ValueError, KeyError) as exc:
        raise ValueError(f"corrupt checkpoint {path}: {exc}") from exc
    if meta_raw is None:
        raise ValueError(f"{path}: not a checkpoint (missing metadata entry)")
    try:
        meta = json.loads(meta_raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValueError(f"corrupt checkpoint {path}: {exc}") from exc
    version = meta.get("checkpoint_version")
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: checkpoint version {version}, expected {CHECKPOINT_VERSION}")
    return arrays, meta
