"""Dense feed-forward network with hand-rolled backprop and Adam.

Small enough to stay in numpy, deterministic under a seed, and cheap to
snapshot, which is what the learning loop needs for its target-network
copies and checkpoints.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CHECKPOINT_VERSION = 1


@dataclass
class Gradients:
    """Per-layer parameter gradients, summed over the batch."""

    w: list
    b: list


class DenseNet:
    """Rectifier hidden layers, identity output, fan-in uniform init."""

    def __init__(self, sizes, seed: int = 0, dtype=np.float64):
        sizes = tuple(int(n) for n in sizes)
        if len(sizes) < 2 or any(n <= 0 for n in sizes):
            raise ValueError("sizes must list at least input and output")
        self.sizes = sizes
        self.dtype = np.dtype(dtype)
        rng = np.random.default_rng(seed)
        self.weights, self.biases = [], []
        self._m_w, self._v_w, self._m_b, self._v_b = [], [], [], []
        for fan_in, fan_out in zip(sizes, sizes[1:]):
            bound = np.sqrt(3.0 / fan_in)
            w = rng.uniform(-bound, bound, (fan_out, fan_in))
            self.weights.append(w.astype(self.dtype))
            self.biases.append(np.zeros(fan_out, dtype=self.dtype))
            self._m_w.append(np.zeros_like(self.weights[-1]))
            self._v_w.append(np.zeros_like(self.weights[-1]))
            self._m_b.append(np.zeros_like(self.biases[-1]))
            self._v_b.append(np.zeros_like(self.biases[-1]))
        self._step = 0

    @property
    def step_count(self) -> int:
        return self._step

    def _layers(self, x):
        """Activations and pre-activations for a batched input."""
        a = np.asarray(x, dtype=self.dtype)
        acts = [a]
        pres = []
        last = len(self.weights) - 1
        for li, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = acts[-1] @ w.T + b
            pres.append(z)
            acts.append(z if li == last else np.maximum(z, 0.0))
        return acts, pres

    def pre_activations(self, x):
        single = np.asarray(x).ndim == 1
        _, pres = self._layers(np.atleast_2d(x))
        return [z[0] if single else z for z in pres]

    def forward(self, x):
        single = np.asarray(x).ndim == 1
        acts, _ = self._layers(np.atleast_2d(x))
        out = acts[-1]
        return out[0] if single else out

    def backward(self, x, grad_out) -> Gradients:
        """Parameter gradients of grad_out . forward(x), batch-summed."""
        xb = np.atleast_2d(np.asarray(x, dtype=self.dtype))
        gb = np.atleast_2d(np.asarray(grad_out, dtype=self.dtype))
        acts, pres = self._layers(xb)
        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.biases)
        delta = gb
        for li in range(len(self.weights) - 1, -1, -1):
            grads_w[li] = delta.T @ acts[li]
            grads_b[li] = delta.sum(axis=0)
            if li > 0:
                delta = (delta @ self.weights[li]) * (pres[li - 1] > 0.0)
        return Gradients(w=grads_w, b=grads_b)

    def adam_step(self, grads: Gradients, lr: float = 1e-3,
                  betas=(0.9, 0.999), eps: float = 1e-8):
        for g in grads.w + grads.b:
            if not np.all(np.isfinite(g)):
                raise FloatingPointError("non-finite gradient")
        b1, b2 = betas
        self._step += 1
        t = self._step
        for params, gs, ms, vs in (
                (self.weights, grads.w, self._m_w, self._v_w),
                (self.biases, grads.b, self._m_b, self._v_b)):
            for p, g, m, v in zip(params, gs, ms, vs):
                m[:] = b1 * m + (1.0 - b1) * g
                v[:] = b2 * v + (1.0 - b2) * g * g
                m_hat = m / (1.0 - b1 ** t)
                v_hat = v / (1.0 - b2 ** t)
                p -= lr * m_hat / (np.sqrt(v_hat) + eps)
                if not np.all(np.isfinite(p)):
                    raise FloatingPointError("non-finite parameter")

    def copy(self) -> "DenseNet":
        other = DenseNet(self.sizes, seed=0, dtype=self.dtype)
        other.weights = [w.copy() for w in self.weights]
        other.biases = [b.copy() for b in self.biases]
        other._m_w = [m.copy() for m in self._m_w]
        other._v_w = [v.copy() for v in self._v_w]
        other._m_b = [m.copy() for m in self._m_b]
        other._v_b = [v.copy() for v in self._v_b]
        other._step = self._step
        return other

    def payload(self, prefix: str = "") -> dict:
        """Checkpoint arrays keyed for np.savez; prefix allows embedding
        several nets in one archive."""
        payload = {
            prefix + "version": np.array(CHECKPOINT_VERSION),
            prefix + "sizes": np.array(self.sizes),
            prefix + "dtype": np.array(str(self.dtype)),
            prefix + "step": np.array(self._step),
        }
        for li in range(len(self.weights)):
            payload[f"{prefix}w{li}"] = self.weights[li]
            payload[f"{prefix}b{li}"] = self.biases[li]
            payload[f"{prefix}mw{li}"] = self._m_w[li]
            payload[f"{prefix}vw{li}"] = self._v_w[li]
            payload[f"{prefix}mb{li}"] = self._m_b[li]
            payload[f"{prefix}vb{li}"] = self._v_b[li]
        return payload

    def save(self, path):
        np.savez(path, **self.payload())

    @classmethod
    def from_payload(cls, data, prefix: str = "") -> "DenseNet":
        version = int(data[prefix + "version"])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        net = cls(tuple(int(n) for n in data[prefix + "sizes"]),
                  dtype=np.dtype(str(data[prefix + "dtype"])))
        net._step = int(data[prefix + "step"])
        for li in range(len(net.weights)):
            net.weights[li] = data[f"{prefix}w{li}"].copy()
            net.biases[li] = data[f"{prefix}b{li}"].copy()
            net._m_w[li] = data[f"{prefix}mw{li}"].copy()
            net._v_w[li] = data[f"{prefix}vw{li}"].copy()
            net._m_b[li] = data[f"{prefix}mb{li}"].copy()
            net._v_b[li] = data[f"{prefix}vb{li}"].copy()
        return net

    @classmethod
    def load(cls, path) -> "DenseNet":
        with np.load(path, allow_pickle=False) as data:
            return cls.from_payload(data)
