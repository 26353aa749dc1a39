"""Small fully-connected nets with hand-written forward/backward passes.

Everything trains by explicit gradients so the finite-difference oracles in
the test suite can check every loss end to end. Parameters live in plain
float64 arrays; ``pack``/``unpack`` give the flat-vector view the gradient
checker and the optimizers work on.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np


def _act(name: str, x: np.ndarray) -> np.ndarray:
    if name == "tanh":
        return np.tanh(x)
    if name == "relu":
        return np.maximum(x, 0.0)
    raise ValueError(f"unknown activation {name!r}")


def _act_grad(name: str, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    # y = act(x) is passed in so tanh can reuse the forward value
    if name == "tanh":
        return 1.0 - y * y
    if name == "relu":
        return (x > 0.0).astype(x.dtype)
    raise ValueError(f"unknown activation {name!r}")


class MLP:
    """Feedforward net: linear layers with an activation between them.

    ``output_activation`` is either None (linear head) or "tanh" (squashes
    into (-1, 1), used by the reward nets).
    """

    def __init__(
        self,
        sizes: Sequence[int],
        activation: str = "tanh",
        output_activation: str | None = None,
        rng: np.random.Generator | None = None,
    ):
        if len(sizes) < 2:
            raise ValueError("need at least an input and an output size")
        self.sizes = tuple(int(s) for s in sizes)
        self.activation = activation
        self.output_activation = output_activation
        rng = rng if rng is not None else np.random.default_rng(0)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            # Gaussian init scaled by 1/sqrt(fan_in), biases zero
            self.weights.append(rng.standard_normal((fan_in, fan_out)) / np.sqrt(fan_in))
            self.biases.append(np.zeros(fan_out))

    # -- forward / backward -------------------------------------------------

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, list]:
        """Run a batch (n, in_dim) through the net; returns (output, cache)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        cache = [("input", x)]
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            pre = h @ w + b
            if i < last:
                h = _act(self.activation, pre)
                cache.append((self.activation, pre, h))
            elif self.output_activation is not None:
                h = _act(self.output_activation, pre)
                cache.append((self.output_activation, pre, h))
            else:
                h = pre
                cache.append(("linear", pre, h))
        return h, cache

    def backward(
        self, cache: list, dout: np.ndarray
    ) -> tuple[list[np.ndarray], list[np.ndarray], np.ndarray]:
        """Backprop ``dout`` (n, out_dim); returns (dW list, db list, dx)."""
        dws = [np.zeros_like(w) for w in self.weights]
        dbs = [np.zeros_like(b) for b in self.biases]
        grad = np.asarray(dout, dtype=float)
        for i in range(len(self.weights) - 1, -1, -1):
            kind, pre, post = cache[i + 1]
            if kind != "linear":
                grad = grad * _act_grad(kind, pre, post)
            below = cache[i][1] if i == 0 else cache[i][2]
            dws[i] = below.T @ grad
            dbs[i] = grad.sum(axis=0)
            grad = grad @ self.weights[i].T
        return dws, dbs, grad

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    # -- flat parameter view -------------------------------------------------

    def n_params(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)

    def pack(self) -> np.ndarray:
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(w.ravel())
            parts.append(b.ravel())
        return np.concatenate(parts)

    def unpack(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=float)
        if flat.size != self.n_params():
            raise ValueError("flat vector has the wrong length")
        ofs = 0
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            self.weights[i] = flat[ofs : ofs + w.size].reshape(w.shape).copy()
            ofs += w.size
            self.biases[i] = flat[ofs : ofs + b.size].copy()
            ofs += b.size

    @staticmethod
    def pack_grads(dws: list[np.ndarray], dbs: list[np.ndarray]) -> np.ndarray:
        parts = []
        for dw, db in zip(dws, dbs):
            parts.append(dw.ravel())
            parts.append(db.ravel())
        return np.concatenate(parts)


class SGD:
    """Plain gradient descent with a fixed learning rate."""

    def __init__(self, lr: float):
        self.lr = float(lr)

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        return params - self.lr * grad

    def state_dict(self) -> dict:
        return {"kind": "sgd", "lr": self.lr}


class Adam:
    """Adaptive-moment gradient descent (beta1=0.9, beta2=0.999)."""

    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = float(lr)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: np.ndarray | None = None
        self.v: np.ndarray | None = None

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        if self.m is None:
            self.m = np.zeros_like(params)
            self.v = np.zeros_like(params)
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1**self.t)
        v_hat = self.v / (1 - self.beta2**self.t)
        return params - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def state_dict(self) -> dict:
        return {
            "kind": "adam",
            "lr": self.lr,
            "t": self.t,
            "m": None if self.m is None else self.m.copy(),
            "v": None if self.v is None else self.v.copy(),
        }

    def load_state(self, state: dict) -> None:
        self.t = int(state["t"])
        self.m = None if state["m"] is None else np.asarray(state["m"], dtype=float)
        self.v = None if state["v"] is None else np.asarray(state["v"], dtype=float)


def make_optimizer(kind: str, lr: float):
    if kind == "sgd":
        return SGD(lr)
    if kind == "adam":
        return Adam(lr)
    raise ValueError(f"unknown optimizer {kind!r}")


def finite_difference_gradient(
    fn, params: np.ndarray, h: float = 1e-6
) -> np.ndarray:
    """Central finite differences of a scalar function of a flat vector."""
    params = np.asarray(params, dtype=float)
    grad = np.zeros_like(params)
    for i in range(params.size):
        bumped = params.copy()
        bumped[i] += h
        up = fn(bumped)
        bumped[i] -= 2 * h
        down = fn(bumped)
        grad[i] = (up - down) / (2 * h)
    return grad
