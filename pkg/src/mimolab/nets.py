"""Small dense networks with explicit backprop, plus Adam and soft updates.

Kept dependency-free (numpy only) so both loss gradients can be verified
against central finite differences.
"""

from __future__ import annotations

import numpy as np


def relu(x):
    return np.maximum(x, 0.0)


class Mlp:
    """Fully-connected net: rectifier hidden layers, tanh or linear output.

    Parameters live in `self.weights` / `self.biases`. `forward` returns a
    cache consumed by `backward`, which produces parameter gradients and
    the gradient w.r.t. the input batch. Dropout (inverted scaling) applies
    to hidden activations only and only when train=True.
    """

    def __init__(self, sizes, output: str = "linear", rng=None, dropout: float = 0.0):
        if len(sizes) < 2:
            raise ValueError("need at least input and output sizes")
        if output not in ("linear", "tanh"):
            raise ValueError("output must be 'linear' or 'tanh'")
        rng = rng if rng is not None else np.random.default_rng()
        self.sizes = [int(s) for s in sizes]
        self.output = output
        self.dropout = float(dropout)
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            self.weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def parameters(self):
        """Flat list view [W0, b0, W1, b1, ...] of the live arrays."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def copy(self) -> "Mlp":
        clone = Mlp.__new__(Mlp)
        clone.sizes = list(self.sizes)
        clone.output = self.output
        clone.dropout = self.dropout
        clone.weights = [w.copy() for w in self.weights]
        clone.biases = [b.copy() for b in self.biases]
        return clone

    def forward(self, x: np.ndarray, train: bool = False, rng=None):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        acts = [x]
        masks = []
        h = x
        for i in range(self.n_layers - 1):
            z = h @ self.weights[i] + self.biases[i]
            h = relu(z)
            if train and self.dropout > 0.0:
                if rng is None:
                    raise ValueError("dropout in train mode needs an rng")
                mask = (rng.uniform(size=h.shape) >= self.dropout) / (1.0 - self.dropout)
                h = h * mask
                masks.append(mask)
            else:
                masks.append(None)
            acts.append(h)
        z_out = h @ self.weights[-1] + self.biases[-1]
        y = np.tanh(z_out) if self.output == "tanh" else z_out
        cache = (acts, masks, y)
        return y, cache

    def backward(self, cache, dy: np.ndarray):
        """Gradients of sum(dy * y) w.r.t. parameters and input."""
        acts, masks, y = cache
        dy = np.asarray(dy, dtype=float)
        if self.output == "tanh":
            dz = dy * (1.0 - y**2)
        else:
            dz = dy
        grads_w = [None] * self.n_layers
        grads_b = [None] * self.n_layers
        grads_w[-1] = acts[-1].T @ dz
        grads_b[-1] = dz.sum(axis=0)
        dh = dz @ self.weights[-1].T
        for i in range(self.n_layers - 2, -1, -1):
            if masks[i] is not None:
                dh = dh * masks[i]
            dz = dh * (acts[i + 1] > 0.0)
            # recover pre-dropout activation sign: relu(z) > 0 iff act > 0
            grads_w[i] = acts[i].T @ dz
            grads_b[i] = dz.sum(axis=0)
            dh = dz @ self.weights[i].T
        grads = []
        for gw, gb in zip(grads_w, grads_b):
            grads.extend((gw, gb))
        return grads, dh

    # -- flat parameter views, used by the finite-difference checks ------
    def get_flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.parameters()])

    def set_flat(self, flat: np.ndarray):
        offset = 0
        for p in self.parameters():
            p[...] = flat[offset: offset + p.size].reshape(p.shape)
            offset += p.size
        if offset != flat.size:
            raise ValueError("flat vector size mismatch")


class Adam:
    """Adam over a fixed list of parameter arrays, updated in place."""

    def __init__(self, params, lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params, grads):
        self.t += 1
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)


def soft_update(target: Mlp, online: Mlp, tau: float):
    """theta' <- tau*theta + (1 - tau)*theta', elementwise on both nets."""
    for pt, p in zip(target.parameters(), online.parameters()):
        pt *= 1.0 - tau
        pt += tau * p
