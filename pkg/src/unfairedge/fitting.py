"""Function approximators for CPTs built from flow channels.

Two kinds share one calling convention. ``inputs`` is an array of shape
``(n_channels, n_rows, card)``: one flow table per channel. ``forward``
returns a ``(n_rows, card)`` prediction plus a cache; ``backward`` turns
an upstream gradient of that prediction into parameter gradients. Zeroing
a channel means writing zeros into its slice of ``inputs``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .inference import softmax


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {w : w >= 0, sum(w) = 1} (sort-based)."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / ind > 0)[0][-1]
    tau = css[rho] / (rho + 1.0)
    return np.maximum(v - tau, 0.0)


def simplex_least_squares(A, y, w0=None, tol=1e-10, max_iter=10_000):
    """min ||A w - y||^2 over the probability simplex.

    Accelerated projected gradient (step 1/L) with a restart whenever the
    objective would go up, so accepted iterates are monotone. Stops when an
    iterate moves by at most ``tol`` in every coordinate. Returns
    ``(w, n_iter, converged)``.
    """
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float)
    n = A.shape[1]
    if n == 1:
        return np.ones(1), 0, True
    w = project_simplex(np.full(n, 1.0 / n) if w0 is None else np.asarray(w0, dtype=float))
    gram = A.T @ A
    rhs = A.T @ y

    def obj(v):
        return float(v @ gram @ v - 2.0 * rhs @ v)

    lip = 2.0 * np.linalg.eigvalsh(gram)[-1]
    if lip <= 0:
        return w, 0, True
    step = 1.0 / lip
    z, t, f_w = w.copy(), 1.0, obj(w)
    for it in range(1, max_iter + 1):
        w_new = project_simplex(z - step * 2.0 * (gram @ z - rhs))
        f_new = obj(w_new)
        if f_new > f_w:
            # momentum overshot: restart from the last accepted iterate
            z, t = w.copy(), 1.0
            w_new = project_simplex(w - step * 2.0 * (gram @ w - rhs))
            f_new = obj(w_new)
        if np.max(np.abs(w_new - w)) <= tol:
            return w_new, it, True
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        z = w_new + ((t - 1.0) / t_next) * (w_new - w)
        w, f_w, t = w_new, f_new, t_next
    return w, max_iter, False


class LinearCombiner:
    """Convex combination of the flow channels."""

    kind = "linear"

    def __init__(self, weights):
        self.weights = np.asarray(weights, dtype=float)

    @property
    def flat(self):
        return self.weights

    def forward(self, inputs):
        return np.tensordot(self.weights, inputs, axes=1), inputs

    def backward_flat(self, cache, dout):
        return np.tensordot(cache, dout, axes=([1, 2], [0, 1]))

    def backward(self, cache, dout):
        return [self.backward_flat(cache, dout)]

    @property
    def params(self):
        return [self.weights]

    @params.setter
    def params(self, values):
        (self.weights,) = values

    def to_dict(self):
        return {"weights": self.weights.tolist()}


class SoftmaxMLP:
    """Tanh MLP over the concatenated channel vectors of a row, softmax head.

    All weights live in one flat vector; ``layers`` are views into it.
    """

    kind = "mlp"

    def __init__(self, layers):
        layers = [(np.asarray(W, dtype=float), np.asarray(b, dtype=float)) for W, b in layers]
        self.shapes = [(W.shape, b.shape) for W, b in layers]
        self.flat = np.concatenate([np.concatenate([W.ravel(), b.ravel()]) for W, b in layers])
        self._bind()

    def _bind(self):
        self.layers = []
        pos = 0
        for (ws, bs) in self.shapes:
            nw, nb = ws[0] * ws[1], bs[0]
            self.layers.append((self.flat[pos:pos + nw].reshape(ws), self.flat[pos + nw:pos + nw + nb]))
            pos += nw + nb

    @classmethod
    def initialize(cls, n_in, hidden, n_out, rng):
        sizes = [n_in, *hidden, n_out]
        layers = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            layers.append((rng.uniform(-bound, bound, size=(fan_in, fan_out)), np.zeros(fan_out)))
        return cls(layers)

    def forward(self, inputs):
        n_rows = inputs.shape[1]
        h = np.transpose(inputs, (1, 0, 2)).reshape(n_rows, -1)
        acts = [h]
        for W, b in self.layers[:-1]:
            h = np.tanh(h @ W + b)
            acts.append(h)
        W, b = self.layers[-1]
        out = softmax(h @ W + b, axis=-1)
        return out, (acts, out)

    def backward_flat(self, cache, dout):
        """Gradient with respect to the flat parameter vector."""
        acts, out = cache
        # softmax Jacobian-vector product
        dz = out * (dout - np.sum(dout * out, axis=-1, keepdims=True))
        grad = np.empty_like(self.flat)
        pos = len(self.flat)
        for i in range(len(self.layers) - 1, -1, -1):
            W, b = self.layers[i]
            h = acts[i]
            nb = b.size
            nw = W.size
            grad[pos - nb:pos] = dz.sum(axis=0)
            grad[pos - nb - nw:pos - nb] = (h.T @ dz).ravel()
            pos -= nb + nw
            if i > 0:
                dz = (dz @ W.T) * (1.0 - h * h)
        return grad

    def backward(self, cache, dout):
        return [self.backward_flat(cache, dout)]

    @property
    def params(self):
        return [self.flat]

    @params.setter
    def params(self, values):
        (flat,) = values
        self.flat = np.array(flat, dtype=float)
        self._bind()

    def to_dict(self):
        return {"layers": [{"W": W.tolist(), "b": b.tolist()} for W, b in self.layers]}


@dataclass
class Adam:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        self.t = 0
        self.m = None
        self.v = None

    def delta(self, grad):
        """Adam update for a single flat parameter vector (to be subtracted)."""
        if self.m is None:
            self.m = np.zeros_like(grad)
            self.v = np.zeros_like(grad)
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1**self.t)
        v_hat = self.v / (1 - self.beta2**self.t)
        return self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def train_mlp(net: SoftmaxMLP, inputs, target, epochs=5000, lr=1e-3):
    """Full-batch Adam on the mean squared error; keeps the best iterate."""
    opt = Adam(lr=lr)
    n = target.size
    best_loss, best = np.inf, net.flat.copy()
    for _ in range(epochs):
        out, cache = net.forward(inputs)
        diff = out - target
        loss = float(np.vdot(diff, diff)) / n
        if loss < best_loss:
            best_loss, best = loss, net.flat.copy()
        grad = net.backward_flat(cache, diff * (2.0 / n))
        # in-place update keeps the layer views valid
        net.flat -= opt.delta(grad)
    out, _ = net.forward(inputs)
    loss = float(np.mean((out - target) ** 2))
    if loss < best_loss:
        best_loss, best = loss, net.flat.copy()
    net.flat[:] = best
    return best_loss
