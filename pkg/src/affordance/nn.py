"""Minimal dense-network stack with reverse-mode gradients.

Everything is float64 and batch-first. Layers are stateless w.r.t. forward
caches: ``forward`` returns the cache the matching ``backward`` consumes, so
one layer can safely appear several times in a computation (shared weights
across crop branches, a condition trunk shared by encoder and decoder).
Parameter gradients accumulate into the shared ``ParamStore``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    InvalidLabelError,
    ShapeError,
    StateError,
    TrainingDivergedError,
)


class ParamStore:
    """Named parameter slots plus their accumulated gradients."""

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}

    def add(self, name: str, value: np.ndarray) -> None:
        if name in self.params:
            raise StateError(f"parameter slot {name!r} already exists")
        self.params[name] = np.asarray(value, dtype=np.float64)
        self.grads[name] = np.zeros_like(self.params[name])

    def zero_grads(self) -> None:
        for g in self.grads.values():
            g[...] = 0.0

    def accumulate(self, name: str, grad: np.ndarray) -> None:
        if grad.shape != self.params[name].shape:
            raise ShapeError(f"gradient for {name!r} has shape {grad.shape}, "
                             f"expected {self.params[name].shape}")
        self.grads[name] += grad

    def check_finite(self) -> None:
        for name, p in self.params.items():
            if not np.all(np.isfinite(p)):
                raise TrainingDivergedError(f"non-finite values in parameter {name!r}")

    def flat_copy(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.params.items()}


def glorot_uniform(rng: np.random.Generator, n_in: int, n_out: int) -> np.ndarray:
    a = np.sqrt(6.0 / (n_in + n_out))
    return rng.uniform(-a, a, size=(n_in, n_out))


class Dense:
    """Affine layer with relu or identity activation, weights in a ParamStore."""

    def __init__(self, store: ParamStore, name: str, n_in: int, n_out: int,
                 activation: str = "relu", rng: np.random.Generator | None = None):
        if activation not in ("relu", "identity"):
            raise ShapeError(f"unknown activation {activation!r}")
        if rng is None:
            rng = np.random.default_rng(0)
        self.store = store
        self.name = name
        self.n_in = n_in
        self.n_out = n_out
        self.activation = activation
        store.add(f"{name}.W", glorot_uniform(rng, n_in, n_out))
        store.add(f"{name}.b", np.zeros(n_out))

    @property
    def W(self) -> np.ndarray:
        return self.store.params[f"{self.name}.W"]

    @property
    def b(self) -> np.ndarray:
        return self.store.params[f"{self.name}.b"]

    def forward(self, x: np.ndarray):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.n_in:
            raise ShapeError(f"{self.name}: input shape {x.shape}, expected (B, {self.n_in})")
        pre = x @ self.W + self.b
        out = np.maximum(pre, 0.0) if self.activation == "relu" else pre
        return out, (x, pre)

    def backward(self, cache, grad_out: np.ndarray) -> np.ndarray:
        if cache is None:
            raise StateError(f"{self.name}: backward called without a forward cache")
        x, pre = cache
        if grad_out.shape != pre.shape:
            raise ShapeError(f"{self.name}: upstream gradient shape {grad_out.shape}, "
                             f"expected {pre.shape}")
        grad_pre = grad_out * (pre > 0.0) if self.activation == "relu" else grad_out
        self.store.accumulate(f"{self.name}.W", x.T @ grad_pre)
        self.store.accumulate(f"{self.name}.b", grad_pre.sum(axis=0))
        return grad_pre @ self.W.T


class DenseNet:
    """A plain sequence of Dense layers."""

    def __init__(self, store: ParamStore, name: str, dims: list[int],
                 activations: list[str] | None = None,
                 rng: np.random.Generator | None = None):
        if len(dims) < 2:
            raise ShapeError("need at least input and output dims")
        if activations is None:
            activations = ["relu"] * (len(dims) - 2) + ["identity"]
        if len(activations) != len(dims) - 1:
            raise ShapeError("one activation per layer required")
        self.layers = [
            Dense(store, f"{name}.{i}", dims[i], dims[i + 1], activations[i], rng)
            for i in range(len(dims) - 1)
        ]

    def forward(self, x: np.ndarray):
        caches = []
        for layer in self.layers:
            x, cache = layer.forward(x)
            caches.append(cache)
        return x, caches

    def backward(self, caches, grad_out: np.ndarray) -> np.ndarray:
        for layer, cache in zip(reversed(self.layers), reversed(caches)):
            grad_out = layer.backward(cache, grad_out)
        return grad_out


# ---------------------------------------------------------------------------
# losses and sampling
# ---------------------------------------------------------------------------

def softmax(logits: np.ndarray) -> np.ndarray:
    """Numerically stabilized softmax over the last axis."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits: np.ndarray, label):
    """Cross-entropy of softmax(logits) against an integer label.

    Accepts a single (K,) vector with an int label, or a (B, K) batch with a
    (B,) label array; the batch form returns the mean loss and the gradient of
    that mean.
    """
    z = np.asarray(logits, dtype=np.float64)
    if z.ndim == 1:
        k = z.shape[0]
        if not 0 <= int(label) < k:
            raise InvalidLabelError(f"label {label} outside [0, {k})")
        p = softmax(z)
        loss = -np.log(p[int(label)])
        grad = p.copy()
        grad[int(label)] -= 1.0
        return float(loss), grad
    labels = np.asarray(label, dtype=np.int64)
    b, k = z.shape
    if labels.shape != (b,):
        raise ShapeError(f"labels shape {labels.shape}, expected ({b},)")
    if labels.min() < 0 or labels.max() >= k:
        raise InvalidLabelError("label outside [0, K)")
    p = softmax(z)
    rows = np.arange(b)
    loss = float(-np.log(p[rows, labels]).mean())
    grad = p.copy()
    grad[rows, labels] -= 1.0
    return loss, grad / b


@dataclass(frozen=True)
class GaussianParams:
    """Diagonal Gaussian as (mean, log-variance). Log-variance keeps the
    reparameterized sampling and the KL term numerically stable."""

    mu: np.ndarray
    log_var: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=np.float64)
        lv = np.asarray(self.log_var, dtype=np.float64)
        if mu.shape != lv.shape:
            raise ShapeError(f"mu/log_var shape mismatch: {mu.shape} vs {lv.shape}")
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(lv))):
            raise ShapeError("GaussianParams must be finite")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "log_var", lv)


def kl_to_standard_normal(g: GaussianParams):
    """KL[N(mu, diag exp(log_var)) || N(0, I)] summed over the last axis.

    Returns (kl, grad_mu, grad_log_var). For batched (B, d) inputs the kl is a
    (B,) vector of per-sample values and the gradients are per-sample too.
    """
    var = np.exp(g.log_var)
    kl = 0.5 * np.sum(g.mu ** 2 + var - 1.0 - g.log_var, axis=-1)
    grad_mu = g.mu.copy()
    grad_log_var = 0.5 * (var - 1.0)
    if kl.ndim == 0:
        kl = float(kl)
    return kl, grad_mu, grad_log_var


def reparameterize(g: GaussianParams, alpha: np.ndarray) -> np.ndarray:
    """z = mu + exp(log_var / 2) * alpha, differentiable in mu and log_var."""
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.shape != g.mu.shape:
        raise ShapeError(f"alpha shape {alpha.shape}, expected {g.mu.shape}")
    return g.mu + np.exp(0.5 * g.log_var) * alpha


def reparameterize_backward(g: GaussianParams, alpha: np.ndarray, grad_z: np.ndarray):
    """Gradients of z w.r.t. mu and log_var, given the upstream gradient."""
    grad_mu = grad_z
    grad_log_var = grad_z * 0.5 * np.exp(0.5 * g.log_var) * alpha
    return grad_mu, grad_log_var


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

@dataclass
class AdamState:
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(state: AdamState, params: dict[str, np.ndarray],
              grads: dict[str, np.ndarray]) -> None:
    """One bias-corrected Adam update, in place over named slots."""
    state.step += 1
    t = state.step
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeError(f"gradient shape {g.shape} != param shape {p.shape} for {name!r}")
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        m = state.m[name]
        v = state.v[name]
        m[...] = state.beta1 * m + (1.0 - state.beta1) * g
        v[...] = state.beta2 * v + (1.0 - state.beta2) * g * g
        m_hat = m / (1.0 - state.beta1 ** t)
        v_hat = v / (1.0 - state.beta2 ** t)
        p -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
        if not np.all(np.isfinite(p)):
            raise TrainingDivergedError(f"non-finite values in parameter {name!r} after update")
