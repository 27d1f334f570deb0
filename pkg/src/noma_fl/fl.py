"""Local training: a small dense softmax classifier and its exact gradient.

The model is a one-hidden-layer tanh network with a softmax output trained
under mean cross-entropy. Parameters live in a single flat vector so the
whole model can be quantized, transmitted and aggregated coordinatewise;
the layout object maps the flat vector to layer shapes.
"""

from dataclasses import dataclass

import numpy as np


class NumericalOverflowError(FloatingPointError):
    """Forward pass produced non-finite activations."""


@dataclass(frozen=True)
class MlpLayout:
    input_dim: int
    hidden_dim: int
    num_classes: int

    def __post_init__(self):
        if min(self.input_dim, self.hidden_dim, self.num_classes) < 1:
            raise ValueError("all layer sizes must be positive")

    @property
    def num_params(self) -> int:
        return (
            self.input_dim * self.hidden_dim
            + self.hidden_dim
            + self.hidden_dim * self.num_classes
            + self.num_classes
        )

    def unpack(self, w: np.ndarray):
        """Views of the flat vector as (W1, b1, W2, b2)."""
        d, h, c = self.input_dim, self.hidden_dim, self.num_classes
        if w.shape != (self.num_params,):
            raise ValueError(f"expected {self.num_params} parameters, got {w.shape}")
        i = 0
        w1 = w[i : i + d * h].reshape(d, h)
        i += d * h
        b1 = w[i : i + h]
        i += h
        w2 = w[i : i + h * c].reshape(h, c)
        i += h * c
        b2 = w[i : i + c]
        return w1, b1, w2, b2


def init_params(layout: MlpLayout, rng: np.random.Generator) -> np.ndarray:
    """Fan-in-scaled Gaussian weights, zero biases."""
    d, h, c = layout.input_dim, layout.hidden_dim, layout.num_classes
    w1 = rng.standard_normal((d, h)) / np.sqrt(d)
    w2 = rng.standard_normal((h, c)) / np.sqrt(h)
    return np.concatenate([w1.ravel(), np.zeros(h), w2.ravel(), np.zeros(c)])


def _forward(w, x, layout):
    w1, b1, w2, b2 = layout.unpack(np.asarray(w, dtype=float))
    with np.errstate(over="ignore", invalid="ignore"):  # overflow checked below
        hidden = np.tanh(x @ w1 + b1)
        logits = hidden @ w2 + b2
    if not np.all(np.isfinite(logits)):
        raise NumericalOverflowError("non-finite activations in forward pass")
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=1, keepdims=True)
    return hidden, shifted, probs


def loss_and_gradient(w: np.ndarray, x: np.ndarray, y: np.ndarray, layout: MlpLayout):
    """Mean cross-entropy and its exact gradient w.r.t. the flat vector."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=int)
    if x.shape[0] == 0:
        raise ValueError("batch must be non-empty")
    n = x.shape[0]
    w1, b1, w2, b2 = layout.unpack(np.asarray(w, dtype=float))
    hidden, shifted, probs = _forward(w, x, layout)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    loss = -float(np.mean(log_probs[np.arange(n), y]))

    dlogits = probs.copy()
    dlogits[np.arange(n), y] -= 1.0
    dlogits /= n
    dw2 = hidden.T @ dlogits
    db2 = dlogits.sum(axis=0)
    dhidden = dlogits @ w2.T
    dpre = dhidden * (1.0 - hidden**2)
    dw1 = x.T @ dpre
    db1 = dpre.sum(axis=0)
    grad = np.concatenate([dw1.ravel(), db1, dw2.ravel(), db2])
    return loss, grad


def local_update(
    w: np.ndarray,
    x: np.ndarray,
    y: np.ndarray,
    layout: MlpLayout,
    learning_rate: float,
    local_steps: int = 1,
) -> np.ndarray:
    """Effective uplink gradient g such that w - lr * g is the post-update state.

    With one full-batch step (the default) this is exactly the gradient at w;
    with several local steps it is the accumulated displacement over lr.
    """
    if local_steps < 1:
        raise ValueError("local_steps must be >= 1")
    if local_steps == 1:
        return loss_and_gradient(w, x, y, layout)[1]
    current = np.array(w, dtype=float)
    for _ in range(local_steps):
        current -= learning_rate * loss_and_gradient(current, x, y, layout)[1]
    return (np.asarray(w, dtype=float) - current) / learning_rate


def evaluate(w: np.ndarray, x: np.ndarray, y: np.ndarray, layout: MlpLayout):
    """(accuracy, mean loss) on a labelled set."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=int)
    if x.shape[0] == 0:
        raise ValueError("evaluation set must be non-empty")
    _, shifted, probs = _forward(w, x, layout)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    loss = -float(np.mean(log_probs[np.arange(x.shape[0]), y]))
    accuracy = float(np.mean(np.argmax(probs, axis=1) == y))
    return accuracy, loss
