"""Small fully connected networks trained with full-batch Adam.

Hidden layers apply ``tanh``; the output layer is affine. Weight matrices
are stored ``(fan_out, fan_in)`` so a layer maps ``x -> W @ x + b``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigurationError, DataError, DimensionError, DivergenceError

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

ACTIVATIONS = ("tanh",)


@dataclass(frozen=True)
class MlpConfig:
    """Architecture and optimizer settings for one network.

    ``lr_decay_every=None`` means ``max(1, epochs // 5)``.
    """

    layer_sizes: tuple[int, ...]
    activation: str = "tanh"
    seed: int = 0
    epochs: int = 1000
    learning_rate: float = 1e-3
    lr_decay_factor: float = 0.5
    lr_decay_every: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "layer_sizes", tuple(int(s) for s in self.layer_sizes))
        self.validate()

    def validate(self):
        sizes = self.layer_sizes
        if len(sizes) < 3:
            raise ConfigurationError("an MLP needs an input, at least one hidden and an output layer")
        if any(s < 1 for s in sizes):
            raise ConfigurationError(f"layer sizes must be positive, got {sizes}")
        if sizes[0] != sizes[-1]:
            raise ConfigurationError(f"input and output sizes must match (r -> r), got {sizes}")
        if self.activation not in ACTIVATIONS:
            raise ConfigurationError(f"unknown activation {self.activation!r}")
        if self.epochs < 1:
            raise ConfigurationError("epochs must be >= 1")
        if not self.learning_rate > 0:
            raise ConfigurationError("learning_rate must be > 0")
        if not self.lr_decay_factor > 0:
            raise ConfigurationError("lr_decay_factor must be > 0")
        if self.lr_decay_every is not None and self.lr_decay_every < 1:
            raise ConfigurationError("lr_decay_every must be >= 1")

    @property
    def decay_every(self) -> int:
        if self.lr_decay_every is not None:
            return self.lr_decay_every
        return max(1, self.epochs // 5)

    def replace(self, **changes) -> "MlpConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["layer_sizes"] = list(self.layer_sizes)
        return d

    @classmethod
    def from_dict(cls, d) -> "MlpConfig":
        return cls(**d)


@dataclass
class Mlp:
    """Feedforward network parameters. Also used to hold gradients."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: str = "tanh"

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.weights[0].shape[1],) + tuple(w.shape[0] for w in self.weights)

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def copy(self) -> "Mlp":
        return Mlp([w.copy() for w in self.weights], [b.copy() for b in self.biases], self.activation)

    def flat(self) -> np.ndarray:
        """All parameters as one vector (weights then bias, layer by layer)."""
        return np.concatenate([np.concatenate([w.ravel(), b]) for w, b in zip(self.weights, self.biases)])

    def with_flat(self, theta) -> "Mlp":
        out = self.copy()
        pos = 0
        for w, b in zip(out.weights, out.biases):
            w[...] = np.reshape(theta[pos : pos + w.size], w.shape)
            pos += w.size
            b[...] = theta[pos : pos + b.size]
            pos += b.size
        return out

    def __call__(self, x):
        return mlp_forward(self, x)

    def to_dict(self) -> dict:
        return {
            "activation": self.activation,
            "layer_sizes": list(self.layer_sizes),
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, d) -> "Mlp":
        weights = [np.array(w, dtype=np.float64, ndmin=2) for w in d["weights"]]
        biases = [np.array(b, dtype=np.float64, ndmin=1) for b in d["biases"]]
        net = cls(weights, biases, d.get("activation", "tanh"))
        if list(net.layer_sizes) != list(d["layer_sizes"]):
            raise DimensionError("serialized layer sizes do not match weight shapes")
        return net


@dataclass
class WeightedDataset:
    """Training pairs ``(inputs[i], targets[i])`` with nonnegative sample weights."""

    inputs: np.ndarray
    targets: np.ndarray
    sample_weights: np.ndarray = field(default=None)

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=np.float64))
        self.targets = np.atleast_2d(np.asarray(self.targets, dtype=np.float64))
        m = self.inputs.shape[0]
        if self.sample_weights is None:
            self.sample_weights = np.ones(m)
        self.sample_weights = np.asarray(self.sample_weights, dtype=np.float64).reshape(-1)
        if self.targets.shape[0] != m or self.sample_weights.shape[0] != m:
            raise DimensionError("inputs, targets and sample_weights must have equal lengths")
        if m == 0:
            raise DataError("empty dataset")
        if np.any(self.sample_weights < 0) or not np.any(self.sample_weights > 0):
            raise DataError("sample weights must be nonnegative with at least one positive")
        for name in ("inputs", "targets", "sample_weights"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise DataError(f"{name} contains NaN or Inf")

    def __len__(self):
        return self.inputs.shape[0]


def mlp_init(config: MlpConfig, zero: bool = False) -> Mlp:
    """Glorot-uniform weights and zero biases from ``config.seed``.

    ``zero=True`` returns an all-zero network (useful as a fixed point).
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    sizes = config.layer_sizes
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        if zero:
            w = np.zeros((fan_out, fan_in))
        else:
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            w = rng.uniform(-limit, limit, size=(fan_out, fan_in))
        weights.append(w)
        biases.append(np.zeros(fan_out))
    return Mlp(weights, biases, config.activation)


def _check_input(net, x):
    x = np.asarray(x, dtype=np.float64)
    n_in = net.weights[0].shape[1]
    if x.shape[-1] != n_in or x.ndim > 2:
        raise DimensionError(f"network expects inputs of length {n_in}, got shape {x.shape}")
    return x


def mlp_forward(net: Mlp, x) -> np.ndarray:
    """Evaluate the network on one vector or on a batch of row vectors."""
    x = _check_input(net, x)
    h = x
    last = len(net.weights) - 1
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        h = h @ w.T + b
        if k < last:
            h = np.tanh(h)
    return h


def mlp_loss_and_grad(net: Mlp, data: WeightedDataset):
    """Weighted squared loss ``sum_i w_i |net(x_i) - z_i|^2`` and its exact gradient.

    Returns ``(loss, grads)`` where ``grads`` is an :class:`Mlp` holding the
    partial derivatives in the same shapes as ``net``.
    """
    x = _check_input(net, data.inputs)
    activations = [x]
    h = x
    last = len(net.weights) - 1
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        h = h @ w.T + b
        if k < last:
            h = np.tanh(h)
        activations.append(h)
    resid = activations[-1] - data.targets
    sw = data.sample_weights
    loss = float(np.sum(sw * np.einsum("ij,ij->i", resid, resid)))

    delta = 2.0 * sw[:, None] * resid
    gw = [None] * len(net.weights)
    gb = [None] * len(net.weights)
    for k in range(last, -1, -1):
        gw[k] = delta.T @ activations[k]
        gb[k] = delta.sum(axis=0)
        if k > 0:
            a = activations[k]
            delta = (delta @ net.weights[k]) * (1.0 - a * a)
    return loss, Mlp(gw, gb, net.activation)


class Adam:
    """Adam state for a list of parameter arrays."""

    def __init__(self, params, lr=1e-3, beta1=ADAM_BETA1, beta2=ADAM_BETA2, eps=ADAM_EPS):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params, grads):
        """Update ``params`` in place."""
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def mlp_train(net: Mlp, data: WeightedDataset, config: MlpConfig):
    """Full-batch Adam on the weighted squared loss.

    The learning rate is multiplied by ``config.lr_decay_factor`` every
    ``config.decay_every`` epochs. ``net`` is left untouched.

    Returns
    -------
    trained : Mlp
    final_loss : float
        Loss of ``trained`` on ``data``.
    history : ndarray, shape (epochs,)
        Loss at the start of every epoch, before that epoch's update.
    """
    config.validate()
    trained = net.copy()
    params = trained.weights + trained.biases
    opt = Adam(params, lr=config.learning_rate)
    every = config.decay_every
    history = np.empty(config.epochs)
    for epoch in range(config.epochs):
        opt.lr = config.learning_rate * config.lr_decay_factor ** (epoch // every)
        loss, grads = mlp_loss_and_grad(trained, data)
        if not np.isfinite(loss):
            raise DivergenceError(f"training loss became non-finite at epoch {epoch}", epoch=epoch)
        history[epoch] = loss
        opt.step(params, grads.weights + grads.biases)
    final_loss, _ = mlp_loss_and_grad(trained, data)
    if not np.isfinite(final_loss):
        raise DivergenceError(f"training loss became non-finite at epoch {config.epochs}", epoch=config.epochs)
    return trained, final_loss, history
