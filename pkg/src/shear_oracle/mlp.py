"""Feedforward regressor: ReLU hidden layers with inverted dropout, scalar output.

The default configuration is four hidden layers of 64, 1000, 200 and 8
units. Dropout follows every hidden layer, including the 8-unit one, and
uses the inverted convention: kept units are scaled by 1/(1-p) at train
time so the eval-mode pass needs no rescaling and applies no dropout at
all. ReLU's derivative at 0 is taken as 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numeric import Rng, xavier_uniform


@dataclass(frozen=True)
class MlpConfig:
    input_size: int
    hidden_sizes: tuple[int, ...] = (64, 1000, 200, 8)
    dropout_p: float = 0.2

    def __post_init__(self):
        if self.input_size < 1 or any(h < 1 for h in self.hidden_sizes):
            raise ValueError(f"all layer sizes must be >= 1, got {self}")
        if not (0.0 <= self.dropout_p < 1.0):
            raise ValueError(f"dropout_p must be in [0, 1), got {self.dropout_p}")
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))

    @property
    def layer_dims(self) -> list[tuple[int, int]]:
        """(fan_in, fan_out) per weight matrix, output layer included."""
        sizes = [self.input_size, *self.hidden_sizes, 1]
        return [(sizes[i], sizes[i + 1]) for i in range(len(sizes) - 1)]


@dataclass
class MlpParams:
    """Weight matrices (out x in) and bias vectors for every layer."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def validate_chain(self, config: MlpConfig) -> None:
        dims = config.layer_dims
        if len(self.weights) != len(dims) or len(self.biases) != len(dims):
            raise ValueError(
                f"expected {len(dims)} layers, got {len(self.weights)} weights"
            )
        for i, (fan_in, fan_out) in enumerate(dims):
            if self.weights[i].shape != (fan_out, fan_in):
                raise ValueError(
                    f"W{i + 1} has shape {self.weights[i].shape}, expected {(fan_out, fan_in)}"
                )
            if self.biases[i].shape != (fan_out,):
                raise ValueError(
                    f"b{i + 1} has shape {self.biases[i].shape}, expected {(fan_out,)}"
                )

    def copy(self) -> "MlpParams":
        return MlpParams(
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
        )

    def n_parameters(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)


@dataclass
class ForwardTrace:
    """Intermediates of one train-mode pass, kept for backprop.

    ``activations[i]`` is the input to weight matrix i (so activations[0]
    is the batch itself); ``pre_activations[i]`` is W_i.x + b_i before the
    nonlinearity; ``dropout_masks[i]`` holds 0 for dropped units and
    1/(1-p) for kept units of hidden layer i.
    """

    activations: list[np.ndarray] = field(default_factory=list)
    pre_activations: list[np.ndarray] = field(default_factory=list)
    dropout_masks: list[np.ndarray] = field(default_factory=list)
    outputs: np.ndarray = None


def init_params(config: MlpConfig, rng: Rng) -> MlpParams:
    """Xavier-uniform weights per layer, zero biases."""
    weights, biases = [], []
    for fan_in, fan_out in config.layer_dims:
        weights.append(xavier_uniform(fan_in, fan_out, rng))
        biases.append(np.zeros(fan_out))
    return MlpParams(weights=weights, biases=biases)


def _as_batch(x: np.ndarray, input_size: int) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != input_size:
        raise ValueError(f"input has shape {np.shape(x)}, expected (*, {input_size})")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite input rejected")
    return x, single


def forward_eval(params: MlpParams, x: np.ndarray) -> np.ndarray:
    """Deterministic prediction pass: no dropout anywhere.

    Accepts a single vector (returns a scalar) or a batch (returns (n,)).
    """
    input_size = params.weights[0].shape[1]
    h, single = _as_batch(x, input_size)
    last = len(params.weights) - 1
    for i in range(last):
        h = np.maximum(h @ params.weights[i].T + params.biases[i], 0.0)
    out = (h @ params.weights[last].T + params.biases[last]).ravel()
    return float(out[0]) if single else out


def sample_dropout_masks(
    config: MlpConfig, n: int, rng: Rng
) -> list[np.ndarray]:
    """Inverted-dropout masks for one train pass: 0 dropped, 1/(1-p) kept."""
    p = config.dropout_p
    masks = []
    for h in config.hidden_sizes:
        if p == 0.0:
            masks.append(np.ones((n, h)))
        else:
            keep = rng.uniform(0.0, 1.0, (n, h)) >= p
            masks.append(keep / (1.0 - p))
    return masks


def forward_train(
    params: MlpParams,
    x: np.ndarray,
    config: MlpConfig,
    rng: Rng = None,
    dropout_masks: list[np.ndarray] = None,
) -> ForwardTrace:
    """Train-mode pass with inverted dropout after every hidden layer.

    Masks are freshly sampled from ``rng`` unless given explicitly
    (explicit masks make the pass deterministic, which the finite-difference
    gradient check relies on).
    """
    h, _ = _as_batch(x, config.input_size)
    if dropout_masks is None:
        if rng is None:
            raise ValueError("train-mode forward needs an rng or explicit dropout masks")
        dropout_masks = sample_dropout_masks(config, h.shape[0], rng)
    trace = ForwardTrace(dropout_masks=dropout_masks)
    trace.activations.append(h)
    last = len(params.weights) - 1
    for i in range(last):
        z = h @ params.weights[i].T + params.biases[i]
        h = np.maximum(z, 0.0) * dropout_masks[i]
        trace.pre_activations.append(z)
        trace.activations.append(h)
    trace.outputs = (h @ params.weights[last].T + params.biases[last]).ravel()
    return trace


def backward(
    params: MlpParams, trace: ForwardTrace, y_scaled: np.ndarray
) -> tuple[MlpParams, float]:
    """Exact gradient of the batch MSE through the traced pass.

    Returns (gradients shaped like the parameters, batch MSE). The sampled
    dropout masks in the trace are respected, so gradients of dropped paths
    are exactly zero.
    """
    y = np.asarray(y_scaled, dtype=np.float64).ravel()
    n = y.shape[0]
    if n == 0:
        raise ValueError("empty batch")
    if trace.outputs.shape[0] != n:
        raise ValueError(f"trace has {trace.outputs.shape[0]} outputs, targets have {n}")

    residual = trace.outputs - y
    mse = float(np.mean(residual**2))

    last = len(params.weights) - 1
    g_weights = [None] * (last + 1)
    g_biases = [None] * (last + 1)

    delta = (2.0 * residual / n)[:, None]
    g_weights[last] = delta.T @ trace.activations[last]
    g_biases[last] = delta.sum(axis=0)

    for i in range(last - 1, -1, -1):
        upstream = delta @ params.weights[i + 1]
        delta = upstream * trace.dropout_masks[i] * (trace.pre_activations[i] > 0.0)
        g_weights[i] = delta.T @ trace.activations[i]
        g_biases[i] = delta.sum(axis=0)

    return MlpParams(weights=g_weights, biases=g_biases), mse
