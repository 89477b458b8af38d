"""
MLP feature extractor with a bias-free proxy classifier.

The extractor is a stack of dense layers, each followed by tanh except the
last. The classifier computes logits = z @ proxies.T, so row c of the proxy
matrix is category c's proxy. Forward passes return a ForwardTrace that
`backward` consumes exactly once.
"""

from dataclasses import dataclass, field

import numpy as np


class ShapeError(Exception):
    """Raised on a dimension mismatch between inputs and parameters."""

    pass


class StaleTraceError(Exception):
    """Raised when a trace is reused or paired with parameters it was not built from."""

    pass


def _frozen(array: np.ndarray) -> np.ndarray:
    out = np.array(array, dtype=np.float64, copy=True)
    out.setflags(write=False)
    return out


# =============================================================================
# Parameters and Gradients
# =============================================================================


@dataclass(frozen=True)
class DenseLayer:
    """Weight of shape (out, in) and bias of shape (out,)."""

    weight: np.ndarray
    bias: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "weight", _frozen(self.weight))
        object.__setattr__(self, "bias", _frozen(self.bias))
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ShapeError(
                f"Layer weight {self.weight.shape} and bias {self.bias.shape} are inconsistent"
            )

    @property
    def in_dim(self) -> int:
        return int(self.weight.shape[1])

    @property
    def out_dim(self) -> int:
        return int(self.weight.shape[0])


@dataclass(frozen=True)
class ModelParams:
    """
    Immutable model parameters: extractor layers (theta) and proxies (Omega).

    Arrays are stored read-only; every update produces a new value.
    """

    layers: tuple[DenseLayer, ...]
    proxies: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "layers", tuple(self.layers))
        object.__setattr__(self, "proxies", _frozen(self.proxies))
        if not self.layers:
            raise ShapeError("A model needs at least one extractor layer")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.out_dim != nxt.in_dim:
                raise ShapeError(f"Layer dims {prev.out_dim} -> {nxt.in_dim} do not chain")
        if self.proxies.ndim != 2 or self.proxies.shape[1] != self.layers[-1].out_dim:
            raise ShapeError(
                f"Proxy matrix {self.proxies.shape} does not match feature dim "
                f"{self.layers[-1].out_dim}"
            )

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def feature_dim(self) -> int:
        return self.layers[-1].out_dim

    @property
    def num_classes(self) -> int:
        return int(self.proxies.shape[0])

    @property
    def num_parameters(self) -> int:
        return sum(layer.weight.size + layer.bias.size for layer in self.layers) + int(
            self.proxies.size
        )

    def with_proxies(self, proxies: np.ndarray) -> "ModelParams":
        return ModelParams(layers=self.layers, proxies=proxies)

    def flatten(self) -> np.ndarray:
        """Layer-major, row-major vector of all parameters (proxies last)."""
        parts = []
        for layer in self.layers:
            parts.append(layer.weight.ravel())
            parts.append(layer.bias.ravel())
        parts.append(self.proxies.ravel())
        return np.concatenate(parts)

    def unflatten(self, vector: np.ndarray) -> "ModelParams":
        """Inverse of flatten, using this value's shapes."""
        vector = np.asarray(vector, dtype=np.float64)
        if vector.shape != (self.num_parameters,):
            raise ShapeError(f"Expected {self.num_parameters} values, got {vector.shape}")
        offset = 0
        layers = []
        for layer in self.layers:
            w_size, b_size = layer.weight.size, layer.bias.size
            weight = vector[offset : offset + w_size].reshape(layer.weight.shape)
            offset += w_size
            bias = vector[offset : offset + b_size]
            offset += b_size
            layers.append(DenseLayer(weight=weight, bias=bias))
        proxies = vector[offset:].reshape(self.proxies.shape)
        return ModelParams(layers=tuple(layers), proxies=proxies)


@dataclass
class GradientBuffer:
    """Per-layer (weight, bias) gradients plus the proxy-matrix gradient."""

    layers: list[tuple[np.ndarray, np.ndarray]]
    proxies: np.ndarray

    @classmethod
    def zeros_like(cls, params: ModelParams) -> "GradientBuffer":
        return cls(
            layers=[
                (np.zeros_like(layer.weight), np.zeros_like(layer.bias))
                for layer in params.layers
            ],
            proxies=np.zeros_like(params.proxies),
        )

    def _check_compatible(self, other: "GradientBuffer") -> None:
        if len(self.layers) != len(other.layers) or self.proxies.shape != other.proxies.shape:
            raise ShapeError("Gradient buffers have different shapes")

    def __add__(self, other: "GradientBuffer") -> "GradientBuffer":
        self._check_compatible(other)
        return GradientBuffer(
            layers=[(w1 + w2, b1 + b2) for (w1, b1), (w2, b2) in zip(self.layers, other.layers)],
            proxies=self.proxies + other.proxies,
        )

    def scale(self, factor: float) -> "GradientBuffer":
        return GradientBuffer(
            layers=[(factor * w, factor * b) for w, b in self.layers],
            proxies=factor * self.proxies,
        )

    def flatten(self) -> np.ndarray:
        parts = []
        for w, b in self.layers:
            parts.append(w.ravel())
            parts.append(b.ravel())
        parts.append(self.proxies.ravel())
        return np.concatenate(parts)

    def norm(self) -> float:
        return float(np.linalg.norm(self.flatten()))


def init_params(
    input_dim: int,
    hidden_dims: tuple[int, ...],
    feature_dim: int,
    num_classes: int,
    rng: np.random.Generator,
) -> ModelParams:
    """
    Random initialization: weights ~ N(0, 1/fan_in), zero biases.

    Args:
        input_dim: D.
        hidden_dims: Widths of tanh hidden layers (the default model uses (32,)).
        feature_dim: d, width of the last (linear) extractor layer.
        num_classes: C, rows of the proxy matrix.
        rng: Generator for the draw.
    """
    dims = [input_dim, *hidden_dims, feature_dim]
    layers = []
    for fan_in, fan_out in zip(dims, dims[1:]):
        weight = rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=(fan_out, fan_in))
        layers.append(DenseLayer(weight=weight, bias=np.zeros(fan_out)))
    proxies = rng.normal(0.0, 1.0 / np.sqrt(feature_dim), size=(num_classes, feature_dim))
    return ModelParams(layers=tuple(layers), proxies=proxies)


# =============================================================================
# Forward / Backward
# =============================================================================


@dataclass
class ForwardTrace:
    """
    Cached forward pass over a batch of inputs.

    Attributes:
        params: The parameters the trace was computed with.
        inputs: Batch of shape (n, D).
        activations: Outputs of each layer (post-tanh for hidden layers).
        features: z, shape (n, d); alias of the last activation.
    """

    params: ModelParams
    inputs: np.ndarray
    activations: list[np.ndarray]
    consumed: bool = field(default=False)

    @property
    def features(self) -> np.ndarray:
        return self.activations[-1]

    @property
    def logits(self) -> np.ndarray:
        return classify(self.params, self.features)[0]

    @property
    def probs(self) -> np.ndarray:
        return classify(self.params, self.features)[1]


def _as_batch(x: np.ndarray, width: int, what: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != width:
        raise ShapeError(f"{what} must have {width} columns, got shape {x.shape}")
    return x


def forward_extract(params: ModelParams, x: np.ndarray) -> ForwardTrace:
    """
    Run the feature extractor.

    Args:
        params: Model parameters.
        x: Input batch (n, D) or a single vector (D,).

    Returns:
        ForwardTrace holding features z of shape (n, d).

    Raises:
        ShapeError: If x does not have D columns.
    """
    x = _as_batch(x, params.input_dim, "Input")
    activations = []
    a = x
    last = len(params.layers) - 1
    for i, layer in enumerate(params.layers):
        h = a @ layer.weight.T + layer.bias
        a = h if i == last else np.tanh(h)
        activations.append(a)
    return ForwardTrace(params=params, inputs=x, activations=activations)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max-subtraction."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise log-softmax with max-subtraction."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def logsumexp(values: np.ndarray, axis: int = -1) -> np.ndarray:
    """Stabilized log-sum-exp; -inf entries are ignored."""
    peak = np.max(values, axis=axis, keepdims=True)
    peak = np.where(np.isfinite(peak), peak, 0.0)
    total = np.exp(values - peak).sum(axis=axis, keepdims=True)
    return np.squeeze(peak + np.log(total), axis=axis)


def classify(params: ModelParams, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    Apply the proxy classifier.

    Args:
        params: Model parameters.
        z: Features (n, d) or (d,).

    Returns:
        Tuple of (logits, probs), each (n, C).
    """
    z = _as_batch(z, params.feature_dim, "Features")
    logits = z @ params.proxies.T
    return logits, softmax(logits)


def predict(params: ModelParams, x: np.ndarray) -> np.ndarray:
    """Class probabilities for an input batch."""
    return classify(params, forward_extract(params, x).features)[1]


def backward(
    params: ModelParams,
    trace: ForwardTrace,
    grad_features: np.ndarray,
    grad_proxies: np.ndarray | None = None,
) -> GradientBuffer:
    """
    Reverse-mode pass through the extractor.

    Args:
        params: Parameters the trace was produced with.
        trace: Forward trace; consumed by this call.
        grad_features: dL/dz, shape (n, d).
        grad_proxies: dL/dOmega accumulated by the caller, shape (C, d).

    Returns:
        GradientBuffer of dL/dparams.

    Raises:
        StaleTraceError: If the trace was already consumed or belongs to other params.
        ShapeError: If grad_features does not match the trace.
    """
    if trace.consumed:
        raise StaleTraceError("Trace was already consumed by a backward pass")
    if trace.params is not params:
        raise StaleTraceError("Trace was produced by different parameters")
    trace.consumed = True

    delta = np.asarray(grad_features, dtype=np.float64)
    if delta.shape != trace.features.shape:
        raise ShapeError(f"grad_features {delta.shape} != features {trace.features.shape}")

    layer_grads: list[tuple[np.ndarray, np.ndarray]] = []
    last = len(params.layers) - 1
    for i in range(last, -1, -1):
        if i != last:
            delta = delta * (1.0 - trace.activations[i] ** 2)
        below = trace.activations[i - 1] if i > 0 else trace.inputs
        layer_grads.append((delta.T @ below, delta.sum(axis=0)))
        delta = delta @ params.layers[i].weight
    layer_grads.reverse()

    proxies = (
        np.zeros_like(params.proxies)
        if grad_proxies is None
        else np.asarray(grad_proxies, dtype=np.float64)
    )
    return GradientBuffer(layers=layer_grads, proxies=proxies)


def sgd_step(params: ModelParams, grads: GradientBuffer, lr: float) -> ModelParams:
    """Return params - lr * grads."""
    if len(grads.layers) != len(params.layers) or grads.proxies.shape != params.proxies.shape:
        raise ShapeError("Gradient buffer does not match parameters")
    layers = tuple(
        DenseLayer(weight=layer.weight - lr * gw, bias=layer.bias - lr * gb)
        for layer, (gw, gb) in zip(params.layers, grads.layers)
    )
    return ModelParams(layers=layers, proxies=params.proxies - lr * grads.proxies)
