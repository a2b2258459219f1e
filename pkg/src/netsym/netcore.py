"""Minimal fully connected networks without bias terms.

A network of depth ``d`` over widths ``(n_0, ..., n_d)`` is parameterized
by ``d`` weight matrices, ``W_k`` of shape ``n_{k-1} x n_k``.  Hidden
layers apply one shared elementwise activation after the matrix product;
the output layer is linear.  Keeping the parameterization this lean makes
node reordering an exact operation on matrix rows and columns, which the
rest of the package relies on.

All operations are pure functions of their arguments plus an explicit
seed; nothing here keeps mutable state between calls.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import FileFormatError, ShapeMismatchError, TrainingDivergedError

NETWORK_FORMAT_VERSION = 1

ACTIVATIONS = ("tanh", "identity", "relu")

_ACT = {
    "tanh": np.tanh,
    "identity": lambda a: a,
    "relu": lambda a: np.maximum(a, 0.0),
}

# Derivatives are taken with respect to the pre-activation.  relu uses the
# zero subgradient at exactly 0.
_ACT_DERIV = {
    "tanh": lambda a: 1.0 - np.tanh(a) ** 2,
    "identity": lambda a: np.ones_like(a),
    "relu": lambda a: (a > 0.0).astype(float),
}


@dataclass(frozen=True)
class Architecture:
    """Ordered layer widths ``(n_0, n_1, ..., n_d)`` with ``d >= 1``."""

    layer_widths: tuple[int, ...]

    def __post_init__(self):
        widths = tuple(int(w) for w in self.layer_widths)
        object.__setattr__(self, "layer_widths", widths)
        if len(widths) < 2:
            raise ValueError("architecture needs at least an input and an output layer")
        if any(w < 1 for w in widths):
            raise ValueError(f"all layer widths must be >= 1, got {widths}")

    @property
    def depth(self) -> int:
        """Number of weight matrices, d."""
        return len(self.layer_widths) - 1

    @property
    def n_inputs(self) -> int:
        return self.layer_widths[0]

    @property
    def n_outputs(self) -> int:
        return self.layer_widths[-1]

    @property
    def hidden_widths(self) -> tuple[int, ...]:
        return self.layer_widths[1:-1]

    def weight_shapes(self) -> list[tuple[int, int]]:
        w = self.layer_widths
        return [(w[k], w[k + 1]) for k in range(self.depth)]


@dataclass
class NetworkParams:
    """A concrete parameterization: architecture, weights, activation tag.

    Weight matrices are stored as float64 arrays and are copied on
    construction; treat instances as immutable values.
    """

    architecture: Architecture
    weights: list[np.ndarray]
    activation: str = "tanh"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(
                f"unknown activation {self.activation!r}; expected one of {ACTIVATIONS}"
            )
        expected = self.architecture.weight_shapes()
        if len(self.weights) != len(expected):
            raise ShapeMismatchError(
                f"expected {len(expected)} weight matrices, got {len(self.weights)}"
            )
        ws = []
        for k, (w, shape) in enumerate(zip(self.weights, expected)):
            arr = np.array(w, dtype=float)
            if arr.shape != shape:
                raise ShapeMismatchError(
                    f"weight matrix {k + 1} has shape {arr.shape}, expected {shape}"
                )
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"weight matrix {k + 1} contains non-finite entries")
            ws.append(arr)
        self.weights = ws


@dataclass
class Dataset:
    """Paired inputs (m x n_0) and targets (m x n_d)."""

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.array(self.inputs, dtype=float))
        self.targets = np.atleast_2d(np.array(self.targets, dtype=float))
        if len(self.inputs) == 0:
            raise ValueError("dataset is empty")
        if len(self.inputs) != len(self.targets):
            raise ShapeMismatchError(
                f"{len(self.inputs)} inputs vs {len(self.targets)} targets"
            )
        if not (np.all(np.isfinite(self.inputs)) and np.all(np.isfinite(self.targets))):
            raise ValueError("dataset contains non-finite values")

    def __len__(self) -> int:
        return len(self.inputs)


def build_network(arch: Architecture, init_scale: float, seed: int) -> NetworkParams:
    """Draw a network with i.i.d. uniform[-init_scale, +init_scale] weights.

    The same (arch, init_scale, seed) triple always produces bit-identical
    weights.
    """
    if init_scale < 0:
        raise ValueError("init_scale must be >= 0")
    rng = np.random.default_rng(seed)
    weights = [rng.uniform(-init_scale, init_scale, size=s) for s in arch.weight_shapes()]
    return NetworkParams(arch, weights)


def forward(params: NetworkParams, x) -> np.ndarray:
    """Evaluate the network on a single input vector of length n_0."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != params.architecture.n_inputs:
        raise ShapeMismatchError(
            f"input has shape {x.shape}, expected ({params.architecture.n_inputs},)"
        )
    if not np.all(np.isfinite(x)):
        raise ValueError("input contains non-finite values")
    return forward_batch(params, x[None, :])[0]


def forward_batch(params: NetworkParams, X) -> np.ndarray:
    """Evaluate the network on a batch of inputs, shape (m, n_0) -> (m, n_d)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != params.architecture.n_inputs:
        raise ShapeMismatchError(
            f"batch has {X.shape[1]} columns, expected {params.architecture.n_inputs}"
        )
    act = _ACT[params.activation]
    h = X
    for W in params.weights[:-1]:
        h = act(h @ W)
    return h @ params.weights[-1]


def _epoch_batches(rng: np.random.Generator, n_samples: int, batch_size: int):
    """Seeded random partition of sample indices, reshuffled per call."""
    order = rng.permutation(n_samples)
    for start in range(0, n_samples, batch_size):
        yield order[start : start + batch_size]


def _train(
    params: NetworkParams,
    data: Dataset,
    lr: float,
    epochs: int,
    batch_size: int,
    seed: int,
    keep_masks: list[np.ndarray | None] | None = None,
) -> tuple[NetworkParams, list[float]]:
    """Shared mini-batch SGD loop.

    ``keep_masks`` holds optional 0/1 arrays per layer; masked-out entries
    are zeroed at initialization and re-zeroed after every update, so they
    stay exactly 0 throughout.
    """
    if lr < 0:
        raise ValueError("learning rate must be >= 0")
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    if not 1 <= batch_size <= len(data):
        raise ValueError(f"batch_size must be in [1, {len(data)}]")
    if data.inputs.shape[1] != params.architecture.n_inputs:
        raise ShapeMismatchError("dataset input width does not match the architecture")
    if data.targets.shape[1] != params.architecture.n_outputs:
        raise ShapeMismatchError("dataset target width does not match the architecture")

    act = _ACT[params.activation]
    act_deriv = _ACT_DERIV[params.activation]
    ws = [w.copy() for w in params.weights]
    if keep_masks is not None:
        for k, mask in enumerate(keep_masks):
            if mask is not None:
                ws[k] = ws[k] * mask

    rng = np.random.default_rng(seed)
    n_d = params.architecture.n_outputs
    m = len(data)
    loss_trace: list[float] = []

    for epoch in range(epochs):
        sq_err_sum = 0.0
        for idx in _epoch_batches(rng, m, batch_size):
            xb = data.inputs[idx]
            yb = data.targets[idx]

            # Forward pass, keeping activations for the backward sweep.
            hs = [xb]
            pre = []
            h = xb
            for W in ws[:-1]:
                a = h @ W
                pre.append(a)
                h = act(a)
                hs.append(h)
            out = h @ ws[-1]

            err = out - yb
            sq_err_sum += float((err ** 2).sum())

            # Reverse-mode gradient of the batch mean squared error.
            delta = (2.0 / (len(xb) * n_d)) * err
            grads = [None] * len(ws)
            grads[-1] = hs[-1].T @ delta
            for k in range(len(ws) - 2, -1, -1):
                delta = (delta @ ws[k + 1].T) * act_deriv(pre[k])
                grads[k] = hs[k].T @ delta

            for k in range(len(ws)):
                ws[k] -= lr * grads[k]
                if keep_masks is not None and keep_masks[k] is not None:
                    ws[k] *= keep_masks[k]

        epoch_loss = sq_err_sum / (m * n_d)
        if not math.isfinite(epoch_loss):
            raise TrainingDivergedError(epoch)
        loss_trace.append(epoch_loss)

    try:
        trained = NetworkParams(params.architecture, ws, params.activation)
    except ValueError as exc:
        raise TrainingDivergedError(epochs - 1, str(exc)) from exc
    return trained, loss_trace


def train_sgd(
    params: NetworkParams,
    data: Dataset,
    lr: float,
    epochs: int,
    batch_size: int,
    seed: int,
) -> tuple[NetworkParams, list[float]]:
    """Mini-batch SGD on the mean squared error.

    Batches are seeded random partitions, reshuffled each epoch.  Returns
    the trained parameters and the per-epoch mean training loss (averaged
    over batches as they are visited, before each update).

    Raises :class:`TrainingDivergedError` if a non-finite loss appears.
    """
    return _train(params, data, lr, epochs, batch_size, seed)


# ---------------------------------------------------------------------------
# Network file format (JSON, one document)


def _fmt(v: float) -> str:
    # 17 significant digits: lossless decimal round trip for binary64.
    return format(float(v), ".17g")


def network_to_doc(params: NetworkParams) -> dict:
    """Plain-dict form of the network file schema."""
    return {
        "format_version": NETWORK_FORMAT_VERSION,
        "architecture": list(params.architecture.layer_widths),
        "activation": params.activation,
        "layers": [
            {"rows": W.shape[0], "cols": W.shape[1], "data": [float(v) for v in W.ravel()]}
            for W in params.weights
        ],
    }


def network_from_doc(doc: dict) -> NetworkParams:
    """Validate and decode the network file schema."""
    if not isinstance(doc, dict):
        raise FileFormatError("network document must be a JSON object")
    version = doc.get("format_version")
    if version != NETWORK_FORMAT_VERSION:
        raise FileFormatError(f"unsupported format_version {version!r}")
    try:
        arch = Architecture(tuple(doc["architecture"]))
        activation = doc["activation"]
        layers = doc["layers"]
    except (KeyError, TypeError, ValueError) as exc:
        raise FileFormatError(f"malformed network document: {exc}") from exc
    if not isinstance(layers, list) or len(layers) != arch.depth:
        raise FileFormatError(
            f"expected {arch.depth} layers for architecture {arch.layer_widths}"
        )
    weights = []
    for k, layer in enumerate(layers):
        try:
            rows, cols = int(layer["rows"]), int(layer["cols"])
            data = [float(v) for v in layer["data"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise FileFormatError(f"malformed layer {k + 1}: {exc}") from exc
        if (rows, cols) != arch.weight_shapes()[k]:
            raise FileFormatError(
                f"layer {k + 1} declares shape {(rows, cols)}, architecture "
                f"requires {arch.weight_shapes()[k]}"
            )
        if len(data) != rows * cols:
            raise FileFormatError(
                f"layer {k + 1} has {len(data)} values, expected {rows * cols}"
            )
        weights.append(np.array(data, dtype=float).reshape(rows, cols))
    try:
        return NetworkParams(arch, weights, activation)
    except (ValueError, ShapeMismatchError) as exc:
        raise FileFormatError(str(exc)) from exc


def dumps_network(params: NetworkParams) -> str:
    """Serialize to the network file format.

    Weight values are written with 17 significant digits, which round-trips
    float64 exactly.  The writer is hand-rolled so the numeric rendering is
    under our control rather than the JSON library's.
    """
    arch = json.dumps(list(params.architecture.layer_widths))
    layer_parts = []
    for W in params.weights:
        data = ", ".join(_fmt(v) for v in W.ravel())
        layer_parts.append(
            '    {"rows": %d, "cols": %d, "data": [%s]}' % (W.shape[0], W.shape[1], data)
        )
    return (
        "{\n"
        f'  "format_version": {NETWORK_FORMAT_VERSION},\n'
        f'  "architecture": {arch},\n'
        f'  "activation": {json.dumps(params.activation)},\n'
        '  "layers": [\n' + ",\n".join(layer_parts) + "\n  ]\n"
        "}\n"
    )


def loads_network(text: str) -> NetworkParams:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"invalid JSON: {exc}") from exc
    return network_from_doc(doc)


def save_network(params: NetworkParams, path) -> None:
    """Write the network file; loading it back is bit-exact."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_network(params))


def load_network(path) -> NetworkParams:
    with open(path, "r", encoding="utf-8") as fh:
        return loads_network(fh.read())
