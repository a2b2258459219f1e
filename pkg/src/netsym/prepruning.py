"""Symmetry-breaking binary masks applied before training.

A layer whose weight matrix is Hadamard-multiplied by a 0/1 matrix with
pairwise-distinct columns loses its node permutability: swapping two nodes
would swap their distinct zero patterns and change the function.  Masks
are drawn entrywise Bernoulli with a zero rate ``rho``; duplicate columns
are repaired by redrawing only the offending columns, which keeps the rho
statistics and determinism given the seed.

The capacity lost to zeroed weights can be compensated by inflating hidden
widths by 1/(1 - rho) before masking.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import FileFormatError, MaskError, ShapeMismatchError
from .netcore import Architecture, Dataset, NetworkParams, _train

_MAX_REDRAW_ROUNDS = 64


@dataclass
class BinaryMask:
    """A 0/1 matrix shaped like the weight matrix it prunes."""

    bits: np.ndarray
    rho: float
    seed: int | None = None

    def __post_init__(self):
        arr = np.array(self.bits, dtype=np.int8)
        if arr.ndim != 2:
            raise ValueError("mask bits must be a 2-D matrix")
        if not np.isin(arr, (0, 1)).all():
            raise ValueError("mask entries must be 0 or 1")
        if not 0.0 <= self.rho < 1.0:
            raise ValueError("rho must lie in [0, 1)")
        self.bits = arr

    @property
    def rows(self) -> int:
        return self.bits.shape[0]

    @property
    def cols(self) -> int:
        return self.bits.shape[1]

    def zero_fraction(self) -> float:
        return float((self.bits == 0).mean())

    def columns_distinct(self) -> bool:
        return _duplicate_columns(self.bits).size == 0


def _duplicate_columns(bits: np.ndarray) -> np.ndarray:
    """Indices of columns that repeat an earlier column."""
    seen: dict[bytes, int] = {}
    dups = []
    for j in range(bits.shape[1]):
        key = bits[:, j].tobytes()
        if key in seen:
            dups.append(j)
        else:
            seen[key] = j
    return np.array(dups, dtype=np.int64)


def generate_mask(rows: int, cols: int, rho: float, seed: int) -> BinaryMask:
    """Draw a Bernoulli mask with pairwise-distinct columns.

    Entries are 0 with probability ``rho``.  Requires ``2**rows >= cols``
    (otherwise distinct columns cannot exist) and ``rho < 1``.  ``rho == 0``
    with more than one column is rejected: an all-ones mask cannot have
    distinct columns, and an all-ones mask breaks no symmetry anyway.
    """
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be >= 1")
    if not 0.0 <= rho < 1.0:
        raise ValueError("rho must lie in [0, 1)")
    if (1 << rows) < cols:
        raise MaskError(
            f"only 2^{rows} distinct binary columns exist; cannot fill {cols} columns"
        )
    rng = np.random.default_rng(seed)
    if rho == 0.0:
        if cols > 1:
            raise MaskError("rho=0 produces identical all-ones columns for cols > 1")
        return BinaryMask(np.ones((rows, 1), dtype=np.int8), rho, seed)

    bits = (rng.random((rows, cols)) >= rho).astype(np.int8)
    for _ in range(_MAX_REDRAW_ROUNDS):
        dups = _duplicate_columns(bits)
        if dups.size == 0:
            return BinaryMask(bits, rho, seed)
        bits[:, dups] = (rng.random((rows, dups.size)) >= rho).astype(np.int8)
    raise MaskError(
        f"could not draw {cols} distinct columns in {_MAX_REDRAW_ROUNDS} rounds; "
        f"shape ({rows}x{cols}) with rho={rho} is pathological"
    )


def collision_probability(rows: int, cols: int, rho: float) -> float:
    """Union-bound estimate that an unrepaired draw has equal columns.

    Two independent columns agree entrywise with probability
    ``p = rho^2 + (1-rho)^2`` per row; the bound is C(cols, 2) * p^rows,
    clamped to [0, 1].
    """
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be >= 1")
    if not 0.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [0, 1]")
    if cols == 1:
        return 0.0
    p_match = rho * rho + (1.0 - rho) ** 2
    return min(1.0, math.comb(cols, 2) * p_match ** rows)


def apply_mask(W, mask: BinaryMask) -> np.ndarray:
    """Hadamard product; masked entries come out exactly 0."""
    W = np.asarray(W, dtype=float)
    if W.shape != mask.bits.shape:
        raise ShapeMismatchError(f"matrix {W.shape} vs mask {mask.bits.shape}")
    return W * mask.bits


def inflate_width(arch: Architecture, rho: float) -> Architecture:
    """Scale hidden widths by 1/(1 - rho), rounding up; input/output stay."""
    if not 0.0 <= rho < 1.0:
        raise ValueError("rho must lie in [0, 1)")
    widths = list(arch.layer_widths)
    for i in range(1, len(widths) - 1):
        widths[i] = math.ceil(widths[i] / (1.0 - rho))
    return Architecture(tuple(widths))


def train_masked(
    params: NetworkParams,
    masks: list[BinaryMask | None],
    data: Dataset,
    lr: float,
    epochs: int,
    batch_size: int,
    seed: int,
) -> tuple[NetworkParams, list[float]]:
    """SGD with permanently zeroed entries.

    ``masks`` lists one mask (or None) per weight matrix.  Masked entries
    are zeroed before training and re-zeroed after every update, so the
    returned network satisfies W = W o B exactly.  With all-ones masks the
    trajectory is identical to plain ``train_sgd`` under the same seed.
    """
    if len(masks) != params.architecture.depth:
        raise ShapeMismatchError(
            f"expected {params.architecture.depth} masks, got {len(masks)}"
        )
    arrays: list[np.ndarray | None] = []
    for k, mask in enumerate(masks):
        if mask is None:
            arrays.append(None)
            continue
        if mask.bits.shape != params.weights[k].shape:
            raise ShapeMismatchError(
                f"mask {k + 1} shape {mask.bits.shape} vs weights {params.weights[k].shape}"
            )
        arrays.append(mask.bits.astype(float))
    return _train(params, data, lr, epochs, batch_size, seed, keep_masks=arrays)


# ---------------------------------------------------------------------------
# Mask JSON


def mask_to_doc(mask: BinaryMask) -> dict:
    return {
        "rows": mask.rows,
        "cols": mask.cols,
        "rho": mask.rho,
        "bits": [int(b) for b in mask.bits.ravel()],
    }


def mask_from_doc(doc: dict) -> BinaryMask:
    try:
        rows, cols = int(doc["rows"]), int(doc["cols"])
        rho = float(doc["rho"])
        bits = np.array(doc["bits"], dtype=np.int8).reshape(rows, cols)
        return BinaryMask(bits, rho)
    except (KeyError, TypeError, ValueError) as exc:
        raise FileFormatError(f"malformed mask document: {exc}") from exc


def save_mask(mask: BinaryMask, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(mask_to_doc(mask), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_mask(path) -> BinaryMask:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FileFormatError(f"invalid JSON: {exc}") from exc
    return mask_from_doc(doc)
