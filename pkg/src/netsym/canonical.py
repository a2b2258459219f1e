"""Canonical node ordering and the normalized Frobenius similarity.

Two networks trained to the same optimum usually differ by a hidden-node
reordering, which makes naive weight comparison useless.  Sorting each
layer's nodes into a fixed order picks one representative per reordering
orbit, after which the similarity

    phi(W, W') = sum((W - W')^2) / sum((W + W')^2)

becomes informative: 0 for identical layers, about 1 for unrelated random
ones.

Two sort keys are provided.  ``lexicographic`` orders the columns of each
(already reordered) ``W_k`` by their entry sequence, first input row
first.  ``maximin`` picks the driver row of ``W_k`` with the largest
spread ``max - min`` (ties: smallest row index) and orders columns so the
driver row ascends (ties: stable by original column position).  Layers are
processed first to last, and the row permutation induced on ``W_{k+1}`` is
applied before that layer's own column order is chosen, so the whole pass
is a single deterministic sweep.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cmp_to_key

import numpy as np

from .errors import ShapeMismatchError
from .netcore import NetworkParams
from .symmetry import LayerPermutationSet

METHODS = ("raw", "lexicographic", "maximin")
REORDER_METHODS = ("lexicographic", "maximin")


def frobenius_similarity(W, W_prime) -> float:
    """Normalized elementwise similarity of two equally shaped matrices.

    Degenerate denominators: two all-zero matrices are "identical", so the
    result is 0; a nonzero numerator over a zero denominator (W' == -W)
    returns ``inf`` as a disjoint sentinel.
    """
    W = np.asarray(W, dtype=float)
    W_prime = np.asarray(W_prime, dtype=float)
    if W.shape != W_prime.shape:
        raise ShapeMismatchError(f"shapes {W.shape} and {W_prime.shape} differ")
    num = float(((W - W_prime) ** 2).sum())
    den = float(((W + W_prime) ** 2).sum())
    if den == 0.0:
        return 0.0 if num == 0.0 else float("inf")
    return num / den


@dataclass(frozen=True)
class SimilarityReport:
    """Per-layer phi values for one comparison method."""

    per_layer_phi: list[float]
    method: str

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if any(v < 0 for v in self.per_layer_phi):
            raise ValueError("phi values must be >= 0")


def _order_lexicographic(W: np.ndarray) -> np.ndarray:
    # lexsort uses the last key as primary, so feed rows in reverse:
    # columns are compared by row 0 first, then row 1, ...
    return np.lexsort(W[::-1])


def _order_maximin(W: np.ndarray) -> np.ndarray:
    spread = W.max(axis=1) - W.min(axis=1)
    driver = int(np.argmax(spread))  # argmax takes the smallest index on ties
    return np.argsort(W[driver], kind="stable")


_ORDER_FN = {"lexicographic": _order_lexicographic, "maximin": _order_maximin}


def _reorder(params: NetworkParams, method: str) -> tuple[NetworkParams, LayerPermutationSet]:
    order_fn = _ORDER_FN[method]
    ws = [w.copy() for w in params.weights]
    perms = []
    for k in range(params.architecture.depth - 1):
        order = order_fn(ws[k])
        ws[k] = ws[k][:, order]
        ws[k + 1] = ws[k + 1][order, :]
        perms.append(order)
    canonical = NetworkParams(params.architecture, ws, params.activation)
    return canonical, LayerPermutationSet(tuple(perms))


def reorder_lexicographic(params: NetworkParams) -> tuple[NetworkParams, LayerPermutationSet]:
    """Canonicalize by lexicographic column order.

    Returns the canonical network and the permutation that produces it:
    ``apply_permutation(params, pi)`` equals the canonical network bitwise.
    Idempotent, and for generic weights (no exact ties) invariant across
    the whole reordering orbit of ``params``.
    """
    return _reorder(params, "lexicographic")


def reorder_maximin(params: NetworkParams) -> tuple[NetworkParams, LayerPermutationSet]:
    """Canonicalize by ascending driver-row order (same contract as lexicographic)."""
    return _reorder(params, "maximin")


def canonicalize(params: NetworkParams, method: str) -> tuple[NetworkParams, LayerPermutationSet]:
    if method not in REORDER_METHODS:
        raise ValueError(f"unknown reorder method {method!r}; expected one of {REORDER_METHODS}")
    return _reorder(params, method)


def network_distance(p1: NetworkParams, p2: NetworkParams, method: str = "raw") -> SimilarityReport:
    """Per-layer phi between two networks of the same architecture.

    For ``lexicographic`` and ``maximin`` both inputs are canonicalized
    first, so a pure node reordering of the same network reports 0 in
    every layer (generic weights); ``raw`` compares matrices as given.
    """
    if p1.architecture != p2.architecture:
        raise ShapeMismatchError("architectures differ")
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    if method != "raw":
        p1, _ = _reorder(p1, method)
        p2, _ = _reorder(p2, method)
    phis = [frobenius_similarity(a, b) for a, b in zip(p1.weights, p2.weights)]
    return SimilarityReport(phis, method)


# ---------------------------------------------------------------------------
# Instrumented reordering: comparison counts for the complexity check.


def _counting_sort(keys, counter: list[int]) -> list[int]:
    def cmp(i: int, j: int) -> int:
        counter[0] += 1
        a, b = keys[i], keys[j]
        if a < b:
            return -1
        if a > b:
            return 1
        return 0

    # sorted() is stable, so ties keep their original column position,
    # matching the numpy-based path.
    return sorted(range(len(keys)), key=cmp_to_key(cmp))


def reorder_cost_counter(params: NetworkParams, method: str = "maximin") -> int:
    """Number of sort comparisons a canonicalization pass performs.

    Runs the same sweep as :func:`canonicalize` with the column sort
    replaced by an instrumented comparison sort.  Lexicographic counts one
    comparison per column-pair probe (tuple comparison); maximin counts
    scalar comparisons of driver-row entries.  Driver selection scans are
    not counted.  Exists for growth-order measurements only.
    """
    if method not in REORDER_METHODS:
        raise ValueError(f"unknown reorder method {method!r}; expected one of {REORDER_METHODS}")
    counter = [0]
    ws = [w.copy() for w in params.weights]
    for k in range(params.architecture.depth - 1):
        W = ws[k]
        if method == "maximin":
            driver = int(np.argmax(W.max(axis=1) - W.min(axis=1)))
            keys = list(W[driver])
        else:
            keys = [tuple(col) for col in W.T]
        order = np.array(_counting_sort(keys, counter), dtype=np.int64)
        ws[k] = W[:, order]
        ws[k + 1] = ws[k + 1][order, :]
    return counter[0]
