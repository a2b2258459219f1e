"""Layer permutations: construction, application, counting, equivalence.

Node-ownership convention, fixed once for the whole package: hidden node
``j`` of layer ``k`` owns column ``j`` of the incoming matrix ``W_k`` and
row ``j`` of the outgoing matrix ``W_{k+1}``.  Reordering the nodes of a
layer therefore permutes those columns and rows together, which preserves
every connection and leaves the computed function unchanged.

Permutations are stored 0-based as index arrays ``p`` where the node at
new position ``j`` is the old node ``p[j]``.  The JSON interchange format
uses 1-based indices.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import FileFormatError, ShapeMismatchError
from .netcore import Architecture, NetworkParams, forward_batch


@dataclass(frozen=True)
class LayerPermutationSet:
    """One permutation per hidden layer (layers 1 .. d-1)."""

    perms: tuple[np.ndarray, ...]

    def __post_init__(self):
        cleaned = []
        for k, p in enumerate(self.perms):
            arr = np.array(p, dtype=np.int64)
            if arr.ndim != 1 or not np.array_equal(np.sort(arr), np.arange(len(arr))):
                raise ValueError(f"entry {k} is not a permutation of 0..{len(arr) - 1}")
            arr.flags.writeable = False
            cleaned.append(arr)
        object.__setattr__(self, "perms", tuple(cleaned))

    def sizes(self) -> tuple[int, ...]:
        return tuple(len(p) for p in self.perms)

    def is_identity(self) -> bool:
        return all(np.array_equal(p, np.arange(len(p))) for p in self.perms)


def identity_permutation(arch: Architecture) -> LayerPermutationSet:
    return LayerPermutationSet(tuple(np.arange(w) for w in arch.hidden_widths))


def random_permutation(arch: Architecture, seed: int) -> LayerPermutationSet:
    """Uniform draw from the product of symmetric groups over hidden widths."""
    rng = np.random.default_rng(seed)
    return LayerPermutationSet(tuple(rng.permutation(w) for w in arch.hidden_widths))


def _check_sizes(params: NetworkParams, pi: LayerPermutationSet) -> None:
    hidden = params.architecture.hidden_widths
    if pi.sizes() != hidden:
        raise ShapeMismatchError(
            f"permutation sizes {pi.sizes()} do not match hidden widths {hidden}"
        )


def apply_permutation(params: NetworkParams, pi: LayerPermutationSet) -> NetworkParams:
    """Reorder hidden nodes; the result is functionally identical.

    For hidden layer k with permutation p: columns of ``W_k`` are permuted
    by p and rows of ``W_{k+1}`` by the same p, so each node keeps its
    incoming and outgoing connections.
    """
    _check_sizes(params, pi)
    ws = [w.copy() for w in params.weights]
    for k, p in enumerate(pi.perms):
        ws[k] = ws[k][:, p]
        ws[k + 1] = ws[k + 1][p, :]
    return NetworkParams(params.architecture, ws, params.activation)


def compose(first: LayerPermutationSet, then: LayerPermutationSet) -> LayerPermutationSet:
    """The single permutation equivalent to applying ``first`` then ``then``."""
    if first.sizes() != then.sizes():
        raise ShapeMismatchError("permutation sets act on different hidden widths")
    return LayerPermutationSet(tuple(f[t] for f, t in zip(first.perms, then.perms)))


def invert(pi: LayerPermutationSet) -> LayerPermutationSet:
    return LayerPermutationSet(tuple(np.argsort(p) for p in pi.perms))


def count_equivalent_optima(arch: Architecture) -> int:
    """Exact number of node reorderings: the product of hidden-width factorials.

    Every optimum of a loss over this architecture appears once per
    reordering, so this is also the multiplicity of any single optimum.
    Arbitrary-precision; the result is exact for any widths.
    """
    count = 1
    for w in arch.hidden_widths:
        count *= math.factorial(w)
    return count


@dataclass(frozen=True)
class EquivalenceReport:
    equivalent: bool
    max_deviation: float
    threshold: float


def functional_equivalence(
    p1: NetworkParams,
    p2: NetworkParams,
    probes: int,
    tol: float,
    seed: int,
) -> EquivalenceReport:
    """Probe two networks on seeded standard-normal inputs.

    Networks are declared equivalent when the largest infinity-norm output
    deviation over the probe set stays below ``tol * (1 + M)`` with ``M``
    the largest output magnitude seen.  Exact symmetries pass at tiny
    tolerances; any genuine functional difference is picked up by the
    probes with overwhelming probability.
    """
    if p1.architecture != p2.architecture:
        raise ShapeMismatchError("architectures differ")
    if p1.activation != p2.activation:
        raise ShapeMismatchError("activations differ")
    if probes < 1:
        raise ValueError("probes must be >= 1")
    if tol <= 0:
        raise ValueError("tol must be > 0")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((probes, p1.architecture.n_inputs))
    y1 = forward_batch(p1, X)
    y2 = forward_batch(p2, X)
    deviation = float(np.max(np.abs(y1 - y2)))
    magnitude = float(max(np.max(np.abs(y1)), np.max(np.abs(y2))))
    threshold = tol * (1.0 + magnitude)
    return EquivalenceReport(deviation <= threshold, deviation, threshold)


# ---------------------------------------------------------------------------
# Permutation JSON (1-based indices)


def permutation_to_doc(pi: LayerPermutationSet) -> dict:
    return {"perms": [[int(i) + 1 for i in p] for p in pi.perms]}


def permutation_from_doc(doc: dict) -> LayerPermutationSet:
    if not isinstance(doc, dict) or "perms" not in doc:
        raise FileFormatError('permutation document must contain a "perms" list')
    try:
        perms = tuple(np.array(p, dtype=np.int64) - 1 for p in doc["perms"])
        return LayerPermutationSet(perms)
    except (TypeError, ValueError) as exc:
        raise FileFormatError(f"malformed permutation document: {exc}") from exc


def save_permutation(pi: LayerPermutationSet, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(permutation_to_doc(pi), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_permutation(path) -> LayerPermutationSet:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FileFormatError(f"invalid JSON: {exc}") from exc
    return permutation_from_doc(doc)
