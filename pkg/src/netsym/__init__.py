"""Permutation redundancy of layered networks, and what to do about it.

Subpackages and modules:

* :mod:`netsym.netcore` -- bias-free fully connected networks: forward
  pass, SGD training, portable JSON serialization.
* :mod:`netsym.symmetry` -- layer permutations, equivalent-optima counts,
  probe-based functional equivalence.
* :mod:`netsym.canonical` -- normalized Frobenius similarity and the
  lexicographic / maximin canonical node orders.
* :mod:`netsym.prepruning` -- distinct-column binary masks that break
  layer permutability before training.
* :mod:`netsym.orthopoly` -- orthonormal polynomial families and
  one-layer polynomial approximators.
* :mod:`netsym.equilibrium` -- noisy gradient iterates on quadratic
  landscapes and their stationary statistics.
* :mod:`netsym.experiments` -- the ghost-optima demo, the retraining
  stability study, and the canonical-phi stopping criterion.
* :mod:`netsym.service` -- FastAPI app exposing all operations.
* :mod:`netsym.cli` -- thin command-line client.
"""

from . import (  # noqa: F401
    canonical,
    equilibrium,
    errors,
    experiments,
    netcore,
    orthopoly,
    prepruning,
    seeding,
    symmetry,
)

__all__ = [
    "canonical",
    "equilibrium",
    "errors",
    "experiments",
    "netcore",
    "orthopoly",
    "prepruning",
    "seeding",
    "symmetry",
]
