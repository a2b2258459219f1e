"""Deterministic derivation of per-trial seeds from a master seed.

Parallel trials must not share random streams, and re-running a report with
the same master seed must reproduce every trial bit for bit.  Child seeds
are therefore derived arithmetically: ``child_i = master XOR mix64(i * G)``
where ``G`` is the 64-bit golden-ratio increment and ``mix64`` is the
splitmix64 finalizer.
"""

_GOLDEN = 0x9E3779B97F4A7C15
_MASK64 = (1 << 64) - 1


def mix64(z: int) -> int:
    """splitmix64 finalizer: a 64-bit bijective scrambler."""
    z &= _MASK64
    z ^= z >> 30
    z = (z * 0xBF58476D1CE4E5B9) & _MASK64
    z ^= z >> 27
    z = (z * 0x94D049BB133111EB) & _MASK64
    z ^= z >> 31
    return z


def split_seed(master: int, index: int) -> int:
    """Derive the ``index``-th child seed from ``master``.

    The same (master, index) pair always yields the same child, and
    distinct indices yield well-separated streams.
    """
    if index < 0:
        raise ValueError("seed index must be non-negative")
    return (master ^ mix64((index * _GOLDEN) & _MASK64)) & _MASK64
