"""Orthonormal polynomial families and one-layer polynomial approximators.

A "polytron" output node computes ``f(x) = sum_i w_i phi_i(x)`` where the
``phi_i`` form an orthonormal family under a weight ``Psi``:

    <f, g> = integral over the family domain of f(x) g(x) Psi(x) dx.

Families (all evaluated by their upward recurrences in one O(N) sweep):

==========  ============  ===================  =========================
family      domain        Psi(x)               phi_i
==========  ============  ===================  =========================
laguerre    (0, inf)      exp(-x)              L_i  (already orthonormal)
legendre    (-1, 1)       1                    sqrt((2i+1)/2) P_i
chebyshev   (-1, 1)       1/sqrt(1 - x^2)      T_0/sqrt(pi), T_i sqrt(2/pi)
==========  ============  ===================  =========================

Inner products use Gauss quadrature matched to the family weight, exact
for polynomial integrands of degree <= 2*nodes - 1.

Derivatives come from the classical recurrences.  The Laguerre formula
``L_i'(x) = i (L_i(x) - L_{i-1}(x)) / x`` divides by x, so for
``|x| <= 1e-8`` the analytic limit ``L_i'(0) = -i`` is returned instead;
the Legendre formula divides by ``x^2 - 1`` and gets the analogous
endpoint limits.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import roots_chebyt, roots_laguerre, roots_legendre

from .errors import FileFormatError, FitError, ShapeMismatchError
from .prepruning import BinaryMask, mask_from_doc, mask_to_doc

FAMILY_IDS = ("laguerre", "legendre", "chebyshev")

MAX_DEGREE = 64

# Below this |x| (or |x^2 - 1| for Legendre) the derivative recurrence is
# replaced by its analytic limit.
GRAD_EPS = 1e-8

_CLASSICAL_DOMAINS = {
    "laguerre": (0.0, math.inf),
    "legendre": (-1.0, 1.0),
    "chebyshev": (-1.0, 1.0),
}


@dataclass(frozen=True)
class PolyFamily:
    """An orthonormal polynomial family: id plus its classical domain."""

    family_id: str
    domain: tuple[float, float]

    def __post_init__(self):
        if self.family_id not in FAMILY_IDS:
            raise ValueError(f"unknown family {self.family_id!r}; expected one of {FAMILY_IDS}")
        if tuple(self.domain) != _CLASSICAL_DOMAINS[self.family_id]:
            raise ValueError(
                f"{self.family_id} domain must be {_CLASSICAL_DOMAINS[self.family_id]}"
            )

    def weight(self, x):
        """The orthogonality weight Psi evaluated at x."""
        x = np.asarray(x, dtype=float)
        if self.family_id == "laguerre":
            return np.exp(-x)
        if self.family_id == "legendre":
            return np.ones_like(x)
        return 1.0 / np.sqrt(1.0 - x ** 2)


LAGUERRE = PolyFamily("laguerre", _CLASSICAL_DOMAINS["laguerre"])
LEGENDRE = PolyFamily("legendre", _CLASSICAL_DOMAINS["legendre"])
CHEBYSHEV = PolyFamily("chebyshev", _CLASSICAL_DOMAINS["chebyshev"])

_FAMILIES = {"laguerre": LAGUERRE, "legendre": LEGENDRE, "chebyshev": CHEBYSHEV}


def family(family_id: str) -> PolyFamily:
    try:
        return _FAMILIES[family_id]
    except KeyError:
        raise ValueError(f"unknown family {family_id!r}; expected one of {FAMILY_IDS}") from None


def _check_degree(i: int) -> None:
    if i < 0:
        raise ValueError("degree index must be >= 0")
    if i > MAX_DEGREE:
        raise ValueError(f"degree {i} exceeds the supported cap {MAX_DEGREE}")


def poly_eval_all(fam: PolyFamily, degree: int, x) -> np.ndarray:
    """All orthonormal basis values phi_0(x) .. phi_degree(x) in one sweep.

    Returns an array of shape ``(degree+1,) + shape(x)``; one upward
    recurrence pass, so the cost is O(degree) per point.
    """
    _check_degree(degree)
    x = np.asarray(x, dtype=float)
    out = np.empty((degree + 1,) + x.shape)

    if fam.family_id == "laguerre":
        out[0] = 1.0
        if degree >= 1:
            out[1] = 1.0 - x
        for i in range(1, degree):
            out[i + 1] = ((2 * i + 1 - x) * out[i] - i * out[i - 1]) / (i + 1)
        return out

    if fam.family_id == "legendre":
        p_prev = np.ones_like(x)
        out[0] = math.sqrt(0.5) * p_prev
        if degree >= 1:
            p_cur = x.copy()
            out[1] = math.sqrt(1.5) * p_cur
            for i in range(1, degree):
                p_next = ((2 * i + 1) * x * p_cur - i * p_prev) / (i + 1)
                p_prev, p_cur = p_cur, p_next
                out[i + 1] = math.sqrt((2 * i + 3) / 2.0) * p_cur
        return out

    # chebyshev
    t_prev = np.ones_like(x)
    out[0] = t_prev / math.sqrt(math.pi)
    if degree >= 1:
        t_cur = x.copy()
        scale = math.sqrt(2.0 / math.pi)
        out[1] = scale * t_cur
        for i in range(1, degree):
            t_next = 2.0 * x * t_cur - t_prev
            t_prev, t_cur = t_cur, t_next
            out[i + 1] = scale * t_cur
    return out


def poly_eval(fam: PolyFamily, i: int, x):
    """phi_i(x).  Scalar in, scalar out; arrays broadcast elementwise."""
    vals = poly_eval_all(fam, i, x)[i]
    return float(vals) if np.isscalar(x) or np.asarray(x).ndim == 0 else vals


def poly_grad(fam: PolyFamily, i: int, x):
    """d/dx phi_i(x), with analytic limits where the recurrence divides by 0."""
    _check_degree(i)
    scalar = np.isscalar(x) or np.asarray(x).ndim == 0
    x = np.atleast_1d(np.asarray(x, dtype=float))

    if i == 0:
        grad = np.zeros_like(x)
        return float(grad[0]) if scalar else grad

    if fam.family_id == "laguerre":
        vals = poly_eval_all(fam, i, x)
        near0 = np.abs(x) <= GRAD_EPS
        safe_x = np.where(near0, 1.0, x)
        grad = i * (vals[i] - vals[i - 1]) / safe_x
        grad = np.where(near0, -float(i), grad)
    elif fam.family_id == "legendre":
        # d/dx P_i = i (x P_i - P_{i-1}) / (x^2 - 1); endpoints:
        # P_i'(1) = i(i+1)/2 and P_i'(-1) = (-1)^(i+1) i(i+1)/2.
        p = _legendre_classical(i, x)
        denom = x ** 2 - 1.0
        near = np.abs(denom) <= GRAD_EPS
        safe = np.where(near, 1.0, denom)
        grad = i * (x * p[i] - p[i - 1]) / safe
        limit = i * (i + 1) / 2.0
        grad = np.where(near & (x > 0), limit, grad)
        grad = np.where(near & (x <= 0), (-1.0) ** (i + 1) * limit, grad)
        grad = math.sqrt((2 * i + 1) / 2.0) * grad
    else:
        # d/dx T_i = i U_{i-1}
        grad = i * _chebyshev_u(i - 1, x) * math.sqrt(2.0 / math.pi)

    return float(grad[0]) if scalar else grad


def _legendre_classical(degree: int, x: np.ndarray) -> np.ndarray:
    p = np.empty((degree + 1,) + x.shape)
    p[0] = 1.0
    if degree >= 1:
        p[1] = x
    for i in range(1, degree):
        p[i + 1] = ((2 * i + 1) * x * p[i] - i * p[i - 1]) / (i + 1)
    return p


def _chebyshev_u(degree: int, x: np.ndarray) -> np.ndarray:
    u_prev = np.ones_like(x)
    if degree == 0:
        return u_prev
    u_cur = 2.0 * x
    for _ in range(1, degree):
        u_prev, u_cur = u_cur, 2.0 * x * u_cur - u_prev
    return u_cur


def quadrature(fam: PolyFamily, nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss nodes and weights matched to the family weight Psi."""
    if nodes < 1:
        raise ValueError("nodes must be >= 1")
    roots = {"laguerre": roots_laguerre, "legendre": roots_legendre, "chebyshev": roots_chebyt}
    xs, ws = roots[fam.family_id](nodes)
    return np.asarray(xs, dtype=float), np.asarray(ws, dtype=float)


def _eval_callable(f: Callable, xs: np.ndarray) -> np.ndarray:
    out = np.asarray(f(xs), dtype=float)
    if out.shape != xs.shape:
        out = np.array([f(float(x)) for x in xs], dtype=float)
    return out


def inner_product(f: Callable, g: Callable, fam: PolyFamily, nodes: int) -> float:
    """<f, g> by Gauss quadrature with ``nodes`` points."""
    if nodes < 2:
        raise ValueError("nodes must be >= 2")
    xs, ws = quadrature(fam, nodes)
    fv = _eval_callable(f, xs)
    gv = _eval_callable(g, xs)
    if not (np.all(np.isfinite(fv)) and np.all(np.isfinite(gv))):
        raise ValueError("non-finite integrand sample")
    return float(np.sum(ws * fv * gv))


# ---------------------------------------------------------------------------
# Polytron layers


@dataclass
class PolytronLayer:
    """Coefficients of M polynomial output nodes over one family.

    ``coeffs`` has shape (degree+1, M); column m holds the weights of
    output node m.  An optional binary mask pins chosen coefficients to 0,
    making the output nodes non-permutable.
    """

    family: PolyFamily
    degree: int
    coeffs: np.ndarray
    mask: BinaryMask | None = None

    def __post_init__(self):
        _check_degree(self.degree)
        arr = np.array(self.coeffs, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.shape[0] != self.degree + 1:
            raise ShapeMismatchError(
                f"coeffs have {arr.shape[0]} rows, expected degree+1 = {self.degree + 1}"
            )
        if not np.all(np.isfinite(arr)):
            raise ValueError("coefficients contain non-finite entries")
        if self.mask is not None:
            if self.mask.bits.shape != arr.shape:
                raise ShapeMismatchError(
                    f"mask shape {self.mask.bits.shape} vs coeffs {arr.shape}"
                )
            if np.any(arr[self.mask.bits == 0] != 0.0):
                raise ValueError("masked coefficients must be exactly 0")
        self.coeffs = arr

    @property
    def outputs(self) -> int:
        return self.coeffs.shape[1]


def polytron_forward(layer: PolytronLayer, x: float) -> np.ndarray:
    """All M outputs at a single point: one basis sweep plus M dot products."""
    phi = poly_eval_all(layer.family, layer.degree, float(x))
    return layer.coeffs.T @ phi


def polytron_forward_batch(layer: PolytronLayer, xs) -> np.ndarray:
    """Outputs for a batch of points, shape (S,) -> (S, M)."""
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    phi = poly_eval_all(layer.family, layer.degree, xs)  # (N+1, S)
    return phi.T @ layer.coeffs


def _unpack_batch(batch: Sequence, outputs: int) -> tuple[np.ndarray, np.ndarray]:
    if len(batch) == 0:
        raise ValueError("batch is empty")
    xs = np.array([float(x) for x, _ in batch])
    ys = np.array([np.atleast_1d(np.asarray(y, dtype=float)) for _, y in batch])
    if ys.shape[1] != outputs:
        raise ShapeMismatchError(f"targets have {ys.shape[1]} components, expected {outputs}")
    return xs, ys


def polytron_loss(layer: PolytronLayer, batch: Sequence, weighted: bool = True) -> float:
    """Half the (Psi-weighted) sum of squared residuals over the batch."""
    xs, ys = _unpack_batch(batch, layer.outputs)
    resid = ys - polytron_forward_batch(layer, xs)
    w = layer.family.weight(xs) if weighted else np.ones_like(xs)
    return 0.5 * float(np.sum(w * (resid ** 2).sum(axis=1)))


def polytron_gradient(layer: PolytronLayer, batch: Sequence, weighted: bool = True) -> np.ndarray:
    """Exact gradient of :func:`polytron_loss` with respect to the coefficients.

    For coefficient k of output m:
    ``grad[k, m] = -sum_s Psi(x_s) (y_s[m] - f_m(x_s)) phi_k(x_s)``.
    Masked coefficients receive zero gradient.
    """
    xs, ys = _unpack_batch(batch, layer.outputs)
    phi = poly_eval_all(layer.family, layer.degree, xs)  # (N+1, S)
    resid = ys - phi.T @ layer.coeffs  # (S, M)
    w = layer.family.weight(xs) if weighted else np.ones_like(xs)
    grad = -(phi * w) @ resid  # (N+1, M)
    if layer.mask is not None:
        grad = grad * layer.mask.bits
    return grad


def _mean_weighted_sq_residual(phi_t, coeffs, ys, w) -> float:
    resid = ys - phi_t @ coeffs
    return float(np.mean(w * (resid ** 2).sum(axis=1)))


def fit_polytron(
    samples: Sequence,
    fam: PolyFamily,
    degree: int,
    mode: str = "normal",
    lr: float | None = None,
    steps: int | None = None,
    weighted: bool = True,
    mask: BinaryMask | None = None,
) -> tuple[PolytronLayer, list[float]]:
    """Fit coefficients to (x, y) samples.

    ``mode="normal"`` solves the (Psi-weighted) least-squares problem
    directly and returns the projection onto the basis; it needs at least
    degree+1 distinct abscissae.  ``mode="gradient"`` runs full-batch
    gradient descent from zero coefficients with the given ``lr`` for
    ``steps`` iterations and converges toward the same projection.

    Returns the layer and the weighted mean squared residual per solve
    (one entry) or per descent step.
    """
    _check_degree(degree)
    if len(samples) == 0:
        raise ValueError("samples are empty")
    n_basis = degree + 1
    outputs = np.atleast_1d(np.asarray(samples[0][1], dtype=float)).shape[0]
    xs, ys = _unpack_batch(samples, outputs)

    w = fam.weight(xs) if weighted else np.ones_like(xs)
    phi_t = poly_eval_all(fam, degree, xs).T  # (S, N+1)
    bits = mask.bits if mask is not None else None

    if mode == "normal":
        if len(np.unique(xs)) < n_basis:
            raise FitError(
                f"need at least {n_basis} distinct abscissae, got {len(np.unique(xs))}"
            )
        sw = np.sqrt(w)
        coeffs = np.zeros((n_basis, outputs))
        for m in range(outputs):
            active = np.arange(n_basis) if bits is None else np.flatnonzero(bits[:, m])
            if active.size == 0:
                continue
            A = phi_t[:, active] * sw[:, None]
            b = ys[:, m] * sw
            sol, _, rank, _ = np.linalg.lstsq(A, b, rcond=None)
            if rank < active.size:
                raise FitError("rank-deficient design matrix (too few distinct x)")
            coeffs[active, m] = sol
        layer = PolytronLayer(fam, degree, coeffs, mask)
        return layer, [_mean_weighted_sq_residual(phi_t, coeffs, ys, w)]

    if mode == "gradient":
        if lr is None or lr <= 0 or steps is None or steps < 1:
            raise ValueError("gradient mode requires lr > 0 and steps >= 1")
        coeffs = np.zeros((n_basis, outputs))
        trace = []
        for _ in range(steps):
            resid = ys - phi_t @ coeffs
            grad = -(phi_t.T * w) @ resid
            if bits is not None:
                grad = grad * bits
            coeffs = coeffs - lr * grad
            trace.append(_mean_weighted_sq_residual(phi_t, coeffs, ys, w))
        layer = PolytronLayer(fam, degree, coeffs, mask)
        return layer, trace

    raise ValueError(f"unknown mode {mode!r}; expected 'normal' or 'gradient'")


@dataclass(frozen=True)
class ParsevalReport:
    """Quadrature estimate of the weighted squared approximation error."""

    residual: float
    f_norm_sq: float
    ratio: float  # residual / ||f||^2, the empirical truncation epsilon


def parseval_residual(layer: PolytronLayer, f_true: Callable, nodes: int) -> ParsevalReport:
    """Weighted squared error ||f - sum w_i phi_i||^2 estimated by quadrature.

    ``f_true`` maps a point to a scalar (M = 1) or a length-M vector.
    """
    xs, wq = quadrature(layer.family, nodes)
    fv = np.asarray([np.atleast_1d(np.asarray(f_true(float(x)), dtype=float)) for x in xs])
    if fv.shape[1] != layer.outputs:
        raise ShapeMismatchError(
            f"f_true returns {fv.shape[1]} components, layer has {layer.outputs}"
        )
    pv = polytron_forward_batch(layer, xs)
    residual = float(np.sum(wq * ((fv - pv) ** 2).sum(axis=1)))
    f_norm_sq = float(np.sum(wq * (fv ** 2).sum(axis=1)))
    if f_norm_sq == 0.0:
        ratio = 0.0 if residual == 0.0 else float("inf")
    else:
        ratio = residual / f_norm_sq
    return ParsevalReport(residual, f_norm_sq, ratio)


# ---------------------------------------------------------------------------
# Polytron JSON


def polytron_to_doc(layer: PolytronLayer) -> dict:
    doc = {
        "family": layer.family.family_id,
        "degree": layer.degree,
        "outputs": layer.outputs,
        "coeffs": [float(v) for v in layer.coeffs.ravel(order="F")],
    }
    if layer.mask is not None:
        doc["mask"] = mask_to_doc(layer.mask)
    return doc


def polytron_from_doc(doc: dict) -> PolytronLayer:
    try:
        fam = family(doc["family"])
        degree = int(doc["degree"])
        outputs = int(doc["outputs"])
        coeffs = np.array(doc["coeffs"], dtype=float).reshape((degree + 1, outputs), order="F")
        mask = mask_from_doc(doc["mask"]) if doc.get("mask") is not None else None
        return PolytronLayer(fam, degree, coeffs, mask)
    except (KeyError, TypeError, ValueError) as exc:
        raise FileFormatError(f"malformed polytron document: {exc}") from exc


def save_polytron(layer: PolytronLayer, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(polytron_to_doc(layer), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_polytron(path) -> PolytronLayer:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FileFormatError(f"invalid JSON: {exc}") from exc
    return polytron_from_doc(doc)
