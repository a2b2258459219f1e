"""Noisy gradient iterates on quadratic landscapes.

With the Hessian diagonalized, each coordinate of the iterate offset
``x = theta - theta*`` follows an independent AR(1) recurrence

    x[t+1] = (1 - eta * lam) * x[t] + eta * eps[t],

which is the exact per-direction form of a constant-step gradient update
with additive gradient noise.  The closed forms used as oracles:

* deterministic decay factor per step: ``1 - eta*lam``
* stationary variance:   ``eta^2 sigma^2 / (1 - (1 - eta*lam)^2)``
* increment variance:    ``2 eta^2 sigma^2 / (2 - eta*lam)``
* autocorrelation time:  ``-1 / log(1 - eta*lam)``

The stationary law for Gaussian noise is Gaussian in x, hence exponential
in the objective J: a Boltzmann profile whose inverse temperature scales
like ``1 / (eta * sigma^2)`` for small ``eta*lam``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .errors import (
    DegenerateSeriesError,
    InsufficientSamplesError,
    ShapeMismatchError,
)

NOISE_DISTS = ("gaussian", "uniform", "student_t")


@dataclass
class QuadraticLandscape:
    """Diagonal quadratic objective J(theta) = sum_i lam_i (theta_i - theta*_i)^2.

    Eigenvalues are listed in descending order; ``noise_sigma`` holds the
    per-direction standard deviation of the gradient noise.  ``student_t``
    noise with df <= 2 has no finite variance and is provided for
    demonstrations only.
    """

    theta_star: np.ndarray
    eigenvalues: np.ndarray
    noise_sigma: np.ndarray
    noise_dist: str = "gaussian"
    student_df: float | None = None

    def __post_init__(self):
        self.theta_star = np.atleast_1d(np.asarray(self.theta_star, dtype=float))
        self.eigenvalues = np.atleast_1d(np.asarray(self.eigenvalues, dtype=float))
        self.noise_sigma = np.atleast_1d(np.asarray(self.noise_sigma, dtype=float))
        n = self.theta_star.shape[0]
        if self.eigenvalues.shape != (n,) or self.noise_sigma.shape != (n,):
            raise ShapeMismatchError("theta_star, eigenvalues, noise_sigma must share length")
        if np.any(self.eigenvalues <= 0):
            raise ValueError("eigenvalues must be positive")
        if np.any(np.diff(self.eigenvalues) > 0):
            raise ValueError("eigenvalues must be sorted in descending order")
        if np.any(self.noise_sigma < 0):
            raise ValueError("noise sigmas must be >= 0")
        if self.noise_dist not in NOISE_DISTS:
            raise ValueError(f"unknown noise_dist {self.noise_dist!r}")
        if self.noise_dist == "student_t":
            if self.student_df is None or self.student_df <= 0:
                raise ValueError("student_t noise requires student_df > 0")
        elif self.student_df is not None:
            raise ValueError("student_df only applies to student_t noise")

    @property
    def dim(self) -> int:
        return self.theta_star.shape[0]

    def objective(self, thetas) -> np.ndarray:
        """J evaluated on one theta vector or a (T, n) stack of them."""
        x = np.atleast_2d(np.asarray(thetas, dtype=float)) - self.theta_star
        return (x ** 2 @ self.eigenvalues).ravel()


@dataclass
class IterateTrace:
    """A simulated trajectory plus the settings that produced it."""

    thetas: np.ndarray  # (steps+1, n), truncated early on divergence
    theta_star: np.ndarray
    eta: float
    seed: int
    burn_in: int
    stable: bool  # eta * lambda_max < 1 held
    diverged_at: int | None = None

    @property
    def dim(self) -> int:
        return self.thetas.shape[1]

    def offsets(self) -> np.ndarray:
        return self.thetas - self.theta_star

    def post_burn_in(self, direction: int) -> np.ndarray:
        x = self.offsets()[:, direction]
        if self.burn_in >= len(x) - 1:
            raise InsufficientSamplesError(
                f"burn-in {self.burn_in} leaves no samples out of {len(x)}"
            )
        return x[self.burn_in :]


def _standardized_noise(rng: np.random.Generator, dist: str, df: float | None, size) -> np.ndarray:
    if dist == "gaussian":
        return rng.standard_normal(size)
    if dist == "uniform":
        # U(-sqrt(3), sqrt(3)) has unit variance
        return rng.uniform(-math.sqrt(3.0), math.sqrt(3.0), size)
    draws = rng.standard_t(df, size)
    if df > 2.0:
        return draws * math.sqrt((df - 2.0) / df)
    return draws  # infinite variance: left unscaled on purpose


def autocorrelation_time_exact(eta: float, lam: float) -> float:
    """Oracle: -1 / log(1 - eta*lam)."""
    return -1.0 / math.log(1.0 - eta * lam)


def stationary_variance_exact(eta: float, lam: float, sigma: float) -> float:
    """Oracle: eta^2 sigma^2 / (1 - (1 - eta*lam)^2)."""
    phi = 1.0 - eta * lam
    return eta ** 2 * sigma ** 2 / (1.0 - phi ** 2)


def increment_variance_exact(eta: float, lam: float, sigma: float) -> float:
    """Oracle: 2 eta^2 sigma^2 / (2 - eta*lam)."""
    return 2.0 * eta ** 2 * sigma ** 2 / (2.0 - eta * lam)


def default_burn_in(land: QuadraticLandscape, eta: float) -> int:
    """Ten times the slowest autocorrelation time, rounded up."""
    taus = [autocorrelation_time_exact(eta, lam) for lam in land.eigenvalues if eta * lam < 1]
    if not taus:
        return 0
    return math.ceil(10.0 * max(taus))


def iterate(
    land: QuadraticLandscape,
    theta0,
    eta: float,
    steps: int,
    seed: int,
    burn_in: int | None = None,
) -> IterateTrace:
    """Run the noisy gradient recurrence for ``steps`` updates.

    Stability requires ``eta * lambda_max < 1``; a violating run proceeds
    with a warning and ``stable=False`` on the trace.  Heavy-tailed noise
    can blow up: the trace is then truncated at the first non-finite state
    and ``diverged_at`` records that step index.
    """
    if eta <= 0:
        raise ValueError("eta must be > 0")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    theta0 = np.atleast_1d(np.asarray(theta0, dtype=float))
    if theta0.shape != (land.dim,):
        raise ShapeMismatchError(f"theta0 has shape {theta0.shape}, expected ({land.dim},)")

    stable = bool(eta * land.eigenvalues[0] < 1.0)
    if not stable:
        warnings.warn(
            f"eta*lambda_max = {eta * land.eigenvalues[0]:.3g} >= 1: iterates may oscillate "
            "or diverge",
            RuntimeWarning,
            stacklevel=2,
        )
    if burn_in is None:
        burn_in = default_burn_in(land, eta) if stable else 0
    if burn_in < 0:
        raise ValueError("burn_in must be >= 0")

    rng = np.random.default_rng(seed)
    eps = _standardized_noise(rng, land.noise_dist, land.student_df, (steps, land.dim))
    eps *= land.noise_sigma

    x0 = theta0 - land.theta_star
    xs = np.empty((steps + 1, land.dim))
    xs[0] = x0
    for i in range(land.dim):
        phi = 1.0 - eta * land.eigenvalues[i]
        # y[t] = eta*eps[t] + phi*y[t-1], seeded so y[0] = phi*x0 + eta*eps[0]
        xs[1:, i] = lfilter([eta], [1.0, -phi], eps[:, i], zi=[phi * x0[i]])[0]

    diverged_at = None
    finite = np.all(np.isfinite(xs), axis=1)
    if not finite.all():
        diverged_at = int(np.argmin(finite))
        xs = xs[:diverged_at]

    return IterateTrace(
        thetas=xs + land.theta_star,
        theta_star=land.theta_star.copy(),
        eta=eta,
        seed=seed,
        burn_in=burn_in,
        stable=stable,
        diverged_at=diverged_at,
    )


def decay_fit(trace: IterateTrace, direction: int, window: int | None = None) -> float:
    """Fitted per-step decay factor from the early high-signal segment.

    Log-linear least squares on |x_t| over ``window`` initial steps
    (default 50).  Raises :class:`DegenerateSeriesError` when the segment
    touches zero, e.g. a run started at the optimum.
    """
    x = np.abs(trace.offsets()[:, direction])
    if window is None:
        window = 50
    window = min(window, len(x) - 1)
    if window < 2:
        raise InsufficientSamplesError("trace too short for a decay fit")
    seg = x[: window + 1]
    if np.any(seg == 0.0) or not np.all(np.isfinite(seg)):
        raise DegenerateSeriesError("decay segment touches zero or is non-finite")
    t = np.arange(window + 1)
    slope = np.polyfit(t, np.log(seg), 1)[0]
    return float(np.exp(slope))


def _autocovariance(x: np.ndarray) -> np.ndarray:
    n = len(x)
    x = x - x.mean()
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:n].real
    return acov / n


def autocorrelation_time(trace: IterateTrace, direction: int, window_factor: float = 5.0) -> float:
    """Integrated autocorrelation time of the post-burn-in series.

    Sokal convention, tau = 1/2 + sum_k rho_k, with the self-consistent
    window: the sum stops at the smallest lag W with W >= window_factor *
    tau(W).  An i.i.d. series gives about 1/2; an AR(1) series with
    coefficient phi gives about (1+phi) / (2 (1-phi)).

    Raises :class:`InsufficientSamplesError` when fewer than 100 * tau
    samples are available.
    """
    x = trace.post_burn_in(direction)
    acov = _autocovariance(x)
    if acov[0] == 0.0:
        raise DegenerateSeriesError("constant series has no autocorrelation time")
    rho = acov / acov[0]
    tau = 0.5
    window = len(rho) - 1
    for k in range(1, len(rho)):
        tau += rho[k]
        if k >= window_factor * tau:
            window = k
            break
    else:
        raise InsufficientSamplesError("no self-consistent autocorrelation window found")
    if len(x) < 100.0 * tau:
        raise InsufficientSamplesError(
            f"{len(x)} samples < 100 * tau ~ {100 * tau:.0f}; run longer"
        )
    return float(tau)


def stationary_variance(trace: IterateTrace, direction: int) -> float:
    """Sample variance of the post-burn-in offsets."""
    x = trace.post_burn_in(direction)
    return float(np.var(x, ddof=1))


def increment_variance(trace: IterateTrace, direction: int) -> float:
    """Sample variance of one-step differences after burn-in."""
    x = trace.post_burn_in(direction)
    if len(x) < 3:
        raise InsufficientSamplesError("need at least 3 post-burn-in samples")
    return float(np.var(np.diff(x), ddof=1))


@dataclass(frozen=True)
class BoltzmannFit:
    beta_hat: float
    r_squared: float
    n_bins: int


def boltzmann_fit(
    trace: IterateTrace,
    land: QuadraticLandscape,
    eta: float | None = None,
    bins: int = 40,
    min_count: int = 50,
    quantile: float = 0.99,
) -> BoltzmannFit:
    """Fit log density of J(theta_t) against J to extract the temperature.

    Histograms the post-burn-in objective values, divides out the
    density-of-states factor J^(n/2 - 1), and fits a count-weighted line;
    the slope is -beta_hat.  Bins with fewer than ``min_count`` samples
    are dropped; fewer than 3 surviving bins raises
    :class:`DegenerateSeriesError` (e.g. noiseless runs where all mass
    sits at J = 0).
    """
    if eta is not None and eta != trace.eta:
        raise ValueError(f"eta {eta} does not match the trace's eta {trace.eta}")
    if trace.burn_in >= len(trace.thetas) - 1:
        raise InsufficientSamplesError("burn-in leaves no samples")
    J = land.objective(trace.thetas[trace.burn_in :])
    if np.all(J == 0.0) or J.max() == J.min():
        raise DegenerateSeriesError("objective values are a point mass; nothing to fit")
    edges = np.linspace(0.0, float(np.quantile(J, quantile)), bins + 1)
    counts, edges = np.histogram(J, bins=edges)
    centers = 0.5 * (edges[:-1] + edges[1:])
    widths = np.diff(edges)
    keep = (counts >= min_count) & (centers > 0)
    if keep.sum() < 3:
        raise DegenerateSeriesError(f"only {int(keep.sum())} bins with >= {min_count} samples")
    counts = counts[keep]
    density = counts / (counts.sum() * widths[keep])
    jc = centers[keep]
    y = np.log(density) - (land.dim / 2.0 - 1.0) * np.log(jc)
    w = counts.astype(float)
    coeffs = np.polyfit(jc, y, 1, w=np.sqrt(w))
    fitted = np.polyval(coeffs, jc)
    ybar = np.sum(w * y) / w.sum()
    ss_res = float(np.sum(w * (y - fitted) ** 2))
    ss_tot = float(np.sum(w * (y - ybar) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    return BoltzmannFit(beta_hat=float(-coeffs[0]), r_squared=r2, n_bins=int(keep.sum()))


def equilibrium_radius(land: QuadraticLandscape, eta: float) -> float:
    """Order-of-magnitude radius sqrt(eta * ||eps||^2 / lambda_max).

    The ~ semantics are inherited: this is a scale, not a sharp bound;
    the measured stationary standard deviation lands within an O(1)
    factor of it.
    """
    eps_sq = float(np.sum(land.noise_sigma ** 2))
    return math.sqrt(eta * eps_sq / land.eigenvalues[0])


@dataclass(frozen=True)
class VolumeResult:
    volume: float
    log_volume: float


def equilibrium_volume(land: QuadraticLandscape, eta: float) -> VolumeResult:
    """Occupied-volume formula, evaluated verbatim in log space.

    log V = (n/2) log pi - log Gamma(n/2 + 1) + (1/2) log(eta ||eps||^2)
            - (1/2) sum_i log lambda_i.

    Note the noise factor enters with a fixed exponent 1/2 independent of
    n, while a literal n-ball of radius r would scale as r^n; the formula
    is kept as defined, not "corrected".
    """
    n = land.dim
    eps_sq = float(np.sum(land.noise_sigma ** 2))
    if eps_sq == 0.0:
        return VolumeResult(0.0, -math.inf)
    log_v = (
        (n / 2.0) * math.log(math.pi)
        - math.lgamma(n / 2.0 + 1.0)
        + 0.5 * math.log(eta * eps_sq)
        - 0.5 * float(np.sum(np.log(land.eigenvalues)))
    )
    return VolumeResult(math.exp(log_v) if log_v < 700 else math.inf, log_v)


@dataclass(frozen=True)
class GhostVolumeResult:
    """Scale of the total volume around all reordering copies of one optimum."""

    n: int  # total node count, width * depth
    count: int  # exact number of copies, (width!)^depth
    log_count: float
    log_volume: float  # n * (log(width) - log-mean-eigenvalue / 2)
    log_noise_scale: float  # (1/2) log(eta * ||eps||^2), kept separate


def ghost_volume(width: int, depth: int, lambda_logmean: float, eta_eps2: float) -> GhostVolumeResult:
    """Evaluate the combined-count-times-volume scale for a rectangular net.

    ``width`` nodes per hidden layer, ``depth`` hidden layers, so
    ``n = width * depth`` nodes in total.  The exact copy count
    ``(width!)**depth`` is returned as a big integer alongside the log-space
    volume scale ``n * (log(width) - lambda_logmean / 2)``.  The noise
    prefactor enters only through ``log_noise_scale``.
    """
    if width < 1 or depth < 1:
        raise ValueError("width and depth must be >= 1")
    if eta_eps2 <= 0:
        raise ValueError("eta_eps2 must be > 0")
    n = width * depth
    count = math.factorial(width) ** depth
    log_count = depth * math.lgamma(width + 1)
    log_volume = n * (math.log(width) - 0.5 * lambda_logmean)
    return GhostVolumeResult(n, count, log_count, log_volume, 0.5 * math.log(eta_eps2))


@dataclass(frozen=True)
class DirectionStats:
    direction: int
    eigenvalue: float
    sigma: float
    measured_variance: float
    exact_variance: float
    beta_measured: float  # 1 / (2 lambda Var), the per-direction temperature
    beta_inverse_scale: float  # eta * lambda * sigma^2, the anisotropy scale


def anisotropy_study(
    land: QuadraticLandscape,
    eta: float,
    steps: int,
    seed: int,
    burn_in: int | None = None,
) -> list[DirectionStats]:
    """Per-direction stationary statistics against their oracles.

    An experiment report, not a pass/fail check: it tabulates the measured
    variance, the exact AR(1) variance, and the per-direction temperature
    so the direction-dependence (or its cancellation when sigma_i^2 scales
    with lambda_i) can be read off.
    """
    trace = iterate(land, land.theta_star, eta, steps, seed, burn_in=burn_in)
    rows = []
    for i in range(land.dim):
        lam = float(land.eigenvalues[i])
        sigma = float(land.noise_sigma[i])
        measured = stationary_variance(trace, i)
        exact = stationary_variance_exact(eta, lam, sigma)
        beta = 1.0 / (2.0 * lam * measured) if measured > 0 else math.inf
        rows.append(
            DirectionStats(
                direction=i,
                eigenvalue=lam,
                sigma=sigma,
                measured_variance=measured,
                exact_variance=exact,
                beta_measured=beta,
                beta_inverse_scale=eta * lam * sigma ** 2,
            )
        )
    return rows


def random_orthogonal(n: int, seed: int) -> np.ndarray:
    """A seeded random orthogonal matrix (QR of a Gaussian, signs fixed).

    Used to express the diagonal core in a rotated basis: a dense Hessian
    H = Q diag(lambda) Q' evolves exactly as Q applied to the diagonal
    recurrence when the noise is drawn in the eigenbasis.
    """
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def trace_to_csv(trace: IterateTrace) -> str:
    """CSV rendering of the offset series: columns t, x_1 .. x_n."""
    n = trace.dim
    lines = ["t," + ",".join(f"x_{i + 1}" for i in range(n))]
    offsets = trace.offsets()
    for t, row in enumerate(offsets):
        lines.append(str(t) + "," + ",".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def write_trace_csv(trace: IterateTrace, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(trace_to_csv(trace))
