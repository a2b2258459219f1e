"""Pydantic request/response models for the HTTP service.

The document models (network, permutation, mask, polytron) mirror the
on-disk JSON formats one to one, so a file can be posted verbatim as a
request field and a response field can be written verbatim to disk.
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field

from ..experiments import ExperimentConfig


class LayerDoc(BaseModel):
    rows: int = Field(ge=1)
    cols: int = Field(ge=1)
    data: list[float]


class NetworkDoc(BaseModel):
    format_version: Literal[1] = 1
    architecture: list[int]
    activation: Literal["tanh", "identity", "relu"]
    layers: list[LayerDoc]


class PermutationDoc(BaseModel):
    perms: list[list[int]]  # one-based indices


class MaskDoc(BaseModel):
    rows: int = Field(ge=1)
    cols: int = Field(ge=1)
    rho: float = Field(ge=0.0, lt=1.0)
    bits: list[int]


class PolytronDoc(BaseModel):
    family: Literal["laguerre", "legendre", "chebyshev"]
    degree: int = Field(ge=0)
    outputs: int = Field(ge=1)
    coeffs: list[float]  # column-major
    mask: Optional[MaskDoc] = None


# --- networks ---------------------------------------------------------------


class BuildNetworkRequest(BaseModel):
    architecture: list[int]
    activation: Literal["tanh", "identity", "relu"] = "tanh"
    init_scale: float = Field(ge=0.0)
    seed: int


class ForwardRequest(BaseModel):
    network: NetworkDoc
    inputs: list[list[float]]


class ForwardResponse(BaseModel):
    outputs: list[list[float]]


class TrainRequest(BaseModel):
    network: NetworkDoc
    inputs: list[list[float]]
    targets: list[list[float]]
    lr: float = Field(ge=0.0)
    epochs: int = Field(ge=1)
    batch_size: int = Field(ge=1)
    seed: int
    masks: Optional[list[Optional[MaskDoc]]] = None


class TrainResponse(BaseModel):
    network: NetworkDoc
    loss_trace: list[float]


# --- symmetry ---------------------------------------------------------------


class CountRequest(BaseModel):
    architecture: list[int]


class CountResponse(BaseModel):
    count: str  # exact big integer, decimal string
    digits: int


class RandomPermutationRequest(BaseModel):
    architecture: list[int]
    seed: int


class ApplyPermutationRequest(BaseModel):
    network: NetworkDoc
    permutation: PermutationDoc


class EquivalenceRequest(BaseModel):
    network_a: NetworkDoc
    network_b: NetworkDoc
    probes: int = Field(default=32, ge=1)
    tol: float = Field(default=1e-10, gt=0.0)
    seed: int = 0


class EquivalenceResponse(BaseModel):
    equivalent: bool
    max_deviation: float
    threshold: float


# --- canonical --------------------------------------------------------------


class CanonicalizeRequest(BaseModel):
    network: NetworkDoc
    method: Literal["lexicographic", "maximin"] = "maximin"


class CanonicalizeResponse(BaseModel):
    network: NetworkDoc
    permutation: PermutationDoc


class CompareRequest(BaseModel):
    network_a: NetworkDoc
    network_b: NetworkDoc


class CompareRow(BaseModel):
    layer_index: int
    phi_raw: float
    phi_lex: float
    phi_maximin: float


class CompareResponse(BaseModel):
    rows: list[CompareRow]


# --- masks ------------------------------------------------------------------


class MaskGenerateRequest(BaseModel):
    rows: int = Field(ge=1)
    cols: int = Field(ge=1)
    rho: float = Field(ge=0.0, lt=1.0)
    seed: int


class MaskApplyRequest(BaseModel):
    matrix: list[list[float]]
    mask: MaskDoc


class MaskApplyResponse(BaseModel):
    matrix: list[list[float]]


class CollisionProbabilityRequest(BaseModel):
    rows: int = Field(ge=1)
    cols: int = Field(ge=1)
    rho: float = Field(ge=0.0, le=1.0)


class CollisionProbabilityResponse(BaseModel):
    probability: float


class InflateWidthRequest(BaseModel):
    architecture: list[int]
    rho: float = Field(ge=0.0, lt=1.0)


class InflateWidthResponse(BaseModel):
    architecture: list[int]


# --- polynomials ------------------------------------------------------------


class PolyBasisRequest(BaseModel):
    family: Literal["laguerre", "legendre", "chebyshev"]
    degree: int = Field(ge=0)
    xs: list[float]
    derivatives: bool = False


class PolyBasisResponse(BaseModel):
    values: list[list[float]]  # values[i][s] = phi_i(xs[s]), or phi_i'(xs[s])


class PolytronEvalRequest(BaseModel):
    polytron: PolytronDoc
    xs: list[float]


class PolytronEvalResponse(BaseModel):
    outputs: list[list[float]]  # outputs[s][m]


class PolytronFitRequest(BaseModel):
    xs: list[float]
    ys: list[list[float]]
    family: Literal["laguerre", "legendre", "chebyshev"] = "laguerre"
    degree: int = Field(ge=0)
    mode: Literal["normal", "gradient"] = "normal"
    lr: Optional[float] = None
    steps: Optional[int] = None
    weighted: bool = True
    mask: Optional[MaskDoc] = None


class PolytronFitResponse(BaseModel):
    polytron: PolytronDoc
    residual_trace: list[float]


class ResidualTarget(BaseModel):
    """A named scalar target for quadrature residuals.

    ``exp_decay`` is f(x) = exp(-rate * x); ``polytron`` measures one
    polytron against another.
    """

    kind: Literal["exp_decay", "polytron"]
    rate: Optional[float] = None
    polytron: Optional[PolytronDoc] = None


class PolytronResidualRequest(BaseModel):
    polytron: PolytronDoc
    target: ResidualTarget
    nodes: int = Field(default=64, ge=2)


class PolytronResidualResponse(BaseModel):
    residual: float
    f_norm_sq: float
    ratio: float


# --- equilibrium ------------------------------------------------------------


class SimulateRequest(BaseModel):
    lambdas: list[float]
    sigmas: list[float]
    dist: Literal["gaussian", "uniform", "student_t"] = "gaussian"
    df: Optional[float] = None
    eta: float = Field(gt=0.0)
    steps: int = Field(ge=1)
    burn_in: Optional[int] = None
    seed: int
    theta_star: Optional[list[float]] = None
    theta0: Optional[list[float]] = None
    include_trace: bool = False


class DirectionReport(BaseModel):
    direction: int
    eigenvalue: float
    sigma: float
    stationary_variance: Optional[float] = None
    stationary_variance_exact: float
    increment_variance: Optional[float] = None
    increment_variance_exact: float
    autocorrelation_time: Optional[float] = None
    autocorrelation_time_exact: Optional[float] = None
    decay_rate: Optional[float] = None
    decay_rate_exact: float
    note: Optional[str] = None


class SimulateResponse(BaseModel):
    eta: float
    steps: int
    burn_in: int
    seed: int
    stable: bool
    diverged_at: Optional[int] = None
    equilibrium_radius: float
    log_equilibrium_volume: float
    directions: list[DirectionReport]
    boltzmann_beta: Optional[float] = None
    boltzmann_r2: Optional[float] = None
    trace_csv: Optional[str] = None


# --- experiments ------------------------------------------------------------


class ExperimentRequest(BaseModel):
    config: ExperimentConfig
    benchmark: Optional[NetworkDoc] = None


class ExperimentResponse(BaseModel):
    report: dict


class BenchmarkRequest(BaseModel):
    config: ExperimentConfig


class HealthResponse(BaseModel):
    status: str
    version: str
