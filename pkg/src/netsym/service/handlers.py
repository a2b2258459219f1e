"""Service operations: plain functions over the pydantic schemas.

Each handler takes one request model and returns one response model, so
the CLI can call them in process and the FastAPI app can expose them over
HTTP without duplicating any logic.  Handlers raise ValueError or
NetsymError subclasses; the HTTP layer maps those to 400 responses.
"""

from __future__ import annotations

import math

import numpy as np

from .. import canonical, equilibrium, netcore, orthopoly, prepruning, symmetry
from ..experiments import train_benchmark, run_experiment
from ..netcore import Architecture, Dataset, NetworkParams
from . import schemas as s


def _network_in(doc: s.NetworkDoc) -> NetworkParams:
    return netcore.network_from_doc(doc.model_dump())


def _network_out(params: NetworkParams) -> s.NetworkDoc:
    return s.NetworkDoc(**netcore.network_to_doc(params))


def _permutation_in(doc: s.PermutationDoc) -> symmetry.LayerPermutationSet:
    return symmetry.permutation_from_doc(doc.model_dump())


def _permutation_out(pi: symmetry.LayerPermutationSet) -> s.PermutationDoc:
    return s.PermutationDoc(**symmetry.permutation_to_doc(pi))


def _mask_in(doc: s.MaskDoc) -> prepruning.BinaryMask:
    return prepruning.mask_from_doc(doc.model_dump())


def _mask_out(mask: prepruning.BinaryMask) -> s.MaskDoc:
    return s.MaskDoc(**prepruning.mask_to_doc(mask))


def _polytron_in(doc: s.PolytronDoc) -> orthopoly.PolytronLayer:
    return orthopoly.polytron_from_doc(doc.model_dump())


def _polytron_out(layer: orthopoly.PolytronLayer) -> s.PolytronDoc:
    return s.PolytronDoc(**orthopoly.polytron_to_doc(layer))


# --- networks ---------------------------------------------------------------


def build_network(req: s.BuildNetworkRequest) -> s.NetworkDoc:
    arch = Architecture(tuple(req.architecture))
    params = netcore.build_network(arch, req.init_scale, req.seed)
    params = NetworkParams(arch, params.weights, req.activation)
    return _network_out(params)


def forward(req: s.ForwardRequest) -> s.ForwardResponse:
    params = _network_in(req.network)
    out = netcore.forward_batch(params, np.array(req.inputs, dtype=float))
    return s.ForwardResponse(outputs=[[float(v) for v in row] for row in out])


def train(req: s.TrainRequest) -> s.TrainResponse:
    params = _network_in(req.network)
    data = Dataset(np.array(req.inputs, dtype=float), np.array(req.targets, dtype=float))
    if req.masks is None:
        trained, trace = netcore.train_sgd(
            params, data, req.lr, req.epochs, req.batch_size, req.seed
        )
    else:
        masks = [None if m is None else _mask_in(m) for m in req.masks]
        trained, trace = prepruning.train_masked(
            params, masks, data, req.lr, req.epochs, req.batch_size, req.seed
        )
    return s.TrainResponse(network=_network_out(trained), loss_trace=trace)


# --- symmetry ---------------------------------------------------------------


def count_optima(req: s.CountRequest) -> s.CountResponse:
    arch = Architecture(tuple(req.architecture))
    count = symmetry.count_equivalent_optima(arch)
    return s.CountResponse(count=str(count), digits=len(str(count)))


def random_permutation(req: s.RandomPermutationRequest) -> s.PermutationDoc:
    arch = Architecture(tuple(req.architecture))
    return _permutation_out(symmetry.random_permutation(arch, req.seed))


def apply_permutation(req: s.ApplyPermutationRequest) -> s.NetworkDoc:
    params = _network_in(req.network)
    pi = _permutation_in(req.permutation)
    return _network_out(symmetry.apply_permutation(params, pi))


def equivalence(req: s.EquivalenceRequest) -> s.EquivalenceResponse:
    report = symmetry.functional_equivalence(
        _network_in(req.network_a), _network_in(req.network_b), req.probes, req.tol, req.seed
    )
    return s.EquivalenceResponse(
        equivalent=report.equivalent,
        max_deviation=report.max_deviation,
        threshold=report.threshold,
    )


# --- canonical --------------------------------------------------------------


def canonicalize(req: s.CanonicalizeRequest) -> s.CanonicalizeResponse:
    params = _network_in(req.network)
    canon, pi = canonical.canonicalize(params, req.method)
    return s.CanonicalizeResponse(network=_network_out(canon), permutation=_permutation_out(pi))


def compare(req: s.CompareRequest) -> s.CompareResponse:
    a = _network_in(req.network_a)
    b = _network_in(req.network_b)
    raw = canonical.network_distance(a, b, "raw").per_layer_phi
    lex = canonical.network_distance(a, b, "lexicographic").per_layer_phi
    mm = canonical.network_distance(a, b, "maximin").per_layer_phi
    rows = [
        s.CompareRow(layer_index=k + 1, phi_raw=r, phi_lex=l, phi_maximin=m)
        for k, (r, l, m) in enumerate(zip(raw, lex, mm))
    ]
    return s.CompareResponse(rows=rows)


# --- masks ------------------------------------------------------------------


def mask_generate(req: s.MaskGenerateRequest) -> s.MaskDoc:
    return _mask_out(prepruning.generate_mask(req.rows, req.cols, req.rho, req.seed))


def mask_apply(req: s.MaskApplyRequest) -> s.MaskApplyResponse:
    out = prepruning.apply_mask(np.array(req.matrix, dtype=float), _mask_in(req.mask))
    return s.MaskApplyResponse(matrix=[[float(v) for v in row] for row in out])


def collision_probability(req: s.CollisionProbabilityRequest) -> s.CollisionProbabilityResponse:
    return s.CollisionProbabilityResponse(
        probability=prepruning.collision_probability(req.rows, req.cols, req.rho)
    )


def inflate_width(req: s.InflateWidthRequest) -> s.InflateWidthResponse:
    arch = prepruning.inflate_width(Architecture(tuple(req.architecture)), req.rho)
    return s.InflateWidthResponse(architecture=list(arch.layer_widths))


# --- polynomials ------------------------------------------------------------


def poly_basis(req: s.PolyBasisRequest) -> s.PolyBasisResponse:
    fam = orthopoly.family(req.family)
    xs = np.array(req.xs, dtype=float)
    if req.derivatives:
        values = [
            [float(v) for v in np.atleast_1d(orthopoly.poly_grad(fam, i, xs))]
            for i in range(req.degree + 1)
        ]
    else:
        values = [[float(v) for v in row] for row in orthopoly.poly_eval_all(fam, req.degree, xs)]
    return s.PolyBasisResponse(values=values)


def polytron_eval(req: s.PolytronEvalRequest) -> s.PolytronEvalResponse:
    layer = _polytron_in(req.polytron)
    out = orthopoly.polytron_forward_batch(layer, np.array(req.xs, dtype=float))
    return s.PolytronEvalResponse(outputs=[[float(v) for v in row] for row in out])


def polytron_fit(req: s.PolytronFitRequest) -> s.PolytronFitResponse:
    if len(req.xs) != len(req.ys):
        raise ValueError(f"{len(req.xs)} abscissae vs {len(req.ys)} targets")
    samples = list(zip(req.xs, req.ys))
    mask = _mask_in(req.mask) if req.mask is not None else None
    layer, trace = orthopoly.fit_polytron(
        samples,
        orthopoly.family(req.family),
        req.degree,
        mode=req.mode,
        lr=req.lr,
        steps=req.steps,
        weighted=req.weighted,
        mask=mask,
    )
    return s.PolytronFitResponse(polytron=_polytron_out(layer), residual_trace=trace)


def _resolve_target(target: s.ResidualTarget):
    if target.kind == "exp_decay":
        if target.rate is None:
            raise ValueError("exp_decay target requires a rate")
        rate = target.rate
        return lambda x: math.exp(-rate * x)
    if target.polytron is None:
        raise ValueError("polytron target requires a polytron document")
    ref = _polytron_in(target.polytron)
    if ref.outputs != 1:
        raise ValueError("polytron residual targets must have one output")
    return lambda x: float(orthopoly.polytron_forward(ref, x)[0])


def polytron_residual(req: s.PolytronResidualRequest) -> s.PolytronResidualResponse:
    layer = _polytron_in(req.polytron)
    if layer.outputs != 1:
        raise ValueError("residual reports require a single-output polytron")
    report = orthopoly.parseval_residual(layer, _resolve_target(req.target), req.nodes)
    return s.PolytronResidualResponse(
        residual=report.residual, f_norm_sq=report.f_norm_sq, ratio=report.ratio
    )


# --- equilibrium ------------------------------------------------------------


def simulate(req: s.SimulateRequest) -> s.SimulateResponse:
    n = len(req.lambdas)
    if len(req.sigmas) != n:
        raise ValueError(f"{n} lambdas vs {len(req.sigmas)} sigmas")
    theta_star = np.array(req.theta_star, dtype=float) if req.theta_star else np.zeros(n)
    land = equilibrium.QuadraticLandscape(
        theta_star=theta_star,
        eigenvalues=np.array(req.lambdas, dtype=float),
        noise_sigma=np.array(req.sigmas, dtype=float),
        noise_dist=req.dist,
        student_df=req.df,
    )
    theta0 = np.array(req.theta0, dtype=float) if req.theta0 else theta_star.copy()
    trace = equilibrium.iterate(land, theta0, req.eta, req.steps, req.seed, burn_in=req.burn_in)

    directions = []
    for i in range(n):
        lam = float(land.eigenvalues[i])
        sigma = float(land.noise_sigma[i])
        row = s.DirectionReport(
            direction=i + 1,
            eigenvalue=lam,
            sigma=sigma,
            stationary_variance_exact=equilibrium.stationary_variance_exact(req.eta, lam, sigma),
            increment_variance_exact=equilibrium.increment_variance_exact(req.eta, lam, sigma),
            autocorrelation_time_exact=(
                equilibrium.autocorrelation_time_exact(req.eta, lam)
                if req.eta * lam < 1
                else None
            ),
            decay_rate_exact=1.0 - req.eta * lam,
        )
        notes = []
        try:
            row.stationary_variance = equilibrium.stationary_variance(trace, i)
            row.increment_variance = equilibrium.increment_variance(trace, i)
        except equilibrium.InsufficientSamplesError as exc:
            notes.append(str(exc))
        try:
            row.autocorrelation_time = equilibrium.autocorrelation_time(trace, i)
        except (equilibrium.InsufficientSamplesError, equilibrium.DegenerateSeriesError) as exc:
            notes.append(str(exc))
        try:
            row.decay_rate = equilibrium.decay_fit(trace, i)
        except (equilibrium.InsufficientSamplesError, equilibrium.DegenerateSeriesError):
            pass  # a run started at the optimum has no decay segment; not worth a note
        if notes:
            row.note = "; ".join(notes)
        directions.append(row)

    beta = r2 = None
    try:
        fit = equilibrium.boltzmann_fit(trace, land)
        beta, r2 = fit.beta_hat, fit.r_squared
    except (equilibrium.InsufficientSamplesError, equilibrium.DegenerateSeriesError):
        pass

    return s.SimulateResponse(
        eta=req.eta,
        steps=req.steps,
        burn_in=trace.burn_in,
        seed=req.seed,
        stable=trace.stable,
        diverged_at=trace.diverged_at,
        equilibrium_radius=equilibrium.equilibrium_radius(land, req.eta),
        log_equilibrium_volume=equilibrium.equilibrium_volume(land, req.eta).log_volume,
        directions=directions,
        boltzmann_beta=beta,
        boltzmann_r2=r2,
        trace_csv=equilibrium.trace_to_csv(trace) if req.include_trace else None,
    )


# --- experiments ------------------------------------------------------------


def experiment(req: s.ExperimentRequest) -> s.ExperimentResponse:
    benchmark = _network_in(req.benchmark) if req.benchmark is not None else None
    return s.ExperimentResponse(report=run_experiment(req.config, benchmark))


def benchmark(req: s.BenchmarkRequest) -> s.NetworkDoc:
    return _network_out(train_benchmark(req.config))


# Route table shared by the FastAPI app and the in-process CLI client.
ROUTES: dict[str, tuple[type, object, type]] = {
    "/network/build": (s.BuildNetworkRequest, build_network, s.NetworkDoc),
    "/network/forward": (s.ForwardRequest, forward, s.ForwardResponse),
    "/network/train": (s.TrainRequest, train, s.TrainResponse),
    "/network/permute": (s.ApplyPermutationRequest, apply_permutation, s.NetworkDoc),
    "/network/random-permutation": (s.RandomPermutationRequest, random_permutation, s.PermutationDoc),
    "/network/equivalence": (s.EquivalenceRequest, equivalence, s.EquivalenceResponse),
    "/network/canonicalize": (s.CanonicalizeRequest, canonicalize, s.CanonicalizeResponse),
    "/network/compare": (s.CompareRequest, compare, s.CompareResponse),
    "/symmetry/count": (s.CountRequest, count_optima, s.CountResponse),
    "/mask/generate": (s.MaskGenerateRequest, mask_generate, s.MaskDoc),
    "/mask/apply": (s.MaskApplyRequest, mask_apply, s.MaskApplyResponse),
    "/mask/collision-probability": (
        s.CollisionProbabilityRequest,
        collision_probability,
        s.CollisionProbabilityResponse,
    ),
    "/mask/inflate-width": (s.InflateWidthRequest, inflate_width, s.InflateWidthResponse),
    "/poly/basis": (s.PolyBasisRequest, poly_basis, s.PolyBasisResponse),
    "/poly/eval": (s.PolytronEvalRequest, polytron_eval, s.PolytronEvalResponse),
    "/poly/fit": (s.PolytronFitRequest, polytron_fit, s.PolytronFitResponse),
    "/poly/residual": (s.PolytronResidualRequest, polytron_residual, s.PolytronResidualResponse),
    "/simulate": (s.SimulateRequest, simulate, s.SimulateResponse),
    "/experiment/run": (s.ExperimentRequest, experiment, s.ExperimentResponse),
    "/experiment/benchmark": (s.BenchmarkRequest, benchmark, s.NetworkDoc),
}
