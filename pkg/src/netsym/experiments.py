"""Composite experiments tying training, canonicalization, and phi together.

Three experiments are provided, each driven by a JSON-serializable config:

* ``ghost_optima`` -- train a (1, 2, 1) network on data from a two-unit
  teacher whose hidden nodes can be swapped, and track the raw phi
  distance to both teacher arrangements over checkpoints.  The report is
  evidence, not proof: visits and traversals are counted, and the one
  hard assertion is that the two teacher arrangements are functionally
  equivalent while the trained network approaches at least one of them.

* ``stability`` -- train two networks from independent seeds on a dataset
  and a (possibly partially resampled) variant of it, then report the
  functional distance and the per-layer phi before and after
  canonicalization.  Canonical phi below raw phi is the signature that
  node reordering, not genuine weight divergence, dominated the raw
  comparison.

* ``stopping`` -- retrain against a benchmark network and stop as soon as
  every layer's canonicalized phi falls within a threshold of the
  canonicalized benchmark, i.e. once the retrained network has entered
  the benchmark's noise vicinity in parameter space.

Per-trial randomness is derived from the config's master seed through
:func:`netsym.seeding.split_seed`, so every report is reproducible bit
for bit.
"""

from __future__ import annotations

from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator

from . import canonical, netcore, symmetry
from .errors import ShapeMismatchError
from .netcore import Architecture, Dataset, NetworkParams
from .seeding import split_seed

# Tags for carving independent seed streams out of the master seed.
_TAG_PROBES = 101
_TAG_DATA = 102
_TAG_BENCHMARK = 103
_TAG_TRIALS = 200


class DatasetSpec(BaseModel):
    """Teacher-generated regression data: x ~ N(0, I), y = teacher(x) + noise."""

    generator: Literal["teacher"] = "teacher"
    size: int = Field(ge=1)
    noise_std: float = Field(default=0.0, ge=0.0)
    seed: int
    teacher_architecture: list[int]
    teacher_init_scale: float = Field(default=1.0, ge=0.0)
    teacher_seed: int = 0
    teacher_weights: Optional[list[list[list[float]]]] = None


class TrainingSpec(BaseModel):
    lr: float = Field(ge=0.0)
    epochs: int = Field(ge=1)
    batch_size: int = Field(ge=1)
    init_scale: float = Field(default=0.5, ge=0.0)
    activation: Literal["tanh", "identity", "relu"] = "tanh"


class GhostSpec(BaseModel):
    checkpoint_every: int = Field(default=20, ge=1)
    vicinity_phi: float = Field(default=0.1, gt=0.0)


class StabilitySpec(BaseModel):
    resample_fraction: float = Field(default=0.0, ge=0.0, le=1.0)
    method: Literal["lexicographic", "maximin"] = "maximin"
    # Degenerate control: run both networks from the same init and batching
    # seeds, so with resample_fraction 0 the trained pair is identical.
    shared_seeds: bool = False


class StoppingSpec(BaseModel):
    phi_stop: float = Field(ge=0.0)
    epoch_budget: int = Field(ge=1)
    method: Literal["lexicographic", "maximin"] = "maximin"


class ExperimentConfig(BaseModel):
    """One experiment run: id, architecture, data, training, trial seeds."""

    schema_version: Literal[1] = 1
    experiment_id: Literal["ghost_optima", "stability", "stopping"]
    architecture: list[int]
    dataset: DatasetSpec
    training: TrainingSpec
    trials: int = Field(default=1, ge=1)
    master_seed: int
    probes: int = Field(default=256, ge=1)
    ghost: Optional[GhostSpec] = None
    stability: Optional[StabilitySpec] = None
    stopping: Optional[StoppingSpec] = None

    @model_validator(mode="after")
    def _section_matches_id(self):
        if self.experiment_id == "ghost_optima" and self.ghost is None:
            self.ghost = GhostSpec()
        if self.experiment_id == "stability" and self.stability is None:
            self.stability = StabilitySpec()
        if self.experiment_id == "stopping" and self.stopping is None:
            raise ValueError("stopping experiments require a 'stopping' section")
        return self


def make_teacher(cfg: ExperimentConfig) -> NetworkParams:
    spec = cfg.dataset
    arch = Architecture(tuple(spec.teacher_architecture))
    if spec.teacher_weights is not None:
        weights = [np.array(w, dtype=float) for w in spec.teacher_weights]
        return NetworkParams(arch, weights, cfg.training.activation)
    return NetworkParams(
        arch,
        netcore.build_network(arch, spec.teacher_init_scale, spec.teacher_seed).weights,
        cfg.training.activation,
    )


def make_dataset(cfg: ExperimentConfig, teacher: NetworkParams) -> Dataset:
    spec = cfg.dataset
    rng = np.random.default_rng(split_seed(spec.seed, _TAG_DATA))
    X = rng.standard_normal((spec.size, teacher.architecture.n_inputs))
    Y = netcore.forward_batch(teacher, X)
    if spec.noise_std > 0:
        Y = Y + spec.noise_std * rng.standard_normal(Y.shape)
    return Dataset(X, Y)


def resample_dataset(
    data: Dataset, fraction: float, teacher: NetworkParams, noise_std: float, seed: int
) -> Dataset:
    """Replace a seeded random fraction of the points with fresh teacher draws."""
    if fraction <= 0.0:
        return data
    rng = np.random.default_rng(seed)
    m = len(data)
    k = int(round(fraction * m))
    idx = rng.choice(m, size=k, replace=False)
    X = data.inputs.copy()
    Y = data.targets.copy()
    X[idx] = rng.standard_normal((k, X.shape[1]))
    Y[idx] = netcore.forward_batch(teacher, X[idx])
    if noise_std > 0:
        Y[idx] += noise_std * rng.standard_normal((k, Y.shape[1]))
    return Dataset(X, Y)


def probe_inputs(cfg: ExperimentConfig, n_inputs: int) -> np.ndarray:
    rng = np.random.default_rng(split_seed(cfg.master_seed, _TAG_PROBES))
    return rng.standard_normal((cfg.probes, n_inputs))


def functional_distance(p1: NetworkParams, p2: NetworkParams, probes_x: np.ndarray) -> float:
    """Root-mean-square output difference over a fixed probe set."""
    y1 = netcore.forward_batch(p1, probes_x)
    y2 = netcore.forward_batch(p2, probes_x)
    return float(np.sqrt(np.mean((y1 - y2) ** 2)))


def _mean_phi(ws_a, ws_b) -> float:
    return float(np.mean([canonical.frobenius_similarity(a, b) for a, b in zip(ws_a, ws_b)]))


# ---------------------------------------------------------------------------
# Ghost-optima traversal demo


def run_ghost_optima_demo(cfg: ExperimentConfig) -> dict:
    """Track a noisy training run against the two arrangements of its teacher.

    Requires architecture (1, 2, 1): with two hidden nodes the teacher has
    exactly two equivalent arrangements, so "which vicinity are we near"
    is a binary question.  A checkpoint is classified as visiting an
    arrangement when the mean raw phi over the two layers falls below the
    vicinity threshold; traversals count switches between consecutive
    classified checkpoints.
    """
    if cfg.experiment_id != "ghost_optima":
        raise ValueError("config is not a ghost_optima experiment")
    arch = Architecture(tuple(cfg.architecture))
    if arch.layer_widths != (1, 2, 1):
        raise ValueError(f"ghost demo requires architecture (1, 2, 1), got {arch.layer_widths}")
    spec = cfg.ghost or GhostSpec()

    teacher = make_teacher(cfg)
    if teacher.architecture != arch:
        raise ShapeMismatchError("teacher architecture must match the trained architecture")
    swap = symmetry.LayerPermutationSet((np.array([1, 0]),))
    teacher_swapped = symmetry.apply_permutation(teacher, swap)
    degenerate = bool(
        np.array_equal(teacher.weights[0][:, 0], teacher.weights[0][:, 1])
        and np.array_equal(teacher.weights[1][0], teacher.weights[1][1])
    )

    equiv = symmetry.functional_equivalence(
        teacher, teacher_swapped, probes=32, tol=1e-10, seed=split_seed(cfg.master_seed, 1)
    )

    data = make_dataset(cfg, teacher)
    params = netcore.build_network(arch, cfg.training.init_scale, split_seed(cfg.master_seed, 2))
    params = NetworkParams(arch, params.weights, cfg.training.activation)

    checkpoints = []
    visits = []
    n_chunks = max(1, cfg.training.epochs // spec.checkpoint_every)
    epoch = 0
    last_loss = None
    for chunk in range(n_chunks):
        chunk_epochs = min(spec.checkpoint_every, cfg.training.epochs - epoch)
        if chunk_epochs == 0:
            break
        params, losses = netcore.train_sgd(
            params,
            data,
            cfg.training.lr,
            chunk_epochs,
            cfg.training.batch_size,
            split_seed(cfg.master_seed, _TAG_TRIALS + chunk),
        )
        epoch += chunk_epochs
        last_loss = losses[-1]
        phi_a = _mean_phi(params.weights, teacher.weights)
        phi_b = _mean_phi(params.weights, teacher_swapped.weights)
        visit = None
        if min(phi_a, phi_b) < spec.vicinity_phi:
            visit = "A" if phi_a <= phi_b else "B"
            visits.append(visit)
        checkpoints.append(
            {"epoch": epoch, "phi_to_a": phi_a, "phi_to_b": phi_b, "loss": last_loss,
             "visit": visit}
        )

    traversals = sum(1 for i in range(1, len(visits)) if visits[i] != visits[i - 1])
    min_phi = min(min(c["phi_to_a"], c["phi_to_b"]) for c in checkpoints)
    return {
        "experiment_id": "ghost_optima",
        "degenerate": degenerate,
        "teacher_equivalent": equiv.equivalent,
        "teacher_max_deviation": equiv.max_deviation,
        "checkpoints": checkpoints,
        "visit_counts": {"A": visits.count("A"), "B": visits.count("B")},
        "traversals": traversals,
        "min_phi": min_phi,
        "reached_vicinity": bool(min_phi < spec.vicinity_phi),
        "final_loss": last_loss,
        "config": cfg.model_dump(),
    }


# ---------------------------------------------------------------------------
# Retraining stability study


def _train_pair_seeds(master: int, trial: int) -> tuple[int, int, int, int, int]:
    base = split_seed(master, _TAG_TRIALS + trial)
    return tuple(split_seed(base, j) for j in range(5))  # type: ignore[return-value]


def run_stability_study(cfg: ExperimentConfig) -> dict:
    """Train network pairs on D and D' and compare raw vs canonical phi.

    Per trial: independent init and batching seeds for both networks, a
    resampled variant D' (identical to D when the resample fraction is 0),
    the probe-set functional distance, and per-layer phi raw /
    lexicographic / maximin.  The aggregate reports how often canonical
    phi beat raw phi in every layer for the configured method.
    """
    if cfg.experiment_id != "stability":
        raise ValueError("config is not a stability experiment")
    spec = cfg.stability or StabilitySpec()
    arch = Architecture(tuple(cfg.architecture))
    teacher = make_teacher(cfg)
    data = make_dataset(cfg, teacher)
    probes_x = probe_inputs(cfg, arch.n_inputs)

    trials = []
    better = 0
    for t in range(cfg.trials):
        init1, init2, train1, train2, resample = _train_pair_seeds(cfg.master_seed, t)
        if spec.shared_seeds:
            init2, train2 = init1, train1
        data_prime = resample_dataset(
            data, spec.resample_fraction, teacher, cfg.dataset.noise_std, resample
        )
        net1 = NetworkParams(
            arch,
            netcore.build_network(arch, cfg.training.init_scale, init1).weights,
            cfg.training.activation,
        )
        net2 = NetworkParams(
            arch,
            netcore.build_network(arch, cfg.training.init_scale, init2).weights,
            cfg.training.activation,
        )
        net1, _ = netcore.train_sgd(
            net1, data, cfg.training.lr, cfg.training.epochs, cfg.training.batch_size, train1
        )
        net2, _ = netcore.train_sgd(
            net2, data_prime, cfg.training.lr, cfg.training.epochs, cfg.training.batch_size, train2
        )

        phi_raw = canonical.network_distance(net1, net2, "raw").per_layer_phi
        phi_lex = canonical.network_distance(net1, net2, "lexicographic").per_layer_phi
        phi_max = canonical.network_distance(net1, net2, "maximin").per_layer_phi
        phi_method = phi_lex if spec.method == "lexicographic" else phi_max
        canonical_better = bool(all(c < r for c, r in zip(phi_method, phi_raw)))
        better += canonical_better
        trials.append(
            {
                "trial": t,
                "data_perturbation": spec.resample_fraction,
                "functional_distance": functional_distance(net1, net2, probes_x),
                "phi_raw": phi_raw,
                "phi_lexicographic": phi_lex,
                "phi_maximin": phi_max,
                "canonical_below_raw": canonical_better,
            }
        )

    return {
        "experiment_id": "stability",
        "method": spec.method,
        "trials": trials,
        "fraction_canonical_below_raw": better / cfg.trials,
        "config": cfg.model_dump(),
    }


# ---------------------------------------------------------------------------
# Stopping criterion


def train_benchmark(cfg: ExperimentConfig) -> NetworkParams:
    """Train the benchmark network a stopping run is measured against."""
    arch = Architecture(tuple(cfg.architecture))
    teacher = make_teacher(cfg)
    data = make_dataset(cfg, teacher)
    base = split_seed(cfg.master_seed, _TAG_BENCHMARK)
    net = NetworkParams(
        arch,
        netcore.build_network(arch, cfg.training.init_scale, split_seed(base, 0)).weights,
        cfg.training.activation,
    )
    net, _ = netcore.train_sgd(
        net, data, cfg.training.lr, cfg.training.epochs, cfg.training.batch_size,
        split_seed(base, 1),
    )
    return net


def run_stopping_criterion(cfg: ExperimentConfig, benchmark: NetworkParams) -> dict:
    """Retrain until the canonicalized phi to the benchmark drops under phi_stop.

    The phi check runs before the first epoch (epoch 0) and after every
    epoch; a trial stops when every layer satisfies phi <= phi_stop, and
    otherwise reports budget exhaustion with the closest phi it achieved.
    """
    if cfg.experiment_id != "stopping":
        raise ValueError("config is not a stopping experiment")
    spec = cfg.stopping
    assert spec is not None
    arch = Architecture(tuple(cfg.architecture))
    if benchmark.architecture != arch:
        raise ShapeMismatchError("benchmark architecture does not match the config")

    teacher = make_teacher(cfg)
    data = make_dataset(cfg, teacher)
    probes_x = probe_inputs(cfg, arch.n_inputs)
    bench_canon, _ = canonical.canonicalize(benchmark, spec.method)

    def phi_to_benchmark(net: NetworkParams) -> list[float]:
        net_canon, _ = canonical.canonicalize(net, spec.method)
        return [
            canonical.frobenius_similarity(a, b)
            for a, b in zip(net_canon.weights, bench_canon.weights)
        ]

    trials = []
    stopped_count = 0
    for t in range(cfg.trials):
        base = split_seed(cfg.master_seed, _TAG_TRIALS + t)
        net = NetworkParams(
            arch,
            netcore.build_network(arch, cfg.training.init_scale, split_seed(base, 0)).weights,
            cfg.training.activation,
        )
        stopped = False
        stopping_epoch = None
        best = float("inf")
        phis = phi_to_benchmark(net)
        best = min(best, max(phis))
        if all(p <= spec.phi_stop for p in phis):
            stopped, stopping_epoch = True, 0
        epoch = 0
        while not stopped and epoch < spec.epoch_budget:
            net, _ = netcore.train_sgd(
                net, data, cfg.training.lr, 1, cfg.training.batch_size,
                split_seed(base, 1 + epoch),
            )
            epoch += 1
            phis = phi_to_benchmark(net)
            best = min(best, max(phis))
            if all(p <= spec.phi_stop for p in phis):
                stopped, stopping_epoch = True, epoch
        stopped_count += stopped
        trials.append(
            {
                "trial": t,
                "stopped": stopped,
                "stopping_epoch": stopping_epoch,
                "epochs_run": epoch,
                "final_phi": phis,
                "closest_max_phi": best,
                "functional_distance": functional_distance(net, benchmark, probes_x),
            }
        )

    return {
        "experiment_id": "stopping",
        "method": spec.method,
        "phi_stop": spec.phi_stop,
        "trials": trials,
        "fraction_stopped": stopped_count / cfg.trials,
        "config": cfg.model_dump(),
    }


def run_experiment(cfg: ExperimentConfig, benchmark: NetworkParams | None = None) -> dict:
    """Dispatch on the config's experiment id."""
    if cfg.experiment_id == "ghost_optima":
        return run_ghost_optima_demo(cfg)
    if cfg.experiment_id == "stability":
        return run_stability_study(cfg)
    if benchmark is None:
        raise ValueError("stopping experiments require a benchmark network")
    return run_stopping_criterion(cfg, benchmark)
