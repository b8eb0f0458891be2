"""
Experiment plumbing: distribution and stream generation, single runs of
any estimator or tester as a ``TrialReport``, and sweep specifications.
"""
import dataclasses
import itertools
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from infostream.constants import estimator_setting
from infostream.dist_core import (
    L2_SQUARED, TRIANGLE, Distribution, divergence_exact, empirical_entropy, entropy_exact,
    kind_by_name, save_distribution,
)
from infostream.errors import ContractViolation
from infostream.oracles import OracleSession, Target, derive_key, make_rng
from infostream.streaming.large_small import large_small_estimate
from infostream.streaming.level_bank import f0_entropy_estimate
from infostream.streaming.random_order import random_stream_entropy
from infostream.streaming.simulation import (
    SimulationMode, default_simulation_size, simulate_combined_oracle,
)
from infostream.streaming.tokens import StreamOrder, TokenStream, generate_stream
from infostream.testers import (
    DEFAULT_ALPHA, DeltaTestParams, combined_distance_estimate, combined_distance_run,
    combined_entropy_estimate, combined_entropy_run, combined_l2_estimate, delta_test,
    hard_l1_instance,
)

logger = logging.getLogger(__name__)

DIST_KINDS = ("uniform", "pointmass", "dyadic", "zipf", "two-block", "random", "hard-l1")

# Large-small runs use α = 1/2 unless told otherwise
LARGE_SMALL_ALPHA = 0.5

SEED_MASK = 0x7FFFFFFF


# --- Generation ---

@dataclass
class GeneratedDist:
    p: Distribution
    q: Optional[Distribution] = None
    info: Dict[str, Any] = field(default_factory=dict)


def _bool_param(value: Any) -> bool:
    if isinstance(value, str):
        return value.lower() in ("1", "true", "yes", "far")
    return bool(value)


def gen_dist(kind: str, n: int, seed: int = 0, **params) -> GeneratedDist:
    """Build a named distribution family over ``[0, n)``; ``hard-l1`` builds
    a near/far pair."""
    if n < 1:
        raise ContractViolation(f"n must be positive, got {n}")
    if kind == "uniform":
        support = params.get("support")
        return GeneratedDist(Distribution.uniform(n, None if support is None else int(support)))
    if kind == "pointmass":
        item = int(params.get("item", 0))
        if not 0 <= item < n:
            raise ContractViolation(f"item {item} outside [0, {n})")
        return GeneratedDist(Distribution.point_mass(n, item))
    if kind == "dyadic":
        probs = 2.0 ** -np.arange(1, n + 1, dtype=np.float64)
        probs[-1] *= 2.0
        return GeneratedDist(Distribution(probs))
    if kind == "zipf":
        s = float(params.get("s", 1.0))
        return GeneratedDist(Distribution.from_weights(1.0 / np.arange(1, n + 1) ** s), info={"s": s})
    if kind == "two-block":
        if n < 2:
            raise ContractViolation("two-block needs n >= 2")
        split = float(params.get("split", 0.75))
        if not 0.0 <= split <= 1.0:
            raise ContractViolation(f"split must lie in [0, 1], got {split}")
        half = n // 2
        probs = np.concatenate([np.full(half, split / half), np.full(n - half, (1.0 - split) / (n - half))])
        return GeneratedDist(Distribution(probs), info={"split": split})
    if kind == "random":
        weights = make_rng(seed, "gen-dist").dirichlet(np.ones(n))
        return GeneratedDist(Distribution.from_weights(weights))
    if kind == "hard-l1":
        instance = hard_l1_instance(int(params.get("k", 1)), float(params.get("eps", 0.1)),
                                    float(params.get("a", 0.5)), _bool_param(params.get("far", False)),
                                    n, permute_seed=seed)
        return GeneratedDist(instance.p, instance.q, info=instance.describe())
    raise ContractViolation(f"unknown distribution kind '{kind}' (expected one of {', '.join(DIST_KINDS)})")


def pair_path(path: Path) -> Path:
    """File holding the second distribution of a pair written to ``path``."""
    path = Path(path)
    return path.with_name(f"{path.stem}_q{path.suffix}")


def write_dist(generated: GeneratedDist, path: Path) -> List[Path]:
    written = [save_distribution(generated.p, path)]
    if generated.q is not None:
        written.append(save_distribution(generated.q, pair_path(path)))
    return written


def gen_stream(p: Distribution, m: int, order: str = StreamOrder.AS_GIVEN.value, seed: int = 0,
               q: Optional[Distribution] = None) -> TokenStream:
    return generate_stream(p, m, StreamOrder(order), seed, q)


# --- Runs ---

@dataclass
class RunParams:
    """Knobs of a single run; unset values fall back to each algorithm's default."""

    n: Optional[int] = None
    m: Optional[int] = None
    eps: float = 0.1
    eps0: float = 0.05
    eps_c: float = 0.1
    alpha: Optional[float] = None
    delta: float = 0.05
    seed: int = 0
    order: str = StreamOrder.AS_GIVEN.value
    kind: str = "js"
    lower_bound: Optional[float] = None
    iterations: Optional[int] = None
    t: Optional[int] = None
    max_length: Optional[int] = None
    wrapped: str = "entropy"

    def to_dict(self) -> Dict[str, Any]:
        return {k: v for k, v in asdict(self).items() if v is not None}

    @classmethod
    def field_names(cls) -> Tuple[str, ...]:
        return tuple(f.name for f in dataclasses.fields(cls))

    def replace(self, **changes) -> "RunParams":
        return dataclasses.replace(self, **changes)


@dataclass
class RunInputs:
    p: Optional[Distribution] = None
    q: Optional[Distribution] = None
    stream: Optional[TokenStream] = None


@dataclass
class TrialReport:
    """One run: estimate or verdict, ground truth, oracle calls, summary space."""

    algo: str
    params: Dict[str, Any]
    seed: int
    estimate: Optional[float] = None
    verdict: Optional[str] = None
    exact_value: Optional[float] = None
    m: Optional[int] = None
    calls: Optional[Dict[str, Any]] = None
    space_words: Optional[int] = None
    details: Dict[str, Any] = field(default_factory=dict)
    wall_ms: float = 0.0

    @property
    def relative_error(self) -> Optional[float]:
        if self.estimate is None or self.exact_value is None:
            return None
        if self.exact_value == 0.0:
            return 0.0 if self.estimate == 0.0 else math.inf
        return abs(self.estimate - self.exact_value) / abs(self.exact_value)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=_json_default)


def _json_default(value: Any):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"not JSON serializable: {type(value).__name__}")


def reports_json(reports: List[TrialReport]) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True, default=_json_default)


def _need_pair(inputs: RunInputs, algo: str) -> Tuple[Distribution, Distribution]:
    if inputs.p is None or inputs.q is None:
        raise ContractViolation(f"'{algo}' needs two distributions")
    return inputs.p, inputs.q


def _need_dist(inputs: RunInputs, algo: str) -> Distribution:
    if inputs.p is None:
        raise ContractViolation(f"'{algo}' needs a distribution")
    return inputs.p


def _need_stream(inputs: RunInputs, algo: str) -> TokenStream:
    if inputs.stream is None:
        raise ContractViolation(f"'{algo}' needs a stream (or a distribution with --m)")
    return inputs.stream


def _stream_truth(stream: TokenStream, kind_name: Optional[str] = None) -> float:
    if kind_name is None or Target.Q not in stream.targets:
        return empirical_entropy(stream.counts(Target.P))
    p = Distribution.from_counts(stream.counts(Target.P))
    q = Distribution.from_counts(stream.counts(Target.Q))
    return divergence_exact(kind_by_name(kind_name), p, q)


def _run_delta_test(inputs, params, config):
    p, q = _need_pair(inputs, "delta-test")
    session = OracleSession(p, q, seed=params.seed)
    test_params = DeltaTestParams.for_domain(p.n, params.eps, params.alpha or DEFAULT_ALPHA, params.delta,
                                             estimator_setting(config, "delta_sample_constant"))
    outcome = delta_test(session, test_params, estimator_setting(config, "l2_sample_constant"))
    return dict(verdict=outcome.verdict.value, exact_value=divergence_exact(TRIANGLE, p, q),
                m=test_params.m, calls=session.trace_dict(),
                details={"stage": outcome.stage, "statistic": outcome.statistic,
                         "threshold": outcome.threshold, "samples_per_side": outcome.m})


def _run_combined_distance(inputs, params, config):
    p, q = _need_pair(inputs, "combined-distance")
    kind = kind_by_name(params.kind)
    session = OracleSession(p, q, seed=params.seed)
    result = combined_distance_estimate(session, kind, params.eps, params.delta,
                                        params.lower_bound, params.iterations)
    return dict(estimate=result.value, exact_value=divergence_exact(kind, p, q), m=result.iterations,
                calls=session.trace_dict(), details={"kind": kind.tag.value, "guesses": result.guesses})


def _run_combined_l2(inputs, params, config):
    p, q = _need_pair(inputs, "combined-l2")
    session = OracleSession(p, q, seed=params.seed)
    result = combined_l2_estimate(session, params.eps, params.delta, params.lower_bound, params.iterations)
    return dict(estimate=result.value, exact_value=divergence_exact(L2_SQUARED, p, q), m=result.iterations,
                calls=session.trace_dict(), details={"guesses": result.guesses})


def _run_combined_entropy(inputs, params, config):
    p = _need_dist(inputs, "combined-entropy")
    session = OracleSession(p, seed=params.seed)
    result = combined_entropy_estimate(session, params.eps, params.delta, params.lower_bound,
                                       params.iterations)
    return dict(estimate=result.value, exact_value=entropy_exact(p), m=result.iterations,
                calls=session.trace_dict(), details={"guesses": result.guesses})


def _run_f0_entropy(inputs, params, config):
    stream = _need_stream(inputs, "f0-entropy")
    report = f0_entropy_estimate(stream, params.eps, params.eps0, params.eps_c,
                                 max_length=params.max_length, delta=params.delta, seed=params.seed,
                                 kmv_constant=estimator_setting(config, "kmv_constant"))
    exact = _stream_truth(stream)
    return dict(estimate=report.raw, exact_value=exact, m=report.m, space_words=report.space_words,
                details=report.to_dict(exact))


def _run_large_small(inputs, params, config):
    stream = _need_stream(inputs, "large-small")
    report = large_small_estimate(stream, params.alpha or LARGE_SMALL_ALPHA, params.eps,
                                  max_length=params.max_length, seed=params.seed,
                                  track_constant=estimator_setting(config, "track_constant"))
    return dict(estimate=report.estimate, exact_value=_stream_truth(stream), m=report.m,
                space_words=report.space_words, details=report.to_dict())


def _run_random_ptas(inputs, params, config):
    stream = _need_stream(inputs, "random-ptas")
    report = random_stream_entropy(stream, params.eps, int(estimator_setting(config, "c1")),
                                   query_constant=estimator_setting(config, "query_constant"),
                                   seed=params.seed)
    return dict(estimate=report.estimate, exact_value=_stream_truth(stream), m=report.m,
                space_words=report.space_words, details=report.to_dict())


def _simulation_runner(mode: SimulationMode):
    def run(inputs, params, config):
        stream = _need_stream(inputs, f"oracle-sim ({mode.value})")
        t = params.t or default_simulation_size(stream.n, params.eps,
                                                estimator_setting(config, "query_constant"))
        if params.wrapped == "entropy":
            wrapped = lambda oracle: combined_entropy_run(oracle, t)
            kind_name = None
        elif params.wrapped == "distance":
            kind = kind_by_name(params.kind)
            wrapped = lambda oracle: combined_distance_run(oracle, kind, t)
            kind_name = params.kind
        else:
            raise ContractViolation(f"unknown wrapped algorithm '{params.wrapped}' "
                                    f"(expected 'entropy' or 'distance')")
        result = simulate_combined_oracle(stream, t, mode, wrapped, seed=params.seed)
        return dict(estimate=float(result.output), exact_value=_stream_truth(stream, kind_name), m=t,
                    calls=result.oracle.trace_dict(), space_words=result.space_words,
                    details={"mode": mode.value, "wrapped": params.wrapped})
    return run


def _run_exact(inputs, params, config):
    if inputs.stream is not None:
        stream = inputs.stream
        kind_name = params.kind if Target.Q in stream.targets else None
        value = _stream_truth(stream, kind_name)
        return dict(estimate=value, exact_value=value, m=len(stream),
                    details={"quantity": kind_name or "entropy"})
    p = _need_dist(inputs, "exact")
    if inputs.q is not None:
        kind = kind_by_name(params.kind)
        value = divergence_exact(kind, inputs.p, inputs.q)
        return dict(estimate=value, exact_value=value, details={"quantity": kind.tag.value})
    value = entropy_exact(p)
    return dict(estimate=value, exact_value=value, details={"quantity": "entropy"})


ALGOS: Dict[str, Callable[[RunInputs, RunParams, Optional[Dict]], Dict[str, Any]]] = {
    "delta-test": _run_delta_test,
    "combined-distance": _run_combined_distance,
    "combined-entropy": _run_combined_entropy,
    "combined-l2": _run_combined_l2,
    "f0-entropy": _run_f0_entropy,
    "large-small": _run_large_small,
    "random-ptas": _run_random_ptas,
    "oracle-sim-1p": _simulation_runner(SimulationMode.ONE_PASS),
    "oracle-sim-2p": _simulation_runner(SimulationMode.TWO_PASS),
    "exact": _run_exact,
}


def run(algo: str, inputs: RunInputs, params: RunParams,
        config: Optional[Dict[str, Any]] = None) -> TrialReport:
    """Execute one algorithm and wrap its output as a ``TrialReport``."""
    runner = ALGOS.get(algo)
    if runner is None:
        raise ContractViolation(f"unknown algorithm '{algo}' (expected one of {', '.join(ALGOS)})")
    if inputs.stream is not None:
        inputs.stream.chunk_size = int(estimator_setting(config, "chunk_size"))
    started = time.perf_counter()
    outcome = runner(inputs, params, config)
    wall_ms = (time.perf_counter() - started) * 1000.0
    report = TrialReport(algo=algo, params=params.to_dict(), seed=params.seed, wall_ms=wall_ms, **outcome)
    logger.info(f"Run: {algo} seed={params.seed} "
                f"{'verdict=' + report.verdict if report.verdict else f'estimate={report.estimate}'} "
                f"({wall_ms:.0f} ms)")
    return report


# --- Sweeps ---

SWEEP_COLUMNS = ("estimate", "verdict", "exact", "rel_error", "calls", "space_words", "seed")


@dataclass
class SweepJob:
    index: int
    cell: int
    trial: int
    algo: str
    axis_values: Dict[str, Any]
    dist: Dict[str, Any]
    params: Dict[str, Any]
    config: Optional[Dict[str, Any]] = None


@dataclass
class SweepSpec:
    """Cross product of parameter axes, ``trials`` runs per cell.

    Axis names that are ``RunParams`` fields change the run; any other name
    changes the distribution family parameters (``far``, ``s``, ...).
    """

    algo: str
    dist: Dict[str, Any] = field(default_factory=lambda: {"kind": "uniform"})
    axes: Dict[str, List[Any]] = field(default_factory=dict)
    trials: int = 1
    seed: int = 0
    params: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.algo not in ALGOS:
            raise ContractViolation(f"unknown algorithm '{self.algo}'")
        if self.trials < 1:
            raise ContractViolation(f"trials must be at least 1, got {self.trials}")
        known = set(RunParams.field_names())
        unknown = set(self.params) - known
        if unknown:
            raise ContractViolation(f"unknown run parameters: {', '.join(sorted(unknown))}")
        for name, values in self.axes.items():
            if not isinstance(values, list) or not values:
                raise ContractViolation(f"axis '{name}' must be a non-empty list")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SweepSpec":
        allowed = {f.name for f in dataclasses.fields(cls)}
        extra = set(data) - allowed
        if extra:
            raise ContractViolation(f"unknown sweep keys: {', '.join(sorted(extra))}")
        return cls(**data)

    @classmethod
    def load(cls, path: Path) -> "SweepSpec":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def cells(self) -> List[Dict[str, Any]]:
        names = list(self.axes)
        return [dict(zip(names, combo)) for combo in itertools.product(*(self.axes[k] for k in names))]

    def columns(self) -> List[str]:
        return ["cell", "trial", *self.axes, *SWEEP_COLUMNS]

    def jobs(self, config: Optional[Dict[str, Any]] = None) -> List[SweepJob]:
        run_fields = set(RunParams.field_names())
        jobs = []
        for cell, values in enumerate(self.cells()):
            params = dict(self.params)
            dist = dict(self.dist)
            for name, value in values.items():
                (params if name in run_fields else dist)[name] = value
            for trial in range(self.trials):
                seed = derive_key(self.seed, "trial", cell, trial) & SEED_MASK
                jobs.append(SweepJob(len(jobs), cell, trial, self.algo, values, dist,
                                     {**params, "seed": seed}, config))
        return jobs


STREAM_ALGOS = ("f0-entropy", "large-small", "random-ptas", "oracle-sim-1p", "oracle-sim-2p")


def build_inputs(algo: str, dist: Dict[str, Any], params: RunParams, dist_seed: int) -> RunInputs:
    """Materialize a cell's distribution (and stream, for stream algorithms)."""
    spec = dict(dist)
    kind = spec.pop("kind", "uniform")
    if params.n is None:
        raise ContractViolation("sweep runs need 'n'")
    generated = gen_dist(kind, params.n, dist_seed, **spec)
    if algo not in STREAM_ALGOS:
        return RunInputs(generated.p, generated.q)
    if params.m is None:
        raise ContractViolation(f"'{algo}' sweeps need 'm'")
    stream = gen_stream(generated.p, params.m, params.order, params.seed, generated.q)
    return RunInputs(generated.p, generated.q, stream)


def run_job(job: SweepJob) -> Dict[str, Any]:
    """Run one (cell, trial) of a sweep and flatten it into a CSV row."""
    params = RunParams(**job.params)
    dist = dict(job.dist)
    dist_seed = int(dist.pop("dist_seed", derive_key(params.seed, "dist") & SEED_MASK))
    report = run(job.algo, build_inputs(job.algo, dist, params, dist_seed), params, job.config)
    row = {"cell": job.cell, "trial": job.trial, **job.axis_values}
    rel = report.relative_error
    row.update({
        "estimate": "" if report.estimate is None else repr(float(report.estimate)),
        "verdict": report.verdict or "",
        "exact": "" if report.exact_value is None else repr(float(report.exact_value)),
        "rel_error": "" if rel is None else repr(float(rel)),
        "calls": "" if report.calls is None else sum(v for k, v in report.calls.items() if k != "seed"),
        "space_words": "" if report.space_words is None else report.space_words,
        "seed": report.seed,
    })
    return row
