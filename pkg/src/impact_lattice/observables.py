"""Sustain-probability fields and ensemble statistics."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .cluster import (
    boundary_mask,
    cluster_size_histogram,
    count_small_clusters,
    label_clusters,
    largest_cluster_fraction,
)
from .core import (
    Configuration,
    ModelParams,
    ParameterError,
    impact_matrix,
    opinion_probabilities,
    run,
    sample_opinions,
)

SMALL_CLUSTER_MAX = 5


@dataclass(frozen=True, eq=False)
class SustainField:
    """Per-agent probability of keeping the current opinion, shape ``(L, L)``."""

    values: np.ndarray
    step_index: int = 0


def _choice_probabilities(config: Configuration, engine) -> np.ndarray:
    return opinion_probabilities(impact_matrix(config, engine), config.params.temperature)


def sustain_probability_field(config: Configuration, engine="kernel") -> SustainField:
    """Analytic one-step keep probability of every agent."""
    probs = _choice_probabilities(config, engine)
    keep = probs[np.arange(config.params.N), config.opinions]
    return SustainField(keep.reshape(config.L, config.L), config.step_index)


def empirical_sustain_field(
    config: Configuration, n_samples: int, engine="kernel", seed: int | None = None, chunk: int = 4096
) -> SustainField:
    """Keep frequency over ``n_samples`` independent synchronous resamplings.

    Uses the same sampler as ``step`` fed from a dedicated probe stream.
    """
    if n_samples < 1:
        raise ParameterError("n_samples", f"must be >= 1, got {n_samples}")
    params = config.params
    probs = _choice_probabilities(config, engine)
    gen = rng.stream(params.seed if seed is None else seed, config.step_index, rng.PURPOSE_PROBE)
    kept = np.zeros(params.N)
    done = 0
    while done < n_samples:
        m = min(chunk, n_samples - done)
        u = gen.random((m, params.N))
        kept += (sample_opinions(probs[None, :, :], u) == config.opinions).sum(axis=0)
        done += m
    return SustainField((kept / n_samples).reshape(config.L, config.L), config.step_index)


def boundary_interior_sums(config: Configuration, sustain: SustainField) -> tuple[float, int, float, int]:
    """Sums and counts of sustain values over boundary and interior agents."""
    mask = boundary_mask(config.grid())
    v = sustain.values
    return float(v[mask].sum()), int(mask.sum()), float(v[~mask].sum()), int((~mask).sum())


@dataclass(frozen=True)
class RunObservables:
    seed: int
    smax_frac: float
    n_clusters: int
    n_small_clusters: int
    histogram: dict[int, int]
    boundary_sustain_sum: float
    boundary_count: int
    interior_sustain_sum: float
    interior_count: int


@dataclass(frozen=True)
class EnsembleStats:
    alpha: float
    temperature: float
    K: int
    L: int
    steps: int
    n_runs: int
    mean_smax_frac: float
    std_smax_frac: float
    mean_n_clusters: float
    mean_n_small_clusters: float
    mean_histogram: dict[int, float]
    boundary_sustain: float
    interior_sustain: float
    runs: tuple[RunObservables, ...] = field(default=(), repr=False)

    @property
    def key(self) -> tuple:
        return (self.K, self.L, self.steps)


def measure_run(params: ModelParams, measure_step: int, engine="kernel") -> RunObservables:
    """Run one simulation to ``measure_step`` and collect clustering observables."""
    config = run(params, engine=engine, steps=measure_step).final
    labeling = label_clusters(config.grid())
    sustain = sustain_probability_field(config, engine)
    b_sum, b_n, i_sum, i_n = boundary_interior_sums(config, sustain)
    return RunObservables(
        seed=params.seed,
        smax_frac=largest_cluster_fraction(labeling, params.L),
        n_clusters=labeling.n_clusters,
        n_small_clusters=count_small_clusters(labeling, SMALL_CLUSTER_MAX),
        histogram=cluster_size_histogram(labeling),
        boundary_sustain_sum=b_sum,
        boundary_count=b_n,
        interior_sustain_sum=i_sum,
        interior_count=i_n,
    )


def _measure_job(job):
    return measure_run(*job)


def ensemble_run(
    params: ModelParams,
    n_runs: int,
    measure_step: int | None = None,
    engine="kernel",
    workers: int = 1,
) -> EnsembleStats:
    """Independent runs seeded ``derive_seed(params.seed, r)``; ordered aggregation."""
    if isinstance(n_runs, bool) or not isinstance(n_runs, int) or n_runs < 1:
        raise ParameterError("runs", f"must be an integer >= 1, got {n_runs!r}")
    measure = params.steps if measure_step is None else measure_step
    if not 0 <= measure <= params.steps:
        raise ParameterError("measure_step", f"must lie in [0, {params.steps}], got {measure}")
    jobs = [(params.replace(seed=rng.derive_seed(params.seed, r)), measure, engine) for r in range(n_runs)]
    if workers > 1 and n_runs > 1:
        with ProcessPoolExecutor(max_workers=min(workers, n_runs)) as pool:
            runs = list(pool.map(_measure_job, jobs))
    else:
        runs = [_measure_job(job) for job in jobs]
    return aggregate(params, measure, runs)


def aggregate(params: ModelParams, measure_step: int, runs: list[RunObservables]) -> EnsembleStats:
    smax = np.array([r.smax_frac for r in runs])
    sizes = sorted({s for r in runs for s in r.histogram})
    hist = {s: sum(r.histogram.get(s, 0) for r in runs) / len(runs) for s in sizes}
    b_n = sum(r.boundary_count for r in runs)
    i_n = sum(r.interior_count for r in runs)
    return EnsembleStats(
        alpha=float(params.alpha),
        temperature=float(params.temperature),
        K=params.K,
        L=params.L,
        steps=measure_step,
        n_runs=len(runs),
        mean_smax_frac=float(smax.mean()),
        std_smax_frac=float(smax.std()),
        mean_n_clusters=float(np.mean([r.n_clusters for r in runs])),
        mean_n_small_clusters=float(np.mean([r.n_small_clusters for r in runs])),
        mean_histogram=hist,
        boundary_sustain=sum(r.boundary_sustain_sum for r in runs) / b_n if b_n else math.nan,
        interior_sustain=sum(r.interior_sustain_sum for r in runs) / i_n if i_n else math.nan,
        runs=tuple(runs),
    )


@dataclass(frozen=True)
class TrendStep:
    start: float
    end: float
    delta_smax: float
    delta_clusters: float
    smax_non_increasing: bool
    clusters_non_decreasing: bool


@dataclass(frozen=True)
class TrendReport:
    varying: str | None
    steps: tuple[TrendStep, ...]

    @property
    def smax_non_increasing(self) -> bool:
        return all(s.smax_non_increasing for s in self.steps)

    @property
    def clusters_non_decreasing(self) -> bool:
        return all(s.clusters_non_decreasing for s in self.steps)

    @property
    def ok(self) -> bool:
        return self.smax_non_increasing and self.clusters_non_decreasing

    def violations(self) -> list[TrendStep]:
        return [s for s in self.steps if not (s.smax_non_increasing and s.clusters_non_decreasing)]


def trend_check(stats: list[EnsembleStats]) -> TrendReport:
    """Check the largest cluster shrinks and the cluster count grows along ``stats``.

    All points must share K, L and steps, and differ in at most one of alpha
    and temperature.
    """
    if len(stats) < 2:
        raise ParameterError("stats", "need at least two parameter points")
    if len({s.key for s in stats}) > 1:
        raise ParameterError("stats", "points differ in K, L or steps")
    alphas = {s.alpha for s in stats}
    temps = {s.temperature for s in stats}
    if len(alphas) > 1 and len(temps) > 1:
        raise ParameterError("stats", "points differ in both alpha and temperature")
    varying = "alpha" if len(alphas) > 1 else "temperature" if len(temps) > 1 else None
    attr = varying or "alpha"
    steps = []
    for a, b in zip(stats, stats[1:]):
        d_smax = b.mean_smax_frac - a.mean_smax_frac
        d_clusters = b.mean_n_clusters - a.mean_n_clusters
        steps.append(
            TrendStep(getattr(a, attr), getattr(b, attr), d_smax, d_clusters, d_smax <= 0, d_clusters >= 0)
        )
    return TrendReport(varying, tuple(steps))
