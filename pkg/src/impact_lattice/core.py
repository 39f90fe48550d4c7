"""Lattice state, social impact and the temperature-driven update rule.

Impact of opinion ``k`` on agent ``i``:

    I[i, k] = c * sum_{j : op[j] == k} w_j / g(d_ij)

with ``w_j = s_j`` when ``k`` is agent ``i``'s own opinion (support, the
agent itself included at distance 0) and ``w_j = p_j`` otherwise
(persuasion). ``c`` is ``ModelParams.impact_scale``. The next opinion is
drawn from ``softmax(I[i] / T)``; at ``T == 0`` the maximal-impact opinion is
adopted, ties broken uniformly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from functools import lru_cache

import numpy as np

from . import rng
from .geometry import DEFAULT_SCALING, SCALING_FORMS, coords, distance, scaling
from .kernel import ENGINES, build_kernel, make_engine

__all__ = [
    "Agent",
    "Configuration",
    "ModelParams",
    "ParameterError",
    "RunResult",
    "distance",
    "impact",
    "impact_matrix",
    "init_configuration",
    "opinion_probabilities",
    "run",
    "sample_opinions",
    "scaling",
    "step",
]

UPDATE_SCHEMES = ("sync", "async")
DEFAULT_IMPACT_SCALE = 4.0


class ParameterError(ValueError):
    """A model or job parameter lies outside its domain."""

    def __init__(self, name: str, message: str):
        super().__init__(f"{name}: {message}")
        self.name = name


@dataclass(frozen=True)
class ModelParams:
    L: int = 41
    K: int = 2
    alpha: float = 3.0
    temperature: float = 1.0
    steps: int = 100
    seed: int = 0
    scaling: str = DEFAULT_SCALING
    update: str = "sync"
    self_support: bool = True
    impact_scale: float = DEFAULT_IMPACT_SCALE

    def __post_init__(self):
        for name in ("L", "K", "steps", "seed"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise ParameterError(name, f"must be an integer, got {value!r}")
        if self.L < 1:
            raise ParameterError("L", f"must be >= 1, got {self.L}")
        if self.K < 1:
            raise ParameterError("K", f"must be >= 1, got {self.K}")
        if self.steps < 0:
            raise ParameterError("steps", f"must be >= 0, got {self.steps}")
        if not 0 <= self.seed < 2**64:
            raise ParameterError("seed", f"must lie in [0, 2**64), got {self.seed}")
        for name in ("alpha", "temperature", "impact_scale"):
            value = getattr(self, name)
            if not isinstance(value, (int, float, np.floating, np.integer)) or isinstance(value, bool):
                raise ParameterError(name, f"must be a number, got {value!r}")
            if not math.isfinite(value) or value < 0:
                raise ParameterError(name, f"must be finite and >= 0, got {value}")
        if self.scaling not in SCALING_FORMS:
            raise ParameterError("scaling", f"must be one of {SCALING_FORMS}, got {self.scaling!r}")
        if self.update not in UPDATE_SCHEMES:
            raise ParameterError("update", f"must be one of {UPDATE_SCHEMES}, got {self.update!r}")

    @property
    def N(self) -> int:
        return self.L * self.L

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def replace(self, **changes) -> "ModelParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class Agent:
    opinion: int
    persuasion: float
    support: float


def _frozen(a, dtype) -> np.ndarray:
    out = np.array(a, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class Configuration:
    """Immutable lattice state; agent arrays are row-major, length ``L*L``."""

    params: ModelParams
    opinions: np.ndarray
    persuasion: np.ndarray
    support: np.ndarray
    step_index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "opinions", _frozen(self.opinions, np.int64))
        object.__setattr__(self, "persuasion", _frozen(self.persuasion, np.float64))
        object.__setattr__(self, "support", _frozen(self.support, np.float64))
        n = self.params.N
        for name in ("opinions", "persuasion", "support"):
            if getattr(self, name).shape != (n,):
                raise ParameterError(name, f"expected shape ({n},), got {getattr(self, name).shape}")
        if n and (self.opinions.min() < 0 or self.opinions.max() >= self.params.K):
            raise ParameterError("opinions", f"opinion indices must lie in [0, {self.params.K})")
        for name in ("persuasion", "support"):
            a = getattr(self, name)
            if n and not (np.all(a >= 0.0) and np.all(a <= 1.0)):
                raise ParameterError(name, "strengths must lie in [0, 1]")

    @property
    def L(self) -> int:
        return self.params.L

    @property
    def agents(self) -> list[Agent]:
        return [
            Agent(int(o), float(p), float(s))
            for o, p, s in zip(self.opinions, self.persuasion, self.support)
        ]

    def grid(self) -> np.ndarray:
        """Opinions as an ``L x L`` array."""
        return self.opinions.reshape(self.L, self.L)

    def evolve(self, opinions, step_index: int) -> "Configuration":
        return Configuration(self.params, opinions, self.persuasion, self.support, step_index)

    def __eq__(self, other):
        if not isinstance(other, Configuration):
            return NotImplemented
        return (
            self.params == other.params
            and self.step_index == other.step_index
            and np.array_equal(self.opinions, other.opinions)
            and np.array_equal(self.persuasion, other.persuasion)
            and np.array_equal(self.support, other.support)
        )

    __hash__ = None


def init_configuration(params: ModelParams) -> Configuration:
    """Random initial state: opinions uniform on ``{0..K-1}``, p and s uniform on [0, 1].

    Draw order from the init stream: all opinions, then all persuasions,
    then all supports.
    """
    if not isinstance(params, ModelParams):
        raise ParameterError("params", "expected a ModelParams instance")
    gen = rng.stream(params.seed, 0, rng.PURPOSE_INIT)
    opinions = gen.integers(0, params.K, params.N)
    persuasion = gen.random(params.N)
    support = gen.random(params.N)
    return Configuration(params, opinions, persuasion, support, 0)


def impact(config: Configuration, i: int) -> np.ndarray:
    """Impact vector of length K on agent ``i``, summed directly over all sources."""
    params = config.params
    ri, ci = coords(i, params.L)
    rows, cols = np.divmod(np.arange(params.N), params.L)
    d = np.hypot(rows - ri, cols - ci)
    inv = 1.0 / scaling(d, params.alpha, params.scaling)
    own = config.opinions[i]
    weights = np.where(config.opinions == own, config.support, config.persuasion) * inv
    if not params.self_support:
        weights[i] = 0.0
    return params.impact_scale * np.bincount(config.opinions, weights=weights, minlength=params.K)


def source_fields(opinions, persuasion, support, K: int) -> np.ndarray:
    """Per-source weights, shape ``(N, 2K)``.

    Column ``k`` holds ``s_j`` for sources with opinion ``k``; column ``K + k``
    holds ``p_j`` for the same sources.
    """
    n = opinions.shape[0]
    src = np.zeros((n, 2 * K))
    idx = np.arange(n)
    src[idx, opinions] = support
    src[idx, K + opinions] = persuasion
    return src


def combine(acc: np.ndarray, opinions, support, params: ModelParams) -> np.ndarray:
    """Select support or persuasion sums per target; ``acc`` has shape ``(N, 2K)``."""
    K = params.K
    own = opinions[:, None] == np.arange(K)[None, :]
    out = np.where(own, acc[:, :K], acc[:, K:])
    if not params.self_support:
        out[np.arange(opinions.shape[0]), opinions] -= support
    return params.impact_scale * out


def impact_matrix(config: Configuration, engine="kernel", workers: int = 1) -> np.ndarray:
    """Impact vectors of every agent, shape ``(N, K)``."""
    params = config.params
    eng = _engine(engine, params)
    src = source_fields(config.opinions, config.persuasion, config.support, params.K)
    acc = eng.accumulate(src, workers=workers)
    return combine(acc, config.opinions, config.support, params)


def opinion_probabilities(impacts, temperature: float) -> np.ndarray:
    """Choice probabilities over the last axis of ``impacts``.

    Boltzmann weights ``exp(I_k / T)`` for ``T > 0``; uniform over the
    maximizers at ``T == 0``.
    """
    impacts = np.asarray(impacts, dtype=float)
    top = impacts.max(axis=-1, keepdims=True)
    if temperature == 0:
        w = (impacts == top).astype(float)
    else:
        w = np.exp((impacts - top) / temperature)
    return w / w.sum(axis=-1, keepdims=True)


def sample_opinions(probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF draw: smallest ``k`` with ``u < cdf[k]``."""
    cdf = np.cumsum(probs, axis=-1)
    k = (cdf <= u[..., None]).sum(axis=-1)
    return np.minimum(k, probs.shape[-1] - 1)


@lru_cache(maxsize=16)
def _cached_engine(name: str, L: int, alpha: float, form: str):
    return make_engine(name, build_kernel(L, alpha, form))


def _engine(engine, params: ModelParams):
    if isinstance(engine, str):
        if engine not in ENGINES:
            raise ParameterError("engine", f"must be one of {ENGINES}, got {engine!r}")
        return _cached_engine(engine, params.L, float(params.alpha), params.scaling)
    engine.check(params)
    return engine


def _sync_update(config: Configuration, eng, workers: int) -> tuple[np.ndarray, bool]:
    params = config.params
    src = source_fields(config.opinions, config.persuasion, config.support, params.K)
    acc = eng.accumulate(src, workers=workers)
    impacts = combine(acc, config.opinions, config.support, params)
    probs = opinion_probabilities(impacts, params.temperature)
    u = rng.uniforms(params.seed, config.step_index, params.N)
    tied = params.temperature == 0 and bool(np.any((probs > 0).sum(axis=1) > 1))
    return sample_opinions(probs, u), tied


def _async_update(config: Configuration, eng) -> np.ndarray:
    params = config.params
    K = params.K
    opinions = np.array(config.opinions)
    src = source_fields(opinions, config.persuasion, config.support, K)
    u = rng.uniforms(params.seed, config.step_index, params.N)
    order = np.argsort(rng.uniforms(params.seed, config.step_index, params.N, rng.PURPOSE_ORDER), kind="stable")
    for i in order:
        row = eng.accumulate_row(src, i)
        own = opinions[i]
        vec = row[K:].copy()
        vec[own] = row[own] - (0.0 if params.self_support else config.support[i])
        probs = opinion_probabilities(params.impact_scale * vec, params.temperature)
        new = int(sample_opinions(probs, u[i : i + 1])[0])
        if new != own:
            src[i, own] = src[i, K + own] = 0.0
            src[i, new] = config.support[i]
            src[i, K + new] = config.persuasion[i]
            opinions[i] = new
    return opinions


def step(config: Configuration, engine="kernel", workers: int = 1) -> Configuration:
    """Advance one time step under ``config.params.update``.

    ``sync``: every agent resamples against the previous configuration.
    ``async``: agents resample one at a time in a per-step random order,
    each seeing earlier changes.
    """
    eng = _engine(engine, config.params)
    if config.params.update == "async":
        new = _async_update(config, eng)
    else:
        new, _ = _sync_update(config, eng, workers)
    return config.evolve(new, config.step_index + 1)


@dataclass
class RunResult:
    final: Configuration
    snapshots: dict[int, Configuration] = field(default_factory=dict)


def run(
    params: ModelParams,
    snapshot_schedule=(),
    engine="kernel",
    workers: int = 1,
    steps: int | None = None,
) -> RunResult:
    """Evolve a fresh configuration for ``params.steps`` steps (or ``steps``).

    Snapshots are taken at the scheduled step indices, 0 being the initial
    state. A zero-temperature synchronous run that reaches a tie-free fixed
    point is fast-forwarded, which leaves the trajectory unchanged.
    """
    total = params.steps if steps is None else steps
    if total < 0 or total > params.steps:
        raise ParameterError("steps", f"must lie in [0, {params.steps}], got {total}")
    schedule = sorted(set(int(s) for s in snapshot_schedule))
    for s in schedule:
        if not 0 <= s <= total:
            raise ParameterError("snapshots", f"step {s} outside [0, {total}]")
    eng = _engine(engine, params)
    config = init_configuration(params)
    snapshots = {}
    pending = iter(schedule)
    nxt = next(pending, None)
    while True:
        while nxt is not None and nxt == config.step_index:
            snapshots[nxt] = config
            nxt = next(pending, None)
        if config.step_index >= total:
            break
        if params.update == "async":
            config = config.evolve(_async_update(config, eng), config.step_index + 1)
            continue
        new, tied = _sync_update(config, eng, workers)
        frozen = params.temperature == 0 and not tied and np.array_equal(new, config.opinions)
        config = config.evolve(new, config.step_index + 1)
        if frozen:
            while nxt is not None:
                snapshots[nxt] = config.evolve(config.opinions, nxt)
                nxt = next(pending, None)
            config = config.evolve(config.opinions, total)
    return RunResult(config, snapshots)
