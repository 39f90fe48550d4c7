"""Precomputed interaction kernel and whole-lattice impact accumulation.

All engines compute the same quantity: for a source matrix ``src`` of shape
``(N, 2K)`` they return ``acc[i] = sum_j src[j] / g(d_ij)``. Work is split
into fixed row tiles (or fixed per-field jobs), so the number of worker
threads changes scheduling only, never the arithmetic.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .geometry import DEFAULT_SCALING, offset_distances, scaling

ENGINES = ("naive", "kernel", "fft")
TILE_ROWS = 128
# above this many agents the dense N x N gather is replaced by shift-and-add
DENSE_MAX_AGENTS = 6400


class KernelMismatchError(ValueError):
    """Kernel was built for a different lattice size, exponent or scaling form."""


@dataclass(frozen=True, eq=False)
class InteractionKernel:
    """``1/g(d)`` for every offset; ``inverse_scaling[dr + L-1, dc + L-1]``."""

    inverse_scaling: np.ndarray
    alpha: float
    L: int
    scaling: str = DEFAULT_SCALING

    def at(self, dr: int, dc: int) -> float:
        return float(self.inverse_scaling[dr + self.L - 1, dc + self.L - 1])

    def check(self, params) -> None:
        if (params.L, float(params.alpha), params.scaling) != (self.L, float(self.alpha), self.scaling):
            raise KernelMismatchError(
                f"kernel built for L={self.L}, alpha={self.alpha}, scaling={self.scaling!r}; "
                f"configuration has L={params.L}, alpha={params.alpha}, scaling={params.scaling!r}"
            )


def build_kernel(L: int, alpha: float, form: str = DEFAULT_SCALING) -> InteractionKernel:
    if L < 1 or alpha < 0:
        raise ValueError(f"need L >= 1 and alpha >= 0, got L={L}, alpha={alpha}")
    table = 1.0 / scaling(offset_distances(L), alpha, form)
    table.setflags(write=False)
    return InteractionKernel(table, float(alpha), int(L), form)


def _tiles(n: int):
    return [(a, min(a + TILE_ROWS, n)) for a in range(0, n, TILE_ROWS)]


def _map(fn, jobs, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(job) for job in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


class _Engine:
    name = ""

    def __init__(self, L: int, alpha: float, form: str):
        self.L = L
        self.alpha = float(alpha)
        self.scaling = form
        idx = np.arange(L * L)
        self.rows, self.cols = np.divmod(idx, L)

    def check(self, params) -> None:
        if (params.L, float(params.alpha), params.scaling) != (self.L, self.alpha, self.scaling):
            raise KernelMismatchError(
                f"{self.name} engine built for L={self.L}, alpha={self.alpha}, scaling={self.scaling!r}"
            )

    def accumulate(self, src: np.ndarray, workers: int = 1) -> np.ndarray:
        raise NotImplementedError

    def accumulate_row(self, src: np.ndarray, i: int) -> np.ndarray:
        raise NotImplementedError


class NaiveEngine(_Engine):
    """Reference path: evaluates ``g`` for every (target, source) pair on each call."""

    name = "naive"

    def _weights(self, a: int, b: int) -> np.ndarray:
        d = np.hypot(
            (self.rows[a:b, None] - self.rows[None, :]).astype(float),
            (self.cols[a:b, None] - self.cols[None, :]).astype(float),
        )
        return 1.0 / scaling(d, self.alpha, self.scaling)

    def accumulate(self, src, workers=1):
        out = np.empty_like(src)

        def job(t):
            a, b = t
            out[a:b] = self._weights(a, b) @ src

        _map(job, _tiles(src.shape[0]), workers)
        return out

    def accumulate_row(self, src, i):
        return self._weights(i, i + 1)[0] @ src


class KernelEngine(_Engine):
    """Direct path: weights come from the precomputed offset table."""

    name = "kernel"

    def __init__(self, kernel: InteractionKernel):
        super().__init__(kernel.L, kernel.alpha, kernel.scaling)
        self.kernel = kernel
        self._dense = None

    def _row_weights(self, a: int, b: int) -> np.ndarray:
        L = self.L
        dr = self.rows[a:b, None] - self.rows[None, :] + (L - 1)
        dc = self.cols[a:b, None] - self.cols[None, :] + (L - 1)
        return self.kernel.inverse_scaling[dr, dc]

    @property
    def dense(self) -> np.ndarray:
        if self._dense is None:
            self._dense = self._row_weights(0, self.L * self.L)
        return self._dense

    def accumulate(self, src, workers=1):
        if src.shape[0] > DENSE_MAX_AGENTS:
            return self._shift_add(src, workers)
        w = self.dense
        out = np.empty_like(src)

        def job(t):
            a, b = t
            out[a:b] = w[a:b] @ src

        _map(job, _tiles(src.shape[0]), workers)
        return out

    def _shift_add(self, src, workers):
        L = self.L
        table = self.kernel.inverse_scaling
        fields = src.T.reshape(-1, L, L)

        def job(f):
            grid = fields[f]
            acc = np.zeros((L, L))
            for dr in range(-(L - 1), L):
                r0, r1 = max(0, dr), min(L, L + dr)
                for dc in range(-(L - 1), L):
                    c0, c1 = max(0, dc), min(L, L + dc)
                    acc[r0:r1, c0:c1] += table[dr + L - 1, dc + L - 1] * grid[r0 - dr : r1 - dr, c0 - dc : c1 - dc]
            return acc.ravel()

        return np.stack(_map(job, list(range(fields.shape[0])), workers), axis=1)

    def accumulate_row(self, src, i):
        if self._dense is not None:
            return self._dense[i] @ src
        return self._row_weights(i, i + 1)[0] @ src


class FFTEngine(KernelEngine):
    """Frequency-domain accumulation of the same offset table."""

    name = "fft"

    def __init__(self, kernel: InteractionKernel):
        super().__init__(kernel)
        self.size = (2 * kernel.L - 1,) * 2
        self._spectrum = np.fft.rfft2(kernel.inverse_scaling, self.size)

    def accumulate(self, src, workers=1):
        L = self.L
        fields = src.T.reshape(-1, L, L)

        def job(f):
            conv = np.fft.irfft2(np.fft.rfft2(fields[f], self.size) * self._spectrum, self.size)
            return conv[L - 1 : 2 * L - 1, L - 1 : 2 * L - 1].ravel()

        return np.stack(_map(job, list(range(fields.shape[0])), workers), axis=1)


def make_engine(name: str, kernel: InteractionKernel) -> _Engine:
    if name == "naive":
        return NaiveEngine(kernel.L, kernel.alpha, kernel.scaling)
    if name == "kernel":
        return KernelEngine(kernel)
    if name == "fft":
        return FFTEngine(kernel)
    raise ValueError(f"unknown engine {name!r}; expected one of {ENGINES}")


def impact_field(config, kernel: InteractionKernel, method: str = "kernel", workers: int = 1) -> np.ndarray:
    """Impact vectors of every agent, shape ``(N, K)``, via the kernel table.

    ``method`` is ``"kernel"`` (direct accumulation) or ``"fft"``.
    """
    from .core import combine, source_fields

    params = config.params
    kernel.check(params)
    if method not in ("kernel", "fft"):
        raise ValueError(f"method must be 'kernel' or 'fft', got {method!r}")
    eng = make_engine(method, kernel)
    src = source_fields(config.opinions, config.persuasion, config.support, params.K)
    return combine(eng.accumulate(src, workers=workers), config.opinions, config.support, params)
