"""Shared stochastic drivers: Wiener increments and marked Poisson streams.

All samplers are pure functions of ``(seed, structural arguments)``.  Each sampler
draws from its own substream of the master seed, so the Wiener path, the jump
stream and every refinement level of one path are independent yet reproducible.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import IntegrabilityError, InvalidDimensionError

# substream keys under one master seed
STREAM_WIENER = 0
STREAM_JUMPS = 1
STREAM_REFINE = 2

GAUSS_LEGENDRE_NODES = 16


def substream(seed, *key):
    """Generator for substream ``key`` of master ``seed``."""
    seed = int(seed)
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key)))


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_j = j T / N`` on ``[0, T]``."""

    T: float
    N: int

    def __post_init__(self):
        if not (np.isfinite(self.T) and self.T > 0):
            raise ValueError(f"horizon must be positive and finite, got {self.T}")
        if int(self.N) != self.N or self.N < 1:
            raise InvalidDimensionError(f"number of steps must be a positive integer, got {self.N}")
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "N", int(self.N))

    @property
    def dt(self):
        return self.T / self.N

    @cached_property
    def nodes(self):
        # j / N is exactly 1 at j = N, so t_N == T
        return _frozen(self.T * (np.arange(self.N + 1) / self.N))

    def refined(self, factor):
        return TimeGrid(self.T, self.N * factor)

    def locate(self, times):
        """Step index ``j`` with ``t_j < tau <= t_{j+1}`` and the fraction ``(tau - t_j) / dt``."""
        times = np.asarray(times, dtype=float)
        steps = np.searchsorted(self.nodes, times, side="left") - 1
        steps = np.clip(steps, 0, self.N - 1)
        fracs = (times - self.nodes[steps]) / self.dt
        return steps, fracs


@dataclass(frozen=True, eq=False)
class WienerPath:
    grid: TimeGrid
    m: int
    increments: np.ndarray  # (N, m)

    def __post_init__(self):
        inc = _frozen(self.increments)
        if inc.shape != (self.grid.N, self.m):
            raise InvalidDimensionError(f"increments shape {inc.shape} != {(self.grid.N, self.m)}")
        object.__setattr__(self, "increments", inc)

    @cached_property
    def values(self):
        """W(t_j), shape ``(N + 1, m)``; row 0 is the empty sum."""
        w = np.zeros((self.grid.N + 1, self.m))
        np.cumsum(self.increments, axis=0, out=w[1:])
        w.setflags(write=False)
        return w


@dataclass(frozen=True, eq=False)
class MarkedJumpStream:
    """Realization of the Poisson random measure: sorted event times with marks."""

    times: np.ndarray
    marks: np.ndarray
    T: float

    def __post_init__(self):
        times, marks = _frozen(self.times).ravel(), _frozen(self.marks).ravel()
        if times.shape != marks.shape:
            raise ValueError("times and marks must have equal length")
        if len(times) and (times[0] <= 0 or times[-1] > self.T or np.any(np.diff(times) <= 0)):
            raise ValueError("event times must be strictly increasing in (0, T]")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "marks", marks)
        object.__setattr__(self, "T", float(self.T))

    def __len__(self):
        return len(self.times)

    @classmethod
    def empty(cls, T):
        return cls(np.empty(0), np.empty(0), T)

    @property
    def events(self):
        return list(zip(self.times.tolist(), self.marks.tolist()))


@dataclass(frozen=True, eq=False)
class IntensitySpec:
    """Finite intensity measure ``Pi(dgamma) = rate * mu(dgamma)``.

    ``mu`` is one of three families, each with an exact (or polynomially exact)
    integration rule: ``point`` (a single mark), ``uniform`` on ``[low, high]``
    (Gauss-Legendre, 16 nodes) and ``discrete`` (finite support with weights).
    Use the constructors rather than building instances directly.
    """

    rate: float
    family: str
    support: tuple
    probs: tuple = field(default=())

    def __post_init__(self):
        if not (np.isfinite(self.rate) and self.rate >= 0):
            raise ValueError(f"total rate must be finite and non-negative, got {self.rate}")
        if self.family == "uniform":
            lo, hi = self.support
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise ValueError(f"uniform marks need finite low < high, got {self.support}")
        elif self.family == "discrete":
            p = np.asarray(self.probs, dtype=float)
            if len(p) != len(self.support) or len(p) == 0 or np.any(p < 0):
                raise ValueError("discrete marks need one non-negative weight per value")
            if abs(p.sum() - 1.0) > 1e-12:
                raise ValueError(f"discrete mark weights must sum to 1, got {p.sum()}")
        elif self.family != "point":
            raise ValueError(f"unknown mark family {self.family!r}")

    @classmethod
    def point_mass(cls, rate, value=1.0):
        return cls(float(rate), "point", (float(value),))

    @classmethod
    def uniform(cls, rate, low, high):
        return cls(float(rate), "uniform", (float(low), float(high)))

    @classmethod
    def discrete(cls, rate, values, probs):
        return cls(float(rate), "discrete", tuple(map(float, values)), tuple(map(float, probs)))

    @cached_property
    def quadrature(self):
        """Nodes and weights with ``sum(weights * h(nodes)) == integral of h dPi``."""
        if self.family == "point":
            nodes, w = np.array(self.support), np.ones(1)
        elif self.family == "uniform":
            lo, hi = self.support
            x, w = np.polynomial.legendre.leggauss(GAUSS_LEGENDRE_NODES)
            nodes = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
            w = 0.5 * w
        else:
            nodes, w = np.array(self.support), np.array(self.probs)
        return _frozen(nodes), _frozen(self.rate * w)

    def sample_marks(self, rng, k):
        if self.family == "point":
            return np.full(k, self.support[0])
        if self.family == "uniform":
            return rng.uniform(*self.support, size=k)
        return rng.choice(np.array(self.support), size=k, p=np.array(self.probs))

    def in_support(self, marks):
        marks = np.asarray(marks, dtype=float)
        if self.family == "uniform":
            lo, hi = self.support
            return (marks >= lo) & (marks <= hi)
        return np.isin(marks, np.array(self.support))


def sample_wiener(grid, m, seed):
    """Independent N(0, dt) increments, shape ``(N, m)``."""
    if int(m) != m or m < 1:
        raise InvalidDimensionError(f"Wiener dimension must be a positive integer, got {m}")
    rng = substream(seed, STREAM_WIENER)
    inc = rng.standard_normal((grid.N, int(m))) * np.sqrt(grid.dt)
    return WienerPath(grid, int(m), inc)


def sample_jumps(intensity, T, seed):
    """Compound-Poisson realization of the random measure on ``(0, T]``."""
    if not (np.isfinite(T) and T > 0):
        raise ValueError(f"horizon must be positive, got {T}")
    rng = substream(seed, STREAM_JUMPS)
    k = rng.poisson(intensity.rate * T)
    # 1 - U lies in (0, 1]
    times = np.sort(T * (1.0 - rng.random(k)))
    dup = np.flatnonzero(np.diff(times) <= 0)
    while dup.size:
        # redraw the later member of each tie
        times[dup + 1] = T * (1.0 - rng.random(dup.size))
        times.sort()
        dup = np.flatnonzero(np.diff(times) <= 0)
    marks = intensity.sample_marks(rng, k)
    return MarkedJumpStream(times, marks, T)


def integrate_mark(intensity, h):
    """``integral h(gamma) Pi(dgamma)`` using the family's quadrature rule.

    ``h`` receives the array of quadrature nodes and may return a scalar, an
    array of node values, or an array with the node axis first.
    """
    nodes, weights = intensity.quadrature
    vals = np.asarray(h(nodes), dtype=float)
    if vals.ndim == 0:
        vals = np.full(len(nodes), float(vals))
    if not np.all(np.isfinite(vals)):
        bad = nodes[~np.isfinite(vals.reshape(len(nodes), -1)).all(axis=1)]
        raise IntegrabilityError(f"mark integrand is not finite at gamma = {bad.tolist()}")
    return np.tensordot(weights, vals, axes=1)


def refine(path, factor, seed):
    """Brownian-bridge fill-in on a grid ``factor`` times finer.

    Fine increments within each coarse step are drawn from their law conditional
    on the coarse increment, so block sums reproduce the original increments.
    """
    if int(factor) != factor or factor < 2:
        raise ValueError(f"refinement factor must be an integer >= 2, got {factor}")
    factor = int(factor)
    fine = path.grid.refined(factor)
    rng = substream(seed, STREAM_REFINE, path.grid.N, factor)
    N, m = path.increments.shape
    z = rng.standard_normal((N, factor, m)) * np.sqrt(fine.dt)
    inc = z - z.mean(axis=1, keepdims=True) + path.increments[:, None, :] / factor
    # absorb the rounding so block sums match to the last bit
    inc[:, -1, :] = path.increments - inc[:, :-1, :].sum(axis=1)
    return WienerPath(fine, m, inc.reshape(N * factor, m))
