"""Coefficient systems for the process and the field, and representation changes.

Coefficient callables are batched: ``t`` has shape ``(K,)``, ``x`` has shape
``(K, n)``, a mark argument ``gamma`` has shape ``(K,)`` and ``args`` is a flat
float array of scenario parameters.  Output shapes, with ``K`` leading:

=========  ==========  ==============  ==============
name       value       gradient        Hessian
=========  ==========  ==============  ==============
a(t)       (n,)
b(t)       (n, m)
g(t, gam)  (n,)
F0(x)      ()          (n,)            (n, n)
Q(t, x)    ()          (n,)            (n, n)
D(t, x)    (m,)        (m, n)          (m, n, n)
G(t,x,gam) ()          (n,)            (n, n)
=========  ==========  ==============  ==============

``None`` for a, b, g, Q, D or G means the coefficient vanishes identically (its
derivatives then vanish too).  ``None`` for a derivative of a present
coefficient means "not supplied"; the field falls back to finite differences.
A derivative given as :data:`ZERO` is known to vanish, which lets the field
skip its triangular sum altogether.
"""

import dataclasses
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolationError, InvalidDimensionError, RepresentationWarning, ScenarioError
from .noise import IntensitySpec, integrate_mark
from ._backend import python_function

NONCENTERED = "non-centered"
CENTERED = "centered"

DERIVATIVE_TOL = 1e-5


def _call(fn, *a):
    # plain Python body: avoids a numba compile for one-off small evaluations
    return np.asarray(python_function(fn)(*a), dtype=float)


def _as_batch(t, x=None):
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if x is None:
        return np.ascontiguousarray(t)
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if len(t) == 1 and len(x) > 1:
        t = np.full(len(x), t[0])
    if len(x) == 1 and len(t) > 1:
        x = np.repeat(x, len(t), axis=0)
    return np.ascontiguousarray(t), np.ascontiguousarray(x)


def _finite(name, values, t, x=None):
    values = np.asarray(values)
    if np.all(np.isfinite(values)):
        return values
    k = int(np.flatnonzero(~np.isfinite(values.reshape(len(values), -1)).all(axis=1))[0])
    where = f"t={t[k]!r}" + ("" if x is None else f", x={x[k].tolist()!r}")
    raise ContractViolationError(f"coefficient {name} is not finite at {where}")


class _Zero:
    """Marker for an analytically vanishing coefficient."""

    def __repr__(self):
        return "ZERO"


ZERO = _Zero()


@dataclass(frozen=True, eq=False)
class ProcessCoefficients:
    """``dx = a(t) dt + b_k(t) dw_k + int g(t, gamma) nu(dt, dgamma)``.

    When ``centered`` is set the jump integral is against the compensated measure
    and ``a`` plays the role of the centered drift.  ``drift_shift`` counts how
    many copies of ``int g dPi`` a representation change has folded into the
    drift, so conversions never touch the user's callables.
    """

    n: int
    m: int
    a: object = None
    b: object = None
    g: object = None
    args: np.ndarray = field(default_factory=lambda: np.zeros(0))
    centered: bool = False
    intensity: IntensitySpec = None
    drift_shift: float = 0.0

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise InvalidDimensionError(f"need n >= 1 and m >= 1, got n={self.n}, m={self.m}")
        object.__setattr__(self, "args", np.ascontiguousarray(self.args, dtype=float))
        if (self.centered or self.drift_shift) and self.intensity is None:
            raise ScenarioError("centered or shifted drift needs an intensity measure")

    @property
    def representation(self):
        return CENTERED if self.centered else NONCENTERED

    def base_drift(self, t):
        t = _as_batch(t)
        if self.a is None:
            return np.zeros((len(t), self.n))
        return _finite("a", _call(self.a, t, self.args).reshape(len(t), self.n), t)

    def drift(self, t):
        """Drift coefficient of this representation at times ``t``, shape ``(K, n)``."""
        t = _as_batch(t)
        a = self.base_drift(t)
        if self.drift_shift:
            a = a + self.drift_shift * self.compensator(t)
        return a

    def diffusion(self, t):
        t = _as_batch(t)
        if self.b is None:
            return np.zeros((len(t), self.n, self.m))
        return _finite("b", _call(self.b, t, self.args).reshape(len(t), self.n, self.m), t)

    def jump(self, t, gamma):
        t = _as_batch(t)
        gamma = np.broadcast_to(np.asarray(gamma, dtype=float), t.shape).copy()
        if self.g is None:
            return np.zeros((len(t), self.n))
        return _finite("g", _call(self.g, t, gamma, self.args).reshape(len(t), self.n), t)

    def compensator(self, t):
        """``int g(t, gamma) Pi(dgamma)`` at each time, shape ``(K, n)``."""
        t = _as_batch(t)
        if self.g is None or self.intensity is None:
            return np.zeros((len(t), self.n))
        K = len(t)

        def h(nodes):
            tt = np.repeat(t, len(nodes))
            gg = np.tile(nodes, K)
            return self.jump(tt, gg).reshape(K, len(nodes), self.n).transpose(1, 0, 2)

        return integrate_mark(self.intensity, h)


_FIELD_DERIVATIVES = ("grad_F0", "hess_F0", "grad_Q", "hess_Q", "grad_D", "hess_D", "grad_G", "hess_G")


@dataclass(frozen=True, eq=False)
class FieldCoefficients:
    """``dF(t; x) = Q dt + D_k dw_k + int G(t; x; gamma) nu(dt, dgamma)``, ``F(0; x) = F0(x)``."""

    n: int
    m: int
    F0: object
    Q: object = None
    D: object = None
    G: object = None
    grad_F0: object = None
    hess_F0: object = None
    grad_Q: object = None
    hess_Q: object = None
    grad_D: object = None
    hess_D: object = None
    grad_G: object = None
    hess_G: object = None
    args: np.ndarray = field(default_factory=lambda: np.zeros(0))
    centered: bool = False
    intensity: IntensitySpec = None
    drift_shift: float = 0.0

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise InvalidDimensionError(f"need n >= 1 and m >= 1, got n={self.n}, m={self.m}")
        if self.F0 is None:
            raise ScenarioError("F0 is required")
        object.__setattr__(self, "args", np.ascontiguousarray(self.args, dtype=float))
        if (self.centered or self.drift_shift) and self.intensity is None:
            raise ScenarioError("centered or shifted drift needs an intensity measure")

    @property
    def representation(self):
        return CENTERED if self.centered else NONCENTERED

    @property
    def jump_drift_coefficient(self):
        """Net multiple of ``int G dPi`` in the non-centered drift of this field."""
        return self.drift_shift - (1.0 if self.centered else 0.0)

    def derivative(self, coef, order):
        """Analytic derivative callable, ``ZERO`` for a vanishing coefficient, or None."""
        if order == 0:
            return getattr(self, coef) if getattr(self, coef) is not None else ZERO
        if coef != "F0" and getattr(self, coef) is None:
            return ZERO
        return getattr(self, ("grad_", "hess_")[order - 1] + coef)

    def has_analytic(self, order):
        coefs = ["F0", "Q", "D"]
        if self.G is not None:
            coefs.append("G")
        return all(self.derivative(c, order) is not None for c in coefs)

    def initial(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return _finite("F0", _call(self.F0, x, self.args).reshape(len(x)), np.zeros(len(x)), x)

    def drift(self, t, x):
        """``Q`` of this representation at paired points, shape ``(K,)``."""
        t, x = _as_batch(t, x)
        q = self.base_drift(t, x)
        if self.drift_shift:
            q = q + self.drift_shift * self.compensator(t, x)
        return q

    def base_drift(self, t, x):
        t, x = _as_batch(t, x)
        if self.Q is None:
            return np.zeros(len(t))
        return _finite("Q", _call(self.Q, t, x, self.args).reshape(len(t)), t, x)

    def diffusion(self, t, x):
        t, x = _as_batch(t, x)
        if self.D is None:
            return np.zeros((len(t), self.m))
        return _finite("D", _call(self.D, t, x, self.args).reshape(len(t), self.m), t, x)

    def jump(self, t, x, gamma):
        t, x = _as_batch(t, x)
        gamma = np.broadcast_to(np.asarray(gamma, dtype=float), t.shape).copy()
        if self.G is None:
            return np.zeros(len(t))
        return _finite("G", _call(self.G, t, x, gamma, self.args).reshape(len(t)), t, x)

    def compensator(self, t, x):
        """``int G(t, x, gamma) Pi(dgamma)`` at paired points, shape ``(K,)``."""
        t, x = _as_batch(t, x)
        if self.G is None or self.intensity is None:
            return np.zeros(len(t))
        K = len(t)

        def h(nodes):
            tt = np.repeat(t, len(nodes))
            xx = np.repeat(x, len(nodes), axis=0)
            gg = np.tile(nodes, K)
            return self.jump(tt, xx, gg).reshape(K, len(nodes)).T

        return integrate_mark(self.intensity, h)

    def diffusion_gradient(self, t, x, h=None):
        """``dD_k/dx_i`` at paired points, shape ``(K, m, n)``; analytic when supplied."""
        t, x = _as_batch(t, x)
        K = len(t)
        if self.D is None:
            return np.zeros((K, self.m, self.n))
        if self.grad_D is ZERO:
            return np.zeros((K, self.m, self.n))
        if self.grad_D is not None:
            return _finite("grad_D", _call(self.grad_D, t, x, self.args).reshape(K, self.m, self.n), t, x)
        out = np.empty((K, self.m, self.n))
        for i in range(self.n):
            hi = np.maximum(1e-5, 1e-7 * np.abs(x[:, i])) if h is None else np.full(K, h)
            xp, xm = x.copy(), x.copy()
            xp[:, i] += hi
            xm[:, i] -= hi
            step = xp[:, i] - xm[:, i]
            out[:, :, i] = (self.diffusion(t, xp) - self.diffusion(t, xm)) / step[:, None]
        return out


@dataclass(frozen=True, eq=False)
class ScenarioSpec:
    name: str
    n: int
    m: int
    process: ProcessCoefficients
    field: FieldCoefficients
    intensity: IntensitySpec
    z: np.ndarray
    T: float = 1.0
    params: dict = field(default_factory=dict)
    exact: bool = False

    def __post_init__(self):
        z = np.array(self.z, dtype=float).reshape(-1)
        z.setflags(write=False)
        object.__setattr__(self, "z", z)
        if not (self.process.n == self.field.n == self.n == len(z)):
            raise InvalidDimensionError("state dimension mismatch between process, field and z")
        if not (self.process.m == self.field.m == self.m):
            raise InvalidDimensionError("Wiener dimension mismatch between process and field")
        if not (np.isfinite(self.T) and self.T > 0):
            raise ValueError(f"horizon must be positive, got {self.T}")

    @property
    def representation(self):
        reps = {self.process.representation, self.field.representation}
        return reps.pop() if len(reps) == 1 else "mixed"

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


def _convert(spec, to_centered):
    sign = 1.0 if to_centered else -1.0
    parts = {}
    for key in ("process", "field"):
        coef = getattr(spec, key)
        if coef.centered != to_centered:
            parts[key] = dataclasses.replace(
                coef,
                centered=to_centered,
                drift_shift=coef.drift_shift + sign,
                intensity=coef.intensity if coef.intensity is not None else spec.intensity,
            )
    if not parts:
        target = CENTERED if to_centered else NONCENTERED
        warnings.warn(f"scenario {spec.name!r} is already {target}; conversion is a no-op", RepresentationWarning, stacklevel=3)
        return spec
    return dataclasses.replace(spec, **parts)


def to_noncentered(spec):
    """Rewrite centered parts against the plain Poisson measure.

    ``a1(t) = a~(t) - int g(t, gamma) Pi(dgamma)`` and
    ``Q(t, x) = Q~(t, x) - int G(t, x, gamma) Pi(dgamma)``; b, g, D, G, F0 unchanged.
    """
    return _convert(spec, to_centered=False)


def to_centered(spec):
    """Inverse of :func:`to_noncentered`: add the compensator integrals back to the drifts."""
    return _convert(spec, to_centered=True)


@dataclass
class DerivativeCheck:
    status: str  # pass | fail | numeric-only | absent
    max_abs_error: float = float("nan")
    max_rel_error: float = float("nan")


@dataclass
class DerivativeReport:
    checks: dict

    @property
    def passed(self):
        return all(c.status != "fail" for c in self.checks.values())

    def __getitem__(self, name):
        return self.checks[name]


def _fd_gradient(f, x, h_rule):
    """Central differences of ``f(x) -> (K, *S)``; returns ``(K, *S, n)``."""
    K, n = x.shape
    cols = []
    for i in range(n):
        h = h_rule(x[:, i])
        xp, xm = x.copy(), x.copy()
        xp[:, i] += h
        xm[:, i] -= h
        step = (xp[:, i] - xm[:, i]).reshape((K,) + (1,) * (f(x).ndim - 1))
        cols.append((f(xp) - f(xm)) / step)
    return np.stack(cols, axis=-1)


def _fd_hessian(f, x, h_rule):
    """Second central differences of scalar-per-row ``f(x) -> (K, *S)``; returns ``(K, *S, n, n)``."""
    K, n = x.shape
    f0 = f(x)
    shape = f0.shape
    H = np.empty(shape + (n, n))
    hs = []
    for i in range(n):
        xp = x.copy()
        xp[:, i] += h_rule(x[:, i])
        hs.append(xp[:, i] - x[:, i])
    bc = (K,) + (1,) * (len(shape) - 1)
    for i in range(n):
        hi = hs[i].reshape(bc)
        xp, xm = x.copy(), x.copy()
        xp[:, i] += hs[i]
        xm[:, i] -= hs[i]
        H[..., i, i] = (f(xp) - 2.0 * f0 + f(xm)) / hi**2
        for j in range(i + 1, n):
            hj = hs[j].reshape(bc)
            pts = []
            for si, sj in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                xx = x.copy()
                xx[:, i] += si * hs[i]
                xx[:, j] += sj * hs[j]
                pts.append(f(xx))
            H[..., i, j] = H[..., j, i] = (pts[0] - pts[1] - pts[2] + pts[3]) / (4.0 * hi * hj)
    return H


def h_grad(x):
    return np.maximum(1e-5, 1e-7 * np.abs(x))


def h_hess(x):
    return np.maximum(1e-4, 1e-6 * np.abs(x))


def validate_derivatives(fc, probes, marks=None, tol=DERIVATIVE_TOL):
    """Compare every supplied analytic derivative with central differences.

    ``probes`` is a sequence of ``(t, x)`` pairs.  G is probed at ``marks``
    (default: the intensity's quadrature nodes, or 1.0).  A check passes when
    the discrepancy relative to ``max(1, |analytic|)`` is below ``tol``.
    """
    probes = list(probes)
    if not probes:
        raise ValueError("validate_derivatives needs at least one probe")
    t = np.array([float(p[0]) for p in probes])
    x = np.array([np.atleast_1d(np.asarray(p[1], dtype=float)) for p in probes]).reshape(len(probes), fc.n)
    if marks is None:
        marks = fc.intensity.quadrature[0] if fc.intensity is not None else np.ones(1)
    marks = np.asarray(marks, dtype=float)
    # G probes cover every (probe, mark) pair
    tg, xg = np.repeat(t, len(marks)), np.repeat(x, len(marks), axis=0)
    gg = np.tile(marks, len(t))

    values = {
        "F0": (lambda xx: fc.initial(xx), x),
        "Q": (lambda xx: fc.base_drift(t, xx), x),
        "D": (lambda xx: fc.diffusion(t, xx), x),
        "G": (lambda xx: fc.jump(tg, xx, gg), xg),
    }
    checks = {}
    for coef, (f, xx) in values.items():
        for order, prefix in ((1, "grad_"), (2, "hess_")):
            name = prefix + coef
            if coef != "F0" and getattr(fc, coef) is None:
                checks[name] = DerivativeCheck("absent")
                continue
            deriv = getattr(fc, name)
            fd = (_fd_gradient if order == 1 else _fd_hessian)(f, xx, h_grad if order == 1 else h_hess)
            fd = _finite(f"finite-difference {name}", fd, t)
            if deriv is None:
                checks[name] = DerivativeCheck("numeric-only")
                continue
            if deriv is ZERO:
                exact = np.zeros(fd.shape)
            elif coef == "F0":
                exact = _call(deriv, xx, fc.args)
            elif coef == "G":
                exact = _call(deriv, tg, xx, gg, fc.args)
            else:
                exact = _call(deriv, t, xx, fc.args)
            exact = _finite(name, exact.reshape(fd.shape), t)
            err = np.abs(exact - fd)
            rel = err / np.maximum(1.0, np.abs(exact))
            checks[name] = DerivativeCheck(
                "pass" if rel.max() < tol else "fail", float(err.max()), float(rel.max())
            )
    return DerivativeReport(checks)
