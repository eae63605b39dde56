"""Built-in scenarios with closed-form coefficients and derivatives.

Coefficient bodies are written so numba can compile them; parameters travel in
the ``args`` vector so one compiled function serves every parameter set.
"""

import dataclasses
from dataclasses import dataclass

import numpy as np

from ._backend import coefficient
from .errors import ScenarioError
from .noise import IntensitySpec
from .scenario import (
    FieldCoefficients,
    ProcessCoefficients,
    ZERO,
    ScenarioSpec,
    validate_derivatives,
)

# -- shared pieces -----------------------------------------------------------


@coefficient
def _const_drift_1d(t, p):
    # args[2] is the drift in every 1-d scenario that has one
    return np.full((t.shape[0], 1), p[2])


@coefficient
def _const_diffusion_1d(t, p):
    return np.full((t.shape[0], 1, 1), p[3])


@coefficient
def _jump_identity_1d(t, gam, p):
    out = np.empty((t.shape[0], 1))
    out[:, 0] = gam
    return out


@coefficient
def _identity_1d(x, p):
    return x[:, 0].copy()


@coefficient
def _ones_1d(x, p):
    return np.ones((x.shape[0], 1))


# -- affine-exact: F(t, x) = c x + psi t (+ delta w) ---------------------------
# args = [c, psi, a, b, lambda, delta]


@coefficient
def _affine_F0(x, p):
    return p[0] * x[:, 0]


@coefficient
def _affine_grad_F0(x, p):
    return np.full((x.shape[0], 1), p[0])


@coefficient
def _affine_Q(t, x, p):
    return np.full(t.shape[0], p[1])


@coefficient
def _affine_D(t, x, p):
    return np.full((t.shape[0], 1), p[5])


def _affine_exact(p):
    c, psi, a, b, lam, delta = (p[k] for k in ("c", "psi", "a", "b", "lambda", "delta"))
    args = np.array([c, psi, a, b, lam, delta])
    pi = IntensitySpec.uniform(lam, -1.0, 1.0)
    proc = ProcessCoefficients(1, 1, _const_drift_1d, _const_diffusion_1d, _jump_identity_1d, args, intensity=pi)
    has_d = delta != 0.0
    fld = FieldCoefficients(
        1, 1, _affine_F0,
        Q=_affine_Q,
        D=_affine_D if has_d else None,
        grad_F0=_affine_grad_F0, hess_F0=ZERO,
        grad_Q=ZERO, hess_Q=ZERO, grad_D=ZERO, hess_D=ZERO,
        args=args, intensity=pi,
    )
    return proc, fld, pi


# -- ito-quadratic: static F(x) = x^2 ------------------------------------------
# args = [unused, unused, a, b, g, lambda]


@coefficient
def _quad_jump(t, gam, p):
    out = np.empty((t.shape[0], 1))
    out[:, 0] = p[4] * gam
    return out


@coefficient
def _quad_F0(x, p):
    return x[:, 0] * x[:, 0]


@coefficient
def _quad_grad_F0(x, p):
    return 2.0 * x[:, :1]


@coefficient
def _quad_hess_F0(x, p):
    return np.full((x.shape[0], 1, 1), 2.0)


def _ito_quadratic(p):
    args = np.array([0.0, 0.0, p["a"], p["b"], p["g"], p["lambda"]])
    pi = IntensitySpec.point_mass(p["lambda"], 1.0)
    proc = ProcessCoefficients(1, 1, _const_drift_1d, _const_diffusion_1d, _quad_jump, args, intensity=pi)
    fld = FieldCoefficients(
        1, 1, _quad_F0, grad_F0=_quad_grad_F0, hess_F0=_quad_hess_F0, args=args, intensity=pi
    )
    return proc, fld, pi


# -- product-rule: F(t, x) = phi(t) x, d phi = alpha dt + beta dw_1, phi(0) = 1 --
# args = [alpha, beta, a, b, lambda]


@coefficient
def _prod_Q(t, x, p):
    return p[0] * x[:, 0]


@coefficient
def _prod_grad_Q(t, x, p):
    return np.full((t.shape[0], 1), p[0])


@coefficient
def _prod_D(t, x, p):
    return p[1] * x[:, :1]


@coefficient
def _prod_grad_D(t, x, p):
    return np.full((t.shape[0], 1, 1), p[1])


def _product_rule(p):
    args = np.array([p["alpha"], p["beta"], p["a"], p["b"], p["lambda"]])
    pi = IntensitySpec.uniform(p["lambda"], 0.0, 1.0)
    proc = ProcessCoefficients(1, 1, _const_drift_1d, _const_diffusion_1d, _jump_identity_1d, args, intensity=pi)
    fld = FieldCoefficients(
        1, 1, _identity_1d,
        Q=_prod_Q, D=_prod_D,
        grad_F0=_ones_1d, hess_F0=ZERO,
        grad_Q=_prod_grad_Q, hess_Q=ZERO,
        grad_D=_prod_grad_D, hess_D=ZERO,
        args=args, intensity=pi,
    )
    return proc, fld, pi


# -- jump-only: a = b = 0, g = gamma, G = c gamma ------------------------------
# args = [lambda, c]


@coefficient
def _jump_G(t, x, gam, p):
    return p[1] * gam


def _jump_only(p):
    args = np.array([p["lambda"], p["c"]])
    pi = IntensitySpec.uniform(p["lambda"], 0.5, 1.5)
    proc = ProcessCoefficients(1, 1, None, None, _jump_identity_1d, args, intensity=pi)
    fld = FieldCoefficients(
        1, 1, _identity_1d, G=_jump_G,
        grad_F0=_ones_1d, hess_F0=ZERO,
        grad_G=ZERO, hess_G=ZERO,
        args=args, intensity=pi,
    )
    return proc, fld, pi


# -- jump-only-state: as jump-only with G = x gamma ----------------------------
# args = [lambda]


@coefficient
def _state_G(t, x, gam, p):
    return x[:, 0] * gam


@coefficient
def _state_grad_G(t, x, gam, p):
    out = np.empty((t.shape[0], 1))
    out[:, 0] = gam
    return out


def _jump_only_state(p):
    args = np.array([p["lambda"]])
    pi = IntensitySpec.uniform(p["lambda"], 0.5, 1.5)
    proc = ProcessCoefficients(1, 1, None, None, _jump_identity_1d, args, intensity=pi)
    fld = FieldCoefficients(
        1, 1, _identity_1d, G=_state_G,
        grad_F0=_ones_1d, hess_F0=ZERO,
        grad_G=_state_grad_G, hess_G=ZERO,
        args=args, intensity=pi,
    )
    return proc, fld, pi


# -- full-mix: n = m = 2, every term present -----------------------------------
# args = [a0, b0, q0, d0, kappa, lambda]


@coefficient
def _mix_a(t, p):
    out = np.empty((t.shape[0], 2))
    out[:, 0] = p[0] * (1.0 + 0.5 * t)
    out[:, 1] = -0.5 * p[0]
    return out


@coefficient
def _mix_b(t, p):
    out = np.empty((t.shape[0], 2, 2))
    out[:, 0, 0] = p[1]
    out[:, 0, 1] = 0.5 * p[1] * np.cos(t)
    out[:, 1, 0] = 0.25 * p[1]
    out[:, 1, 1] = p[1]
    return out


@coefficient
def _mix_g(t, gam, p):
    out = np.empty((t.shape[0], 2))
    out[:, 0] = 0.3 * gam
    out[:, 1] = -0.2 * gam * (1.0 + t)
    return out


@coefficient
def _mix_F0(x, p):
    return np.sin(x[:, 0]) + 0.5 * x[:, 0] * x[:, 1] + 0.25 * x[:, 1] * x[:, 1]


@coefficient
def _mix_grad_F0(x, p):
    out = np.empty((x.shape[0], 2))
    out[:, 0] = np.cos(x[:, 0]) + 0.5 * x[:, 1]
    out[:, 1] = 0.5 * x[:, 0] + 0.5 * x[:, 1]
    return out


@coefficient
def _mix_hess_F0(x, p):
    out = np.empty((x.shape[0], 2, 2))
    out[:, 0, 0] = -np.sin(x[:, 0])
    out[:, 0, 1] = 0.5
    out[:, 1, 0] = 0.5
    out[:, 1, 1] = 0.5
    return out


@coefficient
def _mix_Q(t, x, p):
    return p[2] * (np.cos(x[:, 0]) * (1.0 + t) + 0.1 * x[:, 1])


@coefficient
def _mix_grad_Q(t, x, p):
    out = np.empty((t.shape[0], 2))
    out[:, 0] = -p[2] * np.sin(x[:, 0]) * (1.0 + t)
    out[:, 1] = 0.1 * p[2]
    return out


@coefficient
def _mix_hess_Q(t, x, p):
    out = np.zeros((t.shape[0], 2, 2))
    out[:, 0, 0] = -p[2] * np.cos(x[:, 0]) * (1.0 + t)
    return out


@coefficient
def _mix_D(t, x, p):
    out = np.empty((t.shape[0], 2))
    out[:, 0] = p[3] * x[:, 1]
    out[:, 1] = p[3] * np.sin(x[:, 0] + t)
    return out


@coefficient
def _mix_grad_D(t, x, p):
    out = np.zeros((t.shape[0], 2, 2))
    out[:, 0, 1] = p[3]
    out[:, 1, 0] = p[3] * np.cos(x[:, 0] + t)
    return out


@coefficient
def _mix_hess_D(t, x, p):
    out = np.zeros((t.shape[0], 2, 2, 2))
    out[:, 1, 0, 0] = -p[3] * np.sin(x[:, 0] + t)
    return out


@coefficient
def _mix_G(t, x, gam, p):
    return p[4] * (gam * np.cos(x[:, 1]) + 0.1 * x[:, 0] * gam * gam)


@coefficient
def _mix_grad_G(t, x, gam, p):
    out = np.empty((t.shape[0], 2))
    out[:, 0] = 0.1 * p[4] * gam * gam
    out[:, 1] = -p[4] * gam * np.sin(x[:, 1])
    return out


@coefficient
def _mix_hess_G(t, x, gam, p):
    out = np.zeros((t.shape[0], 2, 2))
    out[:, 1, 1] = -p[4] * gam * np.cos(x[:, 1])
    return out


def _full_mix(p):
    args = np.array([p["a"], p["b"], p["q"], p["d"], p["kappa"], p["lambda"]])
    pi = IntensitySpec.uniform(p["lambda"], 0.0, 1.0)
    proc = ProcessCoefficients(2, 2, _mix_a, _mix_b, _mix_g, args, intensity=pi)
    fld = FieldCoefficients(
        2, 2, _mix_F0, Q=_mix_Q, D=_mix_D, G=_mix_G,
        grad_F0=_mix_grad_F0, hess_F0=_mix_hess_F0,
        grad_Q=_mix_grad_Q, hess_Q=_mix_hess_Q,
        grad_D=_mix_grad_D, hess_D=_mix_hess_D,
        grad_G=_mix_grad_G, hess_G=_mix_hess_G,
        args=args, intensity=pi,
    )
    return proc, fld, pi


# -- registry ------------------------------------------------------------------


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    required: tuple
    optional: dict
    build: object
    z: tuple
    exact: bool
    summary: str


CATALOG = {
    e.name: e
    for e in (
        CatalogEntry(
            "affine-exact", ("c", "psi"), {"a": 0.5, "b": 0.8, "lambda": 1.5, "delta": 0.0},
            _affine_exact, (0.5,), True,
            "F = c x + psi t (+ delta w); constant a, b; jumps g = gamma, gamma ~ U(-1, 1)",
        ),
        CatalogEntry(
            "ito-quadratic", ("a", "b"), {"g": 0.5, "lambda": 1.0},
            _ito_quadratic, (1.0,), False,
            "static F = x^2; constant a, b and jump size g",
        ),
        CatalogEntry(
            "product-rule", ("alpha", "beta", "a", "b", "lambda"), {},
            _product_rule, (1.0,), False,
            "F = phi(t) x with d phi = alpha dt + beta dw; jumps g = gamma, gamma ~ U(0, 1)",
        ),
        CatalogEntry(
            "jump-only", ("lambda", "c"), {},
            _jump_only, (0.0,), True,
            "a = b = 0, F0 = x, g = gamma, G = c gamma, gamma ~ U(0.5, 1.5)",
        ),
        CatalogEntry(
            "jump-only-state", ("lambda",), {},
            _jump_only_state, (1.0,), True,
            "jump-only with state-dependent G = x gamma",
        ),
        CatalogEntry(
            "full-mix", (), {"a": 0.3, "b": 0.4, "q": 0.2, "d": 0.3, "kappa": 0.5, "lambda": 2.0},
            _full_mix, (0.5, -0.3), False,
            "n = m = 2 with drift, diffusion, jumps, Q, D and G all nonzero",
        ),
    )
}


def check_params(name, params):
    """Complete ``params`` with defaults; raise on unknown names or missing/extra keys."""
    if name not in CATALOG:
        raise ScenarioError(f"unknown scenario {name!r}; known: {', '.join(CATALOG)}")
    entry = CATALOG[name]
    params = dict(params or {})
    allowed = set(entry.required) | set(entry.optional)
    extra = sorted(set(params) - allowed)
    missing = [k for k in entry.required if k not in params]
    if extra:
        raise ScenarioError(f"scenario {name!r} does not take parameter(s) {extra}")
    if missing:
        raise ScenarioError(f"scenario {name!r} is missing parameter(s) {missing}")
    full = dict(entry.optional)
    full.update({k: float(v) for k, v in params.items()})
    bad = [k for k, v in full.items() if not np.isfinite(v)]
    if bad:
        raise ScenarioError(f"parameter(s) {bad} must be finite")
    if full.get("lambda", 0.0) < 0:
        raise ScenarioError("lambda must be non-negative")
    return full


def catalog(name, params=None, *, centered=False, T=1.0, z=None, validate=True):
    """Build a named scenario.

    With ``centered`` the same coefficient functions are read as the centered
    representation (drifts a~, Q~ against the compensated measure).
    """
    entry = CATALOG.get(name)
    full = check_params(name, params)
    proc, fld, pi = entry.build(full)
    spec = ScenarioSpec(
        name, proc.n, proc.m, proc, fld, pi,
        entry.z if z is None else z, T, full, entry.exact,
    )
    if validate:
        rng = np.random.default_rng(12345)
        probes = [(T * u, spec.z + rng.uniform(-1.0, 1.0, spec.n)) for u in (0.0, 0.37, 1.0)]
        report = validate_derivatives(fld, probes)
        if not report.passed:
            failed = [k for k, c in report.checks.items() if c.status == "fail"]
            raise ScenarioError(f"analytic derivatives of {name!r} disagree with finite differences: {failed}")
    if centered:
        spec = spec.replace(
            process=dataclasses.replace(proc, centered=True),
            field=dataclasses.replace(fld, centered=True),
        )
    return spec
