"""Pathwise verification of the generalized Ito-Wentzell formula.

Along one shared realization of (w, nu) the verifier simulates x(t) and F(t, x),
then compares

    LHS = F(T, x(T)) - F0(z)

with the right-hand side assembled increment by increment:

    Q dt + D_k dw_k + b_ik dF/dx_i dw_k
    + [a_i dF/dx_i + 1/2 b_ik b_jk d2F/dx_i dx_j + b_ik dD_k/dx_i] dt
    + sum over events of [F(x- + g) - F(x-)] + G(x- + g)

where the pre-jump state x- and the field just before the event come from the
split-step ledger.  In the centered form the two jump sums become integrals
against the compensated measure and the matching dt terms are added back.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .field import FieldRealization
from .noise import TimeGrid, refine, sample_jumps, sample_wiener
from .scenario import CENTERED, NONCENTERED, to_centered, to_noncentered
from .sde import integrate_process

TERMS = (
    "drift_Q",
    "drift_transport",
    "drift_diffusion",
    "drift_cross",
    "diffusion_D",
    "diffusion_transport",
    "jump_field",
    "jump_G",
)
EXACT_TOL = 1e-12


@dataclass
class ResidualReport:
    seed: object
    N: int
    lhs: float
    rhs: float
    residual: float
    drift_Q: float
    drift_transport: float
    drift_diffusion: float
    drift_cross: float
    diffusion_D: float
    diffusion_transport: float
    jump_field: float
    jump_G: float
    events: int = 0
    form: str = NONCENTERED
    # centered form only: the dt terms added back after compensating the jump sums
    extra_field: float = 0.0
    extra_G: float = 0.0

    @property
    def terms(self):
        return {k: getattr(self, k) for k in TERMS}

    def as_dict(self):
        return asdict(self)


@dataclass
class ConvergenceRow:
    N: int
    dt: float
    M: int
    rms: float
    max_abs: float
    order: float = None
    exact: bool = False


@dataclass
class ConvergenceTable:
    rows: list
    residuals: np.ndarray = field(repr=False, default=None)  # (M, levels)

    @property
    def rms(self):
        return np.array([r.rms for r in self.rows])

    @property
    def orders(self):
        return [r.order for r in self.rows[1:]]

    @property
    def fitted_order(self):
        """Least-squares slope of log2 RMS against log2 dt, or None in the exact class."""
        if any(r.exact for r in self.rows) or len(self.rows) < 2:
            return None
        dt = np.log2([r.dt for r in self.rows])
        return float(np.polyfit(dt, np.log2(self.rms), 1)[0])


def _g_argument(pre, size):
    # the jump-G term sees the field coefficient at the shifted state
    return pre + size


def _step_terms(spec, path, fr, js):
    pc, fc = spec.process, spec.field
    grid = path.grid
    dt = grid.dt
    t = grid.nodes[js]
    X = path.states[js]
    dW = fr.w.increments[js]
    moment = fr.at_nodes(js)

    # coefficients of the non-centered formula, whatever representation is stored
    a = pc.drift(t)
    if pc.centered:
        a = a - pc.compensator(t)
    q = fc.drift(t, X)
    if fc.centered:
        q = q - fc.compensator(t, X)
    b = pc.diffusion(t)
    D = fc.diffusion(t, X)
    dD = fc.diffusion_gradient(t, X)

    grad = fr.gradients(moment, X)
    hess = fr.hessians(moment, X)
    return {
        "drift_Q": q * dt,
        "drift_transport": np.einsum("ji,ji->j", a, grad) * dt,
        "drift_diffusion": 0.5 * np.einsum("jik,jil,jlk->j", b, hess, b) * dt,
        "drift_cross": np.einsum("jik,jki->j", b, dD) * dt,
        "diffusion_D": np.einsum("jk,jk->j", D, dW),
        "diffusion_transport": np.einsum("jik,ji,jk->j", b, grad, dW),
    }


def _jump_terms(spec, path, fr, ls):
    ls = np.asarray(ls, dtype=np.int64)
    if len(ls) == 0:
        return {"jump_field": np.zeros(0), "jump_G": np.zeros(0)}
    pre = path.pre_jump[ls]
    size = path.jump_sizes[ls]
    moment = fr.before_events(ls)
    both = fr.values(moment._replace(**{k: np.tile(v, 2) for k, v in moment._asdict().items()}),
                     np.vstack([pre + size, pre]))
    L = len(ls)
    return {
        "jump_field": both[:L] - both[L:],
        "jump_G": spec.field.jump(path.jump_times[ls], _g_argument(pre, size), path.jump_marks[ls]),
    }


def step_increments(spec, path, fr):
    """Per-step continuous and Wiener increments of the right-hand side, each ``(N,)``."""
    return _step_terms(spec, path, fr, np.arange(path.grid.N))


def jump_increments(spec, path, fr):
    """Per-event increments ``jump_field`` and ``jump_G``, each ``(L,)``."""
    return _jump_terms(spec, path, fr, np.arange(len(path.jump_times)))


def rhs_step(spec, path, fr, j):
    """Right-hand-side increments of step ``j`` evaluated at ``(t_j, x_j)``."""
    if not 0 <= j < path.grid.N:
        raise IndexError(f"step {j} out of range 0..{path.grid.N - 1}")
    return {k: float(v[0]) for k, v in _step_terms(spec, path, fr, np.array([j])).items()}


def rhs_jump(spec, path, fr, l):
    """Jump increments of event ``l``, with the field taken just before the event."""
    if not 0 <= l < len(path.jump_times):
        raise IndexError(f"event {l} out of range")
    return {k: float(v[0]) for k, v in _jump_terms(spec, path, fr, [l]).items()}


def compensator_terms(spec, path, fr):
    """``dt * int [F(x_j + g) - F(x_j)] dPi`` and ``dt * int G(x_j + g) dPi`` per step."""
    pc, fc = spec.process, spec.field
    grid = path.grid
    N = grid.N
    t = grid.nodes[:-1]
    X = path.states[:-1]
    nodes, weights = spec.intensity.quadrature
    moment = fr.at_nodes(np.arange(N))
    base = fr.values(moment, X)
    shifted = [X + pc.jump(t, gq) for gq in nodes]
    tiled = moment._replace(**{k: np.tile(v, len(nodes)) for k, v in moment._asdict().items()})
    Fs = fr.values(tiled, np.vstack(shifted)).reshape(len(nodes), N)
    Gs = np.stack([fc.jump(t, xs, gq) for xs, gq in zip(shifted, nodes)])
    comp_field = grid.dt * np.tensordot(weights, Fs - base[None, :], axes=1)
    comp_G = grid.dt * np.tensordot(weights, Gs, axes=1)
    return comp_field, comp_G


def _in_form(spec, form):
    if form is None:
        form = CENTERED if spec.representation == CENTERED else NONCENTERED
    if form == NONCENTERED:
        return (spec if spec.representation == NONCENTERED else to_noncentered(spec)), form
    if form == CENTERED:
        return (spec if spec.representation == CENTERED else to_centered(spec)), form
    raise ValueError(f"form must be {NONCENTERED!r} or {CENTERED!r}, got {form!r}")


def sample_noise(spec, N, seed):
    grid = TimeGrid(spec.T, N)
    return sample_wiener(grid, spec.m, seed), sample_jumps(spec.intensity, spec.T, seed)


def verify_noise(spec, w, jumps, *, form=None, seed=None, derivatives="auto", backend=None):
    """Verify the formula on a given noise realization."""
    spec, form = _in_form(spec, form)
    path = integrate_process(spec.process, w, jumps, spec.z)
    fr = FieldRealization(spec.field, w, jumps, derivatives=derivatives, backend=backend, memo=False)
    N = w.grid.N

    parts = step_increments(spec, path, fr)
    parts.update(jump_increments(spec, path, fr))
    extra_field = extra_G = 0.0
    if form == CENTERED:
        comp_field, comp_G = compensator_terms(spec, path, fr)
        # integrals against the compensated measure, plus the dt terms that come back
        parts["jump_field"] = np.concatenate([parts["jump_field"], -comp_field, comp_field])
        parts["jump_G"] = np.concatenate([parts["jump_G"], -comp_G, comp_G])
        extra_field, extra_G = math.fsum(comp_field), math.fsum(comp_G)

    acc = {k: math.fsum(parts[k]) for k in TERMS}
    rhs = math.fsum(acc.values())
    F_end = fr.values(fr.at_nodes([N]), path.final[None, :])[0]
    lhs = float(F_end - spec.field.initial(spec.z[None, :])[0])
    return ResidualReport(
        seed, N, lhs, rhs, lhs - rhs, **acc,
        events=len(jumps), form=form, extra_field=extra_field, extra_G=extra_G,
    )


def verify_path(spec, N, seed, *, form=None, derivatives="auto", backend=None):
    """Simulate noise, process and field on shared realizations and return the residual report.

    ``form`` selects the representation the identity is checked in; the scenario is
    converted first when it is stored in the other one.
    """
    w, jumps = sample_noise(spec, N, seed)
    return verify_noise(spec, w, jumps, form=form, seed=seed, derivatives=derivatives, backend=backend)


def _map(fn, items, threads):
    # pool.map keeps submission order, so results never depend on scheduling
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


def verify_many(spec, N, seeds, *, form=None, threads=1, derivatives="auto", backend=None):
    """:func:`verify_path` for every seed, reports in seed order."""
    return _map(lambda s: verify_path(spec, N, s, form=form, derivatives=derivatives, backend=backend),
                list(seeds), threads)


def _nested_residuals(spec, levels, seed, form, derivatives, backend):
    w = sample_wiener(TimeGrid(spec.T, levels[0]), spec.m, seed)
    jumps = sample_jumps(spec.intensity, spec.T, seed)
    out = []
    for i, N in enumerate(levels):
        if i:
            w = refine(w, N // levels[i - 1], seed)
        out.append(verify_noise(spec, w, jumps, form=form, seed=seed, derivatives=derivatives,
                                backend=backend).residual)
    return out


def convergence_study(spec, levels, M, seed, *, form=None, threads=1, derivatives="auto", backend=None,
                      min_paths=30):
    """RMS residual per level on shared trajectories.

    Path ``p`` uses seed ``seed + p``; its noise is sampled on the coarsest grid
    and refined by Brownian-bridge fill-in, so every level sees one trajectory.
    """
    levels = [int(N) for N in levels]
    if len(levels) < 1 or any(b != 2 * a for a, b in zip(levels, levels[1:])):
        raise ValueError(f"levels must double at every step, got {levels}")
    if M < min_paths:
        raise ValueError(f"need at least {min_paths} paths, got {M}")

    def one(p):
        return _nested_residuals(spec, levels, seed + p, form, derivatives, backend)

    res = np.array(_map(one, range(M), threads))

    rows = []
    for i, N in enumerate(levels):
        col = res[:, i]
        rms = float(np.sqrt(np.mean(col**2)))
        row = ConvergenceRow(N, spec.T / N, M, rms, float(np.max(np.abs(col))), exact=rms < EXACT_TOL)
        if i and not (row.exact or rows[-1].exact):
            row.order = math.log2(rows[-1].rms / rms)
        rows.append(row)
    return ConvergenceTable(rows, res)
