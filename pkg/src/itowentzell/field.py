"""Lazy pointwise realization of the random field driven by the shared noise.

For a fixed argument x the field equation is a plain integral in t, so

    F(t_j, x) = F0(x) + sum_{i<j} [Q(t_i, x) dt + D_k(t_i, x) dW_k,i]
                      + sum_{tau_l <= t_j} G(tau_l, x, gamma_l)

is evaluated on demand at any query point, without a spatial mesh.  Queries are
batched: a :class:`Moment` says how many whole steps, which fraction of the next
step and how many jump events enter each query.
"""

from typing import NamedTuple

import numpy as np

from . import _kernels
from ._backend import python_function
from .errors import ContractViolationError
from .scenario import ZERO, h_grad, h_hess

_KINDS = ("value", "gradient", "Hessian")


class Moment(NamedTuple):
    steps: np.ndarray  # whole steps accumulated
    fracs: np.ndarray  # fraction of step ``steps`` accumulated on top
    events: np.ndarray  # number of jump events accumulated


class FieldRealization:
    """F(t, x) along one noise realization.

    ``derivatives`` is ``"auto"`` (analytic when every needed derivative is
    supplied, central differences otherwise) or ``"numeric"``.  ``backend``
    forces the kernel path (``"numba"`` or ``"numpy"``) for this realization.
    """

    def __init__(self, fc, w, jumps, *, derivatives="auto", backend=None, memo=True):
        if w.m != fc.m:
            raise ValueError(f"Wiener path has dimension {w.m}, field expects {fc.m}")
        if derivatives not in ("auto", "numeric"):
            raise ValueError(f"derivatives must be 'auto' or 'numeric', got {derivatives!r}")
        self.fc = fc
        self.w = w
        self.jumps = jumps
        self.grid = w.grid
        self.derivatives = derivatives
        self.backend = backend
        self.t = np.ascontiguousarray(self.grid.nodes[:-1])
        self.dt = self.grid.dt
        self.event_steps, self.event_fracs = self.grid.locate(jumps.times)
        self.node_events = np.searchsorted(jumps.times, self.grid.nodes, side="right")
        self._cache = {} if memo else None

    # -- moments -------------------------------------------------------------

    def at_nodes(self, js):
        js = np.atleast_1d(np.asarray(js, dtype=np.int64))
        if np.any((js < 0) | (js > self.grid.N)):
            raise IndexError(f"step index out of range 0..{self.grid.N}")
        return Moment(js, np.zeros(len(js)), self.node_events[js])

    def before_events(self, ls):
        """Just before event ``l``: its step partially advanced, its own jump excluded."""
        ls = np.atleast_1d(np.asarray(ls, dtype=np.int64))
        return Moment(self.event_steps[ls], self.event_fracs[ls], ls)

    def _query_times(self, moment):
        return self.grid.nodes[moment.steps] + moment.fracs * self.dt

    # -- accumulation --------------------------------------------------------

    def _check(self, name, order, out, moment, x):
        if np.all(np.isfinite(out)):
            return out
        k = int(np.flatnonzero(~np.isfinite(out.reshape(len(out), -1)).all(axis=1))[0])
        t = self._query_times(moment)[k]
        raise ContractViolationError(
            f"coefficient {name} gives a non-finite field {_KINDS[order]} at t={t!r}, x={x[k].tolist()!r}"
        )

    def _accumulate(self, order, moment, x):
        fc = self.fc
        fns = {c: fc.derivative(c, order) for c in ("F0", "Q", "D", "G")}
        if any(f is None for f in fns.values()):
            return None
        args = fc.args
        counts, fracs = moment.steps, moment.fracs
        N = self.grid.N

        shape = (len(x),) + (fc.n,) * order
        if order == 0:
            total = fc.initial(x)
        elif fns["F0"] is ZERO:
            total = np.zeros(shape)
        else:
            total = np.asarray(python_function(fns["F0"])(x, args), dtype=float).reshape(shape).copy()
        self._check("F0", order, total, moment, x)

        if fns["Q"] is not ZERO:
            part = _kernels.contract(fns["Q"], self.t, np.full(N, self.dt), counts, fracs, x, args,
                                     backend=self.backend)
            total = total + self._check("Q", order, part, moment, x)
        if fns["D"] is not ZERO:
            part = _kernels.contract(fns["D"], self.t, self.w.increments, counts, fracs, x, args,
                                     contract_axis=True, backend=self.backend)
            total = total + self._check("D", order, part, moment, x)
        if fns["G"] is not ZERO:
            coef = fc.jump_drift_coefficient
            if coef:
                # compensator / converted drift: coef * dt * int G dPi per step
                nodes, weights = fc.intensity.quadrature
                for gq, wq in zip(nodes, weights):
                    part = _kernels.contract(fns["G"], self.t, np.full(N, coef * self.dt * wq), counts, fracs,
                                             x, args, gam=np.full(N, gq), backend=self.backend)
                    total = total + self._check("G (compensator)", order, part, moment, x)
            if len(self.jumps):
                part = _kernels.contract(fns["G"], self.jumps.times, np.ones(len(self.jumps)), moment.events,
                                         np.zeros(len(x)), x, args, gam=self.jumps.marks, backend=self.backend)
                total = total + self._check("G", order, part, moment, x)
        return total

    def _prepare(self, moment, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.fc.n:
            raise ValueError(f"query points have dimension {x.shape[1]}, field expects {self.fc.n}")
        if len(moment.steps) != len(x):
            moment = Moment(*(np.broadcast_to(a, (len(x),)).copy() for a in moment))
        if not np.all(np.isfinite(x)):
            raise ValueError("query points must be finite")
        return moment, np.ascontiguousarray(x)

    def values(self, moment, x):
        moment, x = self._prepare(moment, x)
        return self._accumulate(0, moment, x)

    def gradients(self, moment, x):
        moment, x = self._prepare(moment, x)
        if self.derivatives == "auto":
            out = self._accumulate(1, moment, x)
            if out is not None:
                return out
        return self._fd_gradients(moment, x)

    def hessians(self, moment, x):
        moment, x = self._prepare(moment, x)
        out = None
        if self.derivatives == "auto":
            out = self._accumulate(2, moment, x)
        if out is None:
            out = self._fd_hessians(moment, x)
        return 0.5 * (out + np.swapaxes(out, -1, -2))

    # -- finite differences --------------------------------------------------

    def _stencil_values(self, moment, points):
        """Evaluate F at a list of ``(K, n)`` point sets sharing ``moment``, in one batch."""
        K = len(points[0])
        stacked = np.concatenate(points, axis=0)
        rep = Moment(*(np.tile(a, len(points)) for a in moment))
        return self._accumulate(0, rep, stacked).reshape(len(points), K)

    def _fd_gradients(self, moment, x):
        K, n = x.shape
        points, steps = [], []
        for i in range(n):
            xp, xm = x.copy(), x.copy()
            xp[:, i] += h_grad(x[:, i])
            xm[:, i] -= h_grad(x[:, i])
            points += [xp, xm]
            steps.append(xp[:, i] - xm[:, i])
        vals = self._stencil_values(moment, points)
        return np.stack([(vals[2 * i] - vals[2 * i + 1]) / steps[i] for i in range(n)], axis=1)

    def _fd_hessians(self, moment, x):
        K, n = x.shape
        hs = []
        for i in range(n):
            xp = x.copy()
            xp[:, i] += h_hess(x[:, i])
            hs.append(xp[:, i] - x[:, i])
        points = [x]
        index = {}
        for i in range(n):
            for si in (1, -1):
                xx = x.copy()
                xx[:, i] += si * hs[i]
                index[(i, si)] = len(points)
                points.append(xx)
            for j in range(i + 1, n):
                for si in (1, -1):
                    for sj in (1, -1):
                        xx = x.copy()
                        xx[:, i] += si * hs[i]
                        xx[:, j] += sj * hs[j]
                        index[(i, j, si, sj)] = len(points)
                        points.append(xx)
        v = self._stencil_values(moment, points)
        H = np.empty((K, n, n))
        for i in range(n):
            H[:, i, i] = (v[index[(i, 1)]] - 2.0 * v[0] + v[index[(i, -1)]]) / hs[i] ** 2
            for j in range(i + 1, n):
                mixed = (v[index[(i, j, 1, 1)]] - v[index[(i, j, 1, -1)]]
                         - v[index[(i, j, -1, 1)]] + v[index[(i, j, -1, -1)]])
                H[:, i, j] = H[:, j, i] = mixed / (4.0 * hs[i] * hs[j])
        return H

    # -- single-point access with memo ----------------------------------------

    def _memo(self, kind, j, x, compute):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self._cache is None:
            return compute(self.at_nodes([j]), x[None, :])[0]
        key = (kind, int(j), x.tobytes())
        if key not in self._cache:
            self._cache[key] = compute(self.at_nodes([j]), x[None, :])[0]
        return self._cache[key]


def eval_field(fr, j, x):
    """F(t_j, x)."""
    return float(fr._memo("value", j, x, fr.values))


def eval_gradient(fr, j, x):
    """dF/dx_i (t_j, x), shape ``(n,)``."""
    return np.array(fr._memo("gradient", j, x, fr.gradients))


def eval_hessian(fr, j, x):
    """Symmetric d2F/dx_i dx_j (t_j, x), shape ``(n, n)``."""
    return np.array(fr._memo("hessian", j, x, fr.hessians))
