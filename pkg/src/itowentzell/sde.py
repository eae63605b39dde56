"""Euler integration of the jump-diffusion with jumps at their exact times."""

from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError, InvalidDimensionError


@dataclass(frozen=True, eq=False)
class ProcessPath:
    """States on the grid plus a ledger of every jump.

    ``continuous[j]`` is the drift/diffusion increment of step ``j``; inside a
    step it is spread linearly, so the state just before event ``l`` is
    ``x_j + frac_l * continuous[j]`` plus earlier jumps of the same step.
    """

    grid: object
    states: np.ndarray  # (N + 1, n)
    continuous: np.ndarray  # (N, n)
    jump_times: np.ndarray
    jump_marks: np.ndarray
    jump_steps: np.ndarray
    jump_fracs: np.ndarray
    jump_sizes: np.ndarray  # g(tau_l, gamma_l), (L, n)
    pre_jump: np.ndarray  # (L, n)

    @property
    def post_jump(self):
        return self.pre_jump + self.jump_sizes

    @property
    def final(self):
        return self.states[-1]


def integrate_process(pc, w, jumps, z):
    """Left-point Euler scheme; in the centered representation the compensator
    ``dt * int g(t_j, gamma) Pi(dgamma)`` is subtracted every step."""
    grid = w.grid
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if z.shape != (pc.n,):
        raise InvalidDimensionError(f"initial point has shape {z.shape}, expected ({pc.n},)")
    if w.m != pc.m:
        raise InvalidDimensionError(f"Wiener path has dimension {w.m}, coefficients expect {pc.m}")
    if abs(jumps.T - grid.T) > 1e-12 * grid.T:
        raise ValueError(f"jump horizon {jumps.T} differs from grid horizon {grid.T}")

    t = grid.nodes[:-1]
    dt = grid.dt
    b = pc.diffusion(t)
    inc = pc.drift(t) * dt + np.einsum("jnk,jk->jn", b, w.increments)
    if pc.centered:
        inc = inc - dt * pc.compensator(t)

    steps, fracs = grid.locate(jumps.times)
    sizes = pc.jump(jumps.times, jumps.marks) if len(jumps) else np.zeros((0, pc.n))
    jump_sum = np.zeros_like(inc)
    np.add.at(jump_sum, steps, sizes)

    states = np.cumsum(np.vstack([z[None, :], inc + jump_sum]), axis=0)
    bad = ~np.all(np.isfinite(states), axis=1)
    if bad.any():
        j = int(np.flatnonzero(bad)[0])
        raise DivergenceError(f"state became non-finite at step {j} (t = {grid.nodes[j]!r})", step=j)

    pre = np.empty((len(jumps), pc.n))
    within = np.zeros(pc.n)  # jumps already taken inside the current step
    for l, (j, f) in enumerate(zip(steps, fracs)):
        if l == 0 or steps[l - 1] != j:
            within = np.zeros(pc.n)
        pre[l] = states[j] + f * inc[j] + within
        within = within + sizes[l]
    return ProcessPath(grid, states, inc, jumps.times, jumps.marks, steps, fracs, sizes, pre)
