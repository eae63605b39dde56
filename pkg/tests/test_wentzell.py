import math

import numpy as np
import pytest

from conftest import product_rule_oracle
from itowentzell.catalog import catalog
from itowentzell.field import FieldRealization
from itowentzell.noise import IntensitySpec, MarkedJumpStream, TimeGrid, WienerPath, sample_wiener
from itowentzell.scenario import FieldCoefficients, ProcessCoefficients, ScenarioSpec
from itowentzell.sde import integrate_process
from itowentzell.wentzell import (
    TERMS,
    compensator_terms,
    convergence_study,
    rhs_jump,
    rhs_step,
    sample_noise,
    verify_many,
    verify_noise,
    verify_path,
)

PRODUCT = {"alpha": 0.2, "beta": 0.5, "a": 0.3, "b": 0.8, "lambda": 1.0}


def _setup(spec, w, jumps):
    path = integrate_process(spec.process, w, jumps, spec.z)
    return path, FieldRealization(spec.field, w, jumps)


def test_rhs_jump_example():
    spec = catalog("jump-only", {"lambda": 1.0, "c": 1.5})
    w = WienerPath(TimeGrid(1.0, 8), 1, np.zeros((8, 1)))
    jumps = MarkedJumpStream([0.5], [2.0], 1.0)
    path, fr = _setup(spec, w, jumps)
    inc = rhs_jump(spec, path, fr, 0)
    assert inc == {"jump_field": 2.0, "jump_G": 3.0}
    rep = verify_noise(spec, w, jumps)
    assert rep.lhs == 5.0 and rep.residual == 0.0


def test_zero_jump_size_gives_zero_jump_field():
    spec = catalog("affine-exact", {"c": 2.0, "psi": 0.0})
    spec = spec.replace(process=ProcessCoefficients(1, 1, spec.process.a, spec.process.b, None,
                                                    spec.process.args, intensity=spec.intensity))
    w = sample_wiener(TimeGrid(1.0, 16), 1, 3)
    jumps = MarkedJumpStream([0.2, 0.7], [0.5, -0.3], 1.0)
    path, fr = _setup(spec, w, jumps)
    for l in range(len(jumps)):
        assert rhs_jump(spec, path, fr, l)["jump_field"] == 0.0
        assert rhs_jump(spec, path, fr, l)["jump_G"] == 0.0


def test_rhs_step_product_rule_cross_term():
    spec = catalog("product-rule", PRODUCT)
    w, jumps = sample_noise(spec, 32, 1)
    path, fr = _setup(spec, w, jumps)
    dt = w.grid.dt
    for j in (0, 5, 31):
        inc = rhs_step(spec, path, fr, j)
        assert inc["drift_cross"] == pytest.approx(0.8 * 0.5 * dt, rel=1e-14)
        assert inc["drift_Q"] == pytest.approx(0.2 * path.states[j, 0] * dt, rel=1e-14)
        assert inc["diffusion_D"] == pytest.approx(0.5 * path.states[j, 0] * w.increments[j, 0], rel=1e-14)
        assert inc["drift_diffusion"] == 0.0
    with pytest.raises(IndexError):
        rhs_step(spec, path, fr, 32)


def test_bookkeeping_and_report_fields():
    spec = catalog("full-mix")
    rep = verify_path(spec, 32, 4)
    assert rep.rhs == pytest.approx(math.fsum(rep.terms.values()), abs=1e-12)
    assert rep.residual == rep.lhs - rep.rhs
    assert set(rep.terms) == set(TERMS)
    assert rep.as_dict()["seed"] == 4


def test_ito_reduction_zero_accumulators():
    rep = verify_path(catalog("ito-quadratic", {"a": 0.1, "b": 0.9}), 64, 2)
    assert rep.drift_Q == rep.diffusion_D == rep.drift_cross == rep.jump_G == 0.0
    assert rep.drift_diffusion == pytest.approx(0.81, rel=1e-13)


def test_product_rule_full_oracle_per_path():
    spec = catalog("product-rule", PRODUCT)
    for seed in range(10):
        w, jumps = sample_noise(spec, 128, seed)
        r = verify_noise(spec, w, jumps).residual
        assert r == pytest.approx(product_rule_oracle(w, jumps, 0.2, 0.5, 0.3, 0.8), abs=1e-12)


def test_exact_class_at_many_sizes():
    spec = catalog("jump-only-state", {"lambda": 4.0})
    for N in (1, 3, 17, 100):
        for seed in range(5):
            assert abs(verify_path(spec, N, seed).residual) < 1e-12


def test_centered_form_matches_noncentered_form():
    spec = catalog("full-mix")
    w, jumps = sample_noise(spec, 64, 6)
    a = verify_noise(spec, w, jumps)
    b = verify_noise(spec, w, jumps, form="centered")
    assert b.form == "centered"
    assert abs(a.residual - b.residual) < 1e-12
    path, fr = _setup(spec, w, jumps)
    cf, cg = compensator_terms(spec, path, fr)
    assert b.extra_field == pytest.approx(math.fsum(cf))
    assert b.extra_G == pytest.approx(math.fsum(cg))
    with pytest.raises(ValueError):
        verify_noise(spec, w, jumps, form="sideways")


def test_verify_many_is_thread_invariant():
    spec = catalog("full-mix")
    one = [r.residual for r in verify_many(spec, 32, range(6), threads=1)]
    many = [r.residual for r in verify_many(spec, 32, range(6), threads=3)]
    assert one == many


def test_convergence_exact_scenario_rows():
    table = convergence_study(catalog("affine-exact", {"c": 1.0, "psi": 1.0}), [8, 16, 32], 30, 0)
    assert all(r.exact and r.rms < 1e-12 for r in table.rows)
    assert table.orders == [None, None]
    assert table.fitted_order is None


def test_convergence_study_validation():
    spec = catalog("full-mix")
    with pytest.raises(ValueError):
        convergence_study(spec, [8, 24], 30, 0)
    with pytest.raises(ValueError):
        convergence_study(spec, [8, 16], 29, 0)


def test_convergence_levels_share_trajectories():
    spec = catalog("product-rule", PRODUCT)
    table = convergence_study(spec, [16, 32], 30, 5)
    # the coarse column is exactly a plain verification on the coarse noise
    assert table.residuals[0, 0] == verify_path(spec, 16, 5).residual


@pytest.mark.slow
def test_full_mix_rms_strictly_decreasing():
    table = convergence_study(catalog("full-mix"), [16, 32, 64, 128, 256], 60, 0)
    rms = table.rms
    assert np.all(np.diff(rms) < 0), rms


def _user_spec():
    """Plain-Python coefficients, no derivatives supplied."""

    def a(t, p):
        return np.column_stack([np.sin(t), 0.5 * np.ones_like(t)])

    def b(t, p):
        out = np.zeros((len(t), 2, 1))
        out[:, 0, 0] = 0.5
        out[:, 1, 0] = 0.2 * (1 + t)
        return out

    def g(t, gam, p):
        return np.column_stack([gam, -0.5 * gam])

    def F0(x, p):
        return np.cos(x[:, 0]) * x[:, 1]

    def Q(t, x, p):
        return x[:, 0] * x[:, 1] * t

    def D(t, x, p):
        return (0.3 * x[:, 0] ** 2)[:, None]

    def G(t, x, gam, p):
        return gam * np.sin(x[:, 1])

    pi = IntensitySpec.discrete(1.5, [0.5, -1.0], [0.6, 0.4])
    return ScenarioSpec(
        "user", 2, 1,
        ProcessCoefficients(2, 1, a, b, g, intensity=pi),
        FieldCoefficients(2, 1, F0, Q=Q, D=D, G=G, intensity=pi),
        pi, [0.3, 1.0],
    )


def test_user_scenario_without_derivatives_converges():
    spec = _user_spec()
    table = convergence_study(spec, [16, 32, 64, 128, 256], 30, 0)
    assert table.rms[-1] < table.rms[0]
    rep = verify_path(spec, 64, 1)
    assert math.isfinite(rep.residual)


def test_numeric_derivatives_give_same_residual():
    spec = catalog("full-mix")
    a = verify_path(spec, 32, 2)
    b = verify_path(spec, 32, 2, derivatives="numeric")
    assert abs(a.residual - b.residual) < 1e-6
