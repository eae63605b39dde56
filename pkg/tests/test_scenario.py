import warnings

import numpy as np
import pytest

from itowentzell.catalog import CATALOG, catalog, check_params
from itowentzell.errors import ContractViolationError, InvalidDimensionError, RepresentationWarning, ScenarioError
from itowentzell.noise import IntensitySpec
from itowentzell.scenario import (
    CENTERED,
    NONCENTERED,
    ZERO,
    FieldCoefficients,
    ProcessCoefficients,
    ScenarioSpec,
    to_centered,
    to_noncentered,
    validate_derivatives,
)

DEFAULTS = {
    "affine-exact": {"c": 1.0, "psi": 0.5},
    "ito-quadratic": {"a": 0.1, "b": 0.2},
    "product-rule": {"alpha": 0.1, "beta": 0.2, "a": 0.3, "b": 0.4, "lambda": 1.0},
    "jump-only": {"lambda": 2.0, "c": 1.0},
    "jump-only-state": {"lambda": 2.0},
    "full-mix": {},
}


@pytest.mark.parametrize("name", list(CATALOG))
def test_every_catalog_entry_builds_and_validates(name):
    spec = catalog(name, DEFAULTS[name])
    assert spec.representation == NONCENTERED
    assert spec.exact == CATALOG[name].exact
    assert validate_derivatives(spec.field, [(0.3, spec.z)]).passed


def test_exact_class_membership():
    assert {n for n, e in CATALOG.items() if e.exact} == {"affine-exact", "jump-only", "jump-only-state"}


def test_check_params_rejects_bad_input():
    with pytest.raises(ScenarioError, match="unknown scenario"):
        check_params("nosuch", {})
    with pytest.raises(ScenarioError, match="missing"):
        check_params("jump-only", {"lambda": 1.0})
    with pytest.raises(ScenarioError, match="does not take"):
        check_params("jump-only", {"lambda": 1.0, "c": 1.0, "zeta": 2.0})
    with pytest.raises(ScenarioError, match="non-negative"):
        check_params("jump-only", {"lambda": -1.0, "c": 1.0})
    with pytest.raises(ScenarioError, match="finite"):
        check_params("jump-only", {"lambda": 1.0, "c": float("nan")})
    assert check_params("affine-exact", {"c": 1, "psi": 2})["lambda"] == 1.5


def _full_mix_compensators(t, x, lam=2.0, kappa=0.5):
    # marks U(0, 1): E gamma = 1/2, E gamma^2 = 1/3
    g = np.array([0.3 * 0.5, -0.2 * 0.5 * (1 + t)]) * lam
    G = kappa * lam * (np.cos(x[1]) * 0.5 + 0.1 * x[0] / 3.0)
    return g, G


def test_to_noncentered_subtracts_compensators():
    c = catalog("full-mix", centered=True)
    nc = to_noncentered(c)
    assert c.representation == CENTERED and nc.representation == NONCENTERED
    for t in (0.0, 0.4, 1.0):
        x = np.array([0.2, -0.7])
        g, G = _full_mix_compensators(t, x)
        np.testing.assert_allclose(nc.process.drift(t)[0], c.process.drift(t)[0] - g, rtol=1e-14, atol=1e-15)
        assert nc.field.drift(t, x)[0] == pytest.approx(c.field.drift(t, x)[0] - G, rel=1e-14)
        # b, g, D, G untouched
        np.testing.assert_array_equal(nc.process.diffusion(t), c.process.diffusion(t))
        np.testing.assert_array_equal(nc.field.diffusion(t, x), c.field.diffusion(t, x))
        np.testing.assert_array_equal(nc.field.jump(t, x, 0.3), c.field.jump(t, x, 0.3))


def test_round_trip_is_bitwise_identity():
    c = catalog("full-mix", centered=True)
    back = to_centered(to_noncentered(c))
    t = np.linspace(0, 1, 7)
    x = np.column_stack([np.linspace(-1, 1, 7), np.linspace(2, 0, 7)])
    np.testing.assert_array_equal(back.process.drift(t), c.process.drift(t))
    np.testing.assert_array_equal(back.field.drift(t, x), c.field.drift(t, x))


def test_noncentered_to_centered_adds_compensators():
    nc = catalog("full-mix")
    c = to_centered(nc)
    g, G = _full_mix_compensators(0.5, nc.z)
    np.testing.assert_allclose(c.process.drift(0.5)[0], nc.process.drift(0.5)[0] + g, rtol=1e-14)
    assert c.field.drift(0.5, nc.z)[0] == pytest.approx(nc.field.drift(0.5, nc.z)[0] + G, rel=1e-14)


def test_noop_conversion_warns():
    nc = catalog("jump-only", DEFAULTS["jump-only"])
    with pytest.warns(RepresentationWarning):
        assert to_noncentered(nc) is nc
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        to_centered(nc)


def test_zero_jump_conversion_is_identity():
    spec = catalog("affine-exact", {"c": 1.0, "psi": 0.0, "lambda": 0.0})
    c = to_centered(spec)
    np.testing.assert_array_equal(c.process.drift([0.0, 1.0]), spec.process.drift([0.0, 1.0]))


def _bad_derivative_field(grad):
    def F0(x, p):
        return np.sin(x[:, 0])

    return FieldCoefficients(1, 1, F0, grad_F0=grad)


def test_validate_derivatives_reports_status():
    right = _bad_derivative_field(lambda x, p: np.cos(x[:, :1]))
    wrong = _bad_derivative_field(lambda x, p: 1.01 * np.cos(x[:, :1]))
    probes = [(0.0, [0.3]), (0.5, [1.2])]
    rep = validate_derivatives(right, probes)
    assert rep["grad_F0"].status == "pass"
    assert rep["hess_F0"].status == "numeric-only"
    assert rep["grad_Q"].status == "absent"
    bad = validate_derivatives(wrong, probes)
    assert not bad.passed and bad["grad_F0"].status == "fail"
    assert bad["grad_F0"].max_abs_error == pytest.approx(0.01 * np.cos(0.3), rel=1e-3)


def test_validate_derivatives_checks_zero_marker():
    def F0(x, p):
        return x[:, 0] ** 2

    fc = FieldCoefficients(1, 1, F0, hess_F0=ZERO)
    assert validate_derivatives(fc, [(0.0, [1.0])])["hess_F0"].status == "fail"


def test_non_finite_coefficient_names_itself():
    def a(t, p):
        return np.full((len(t), 1), np.nan)

    pc = ProcessCoefficients(1, 1, a)
    with pytest.raises(ContractViolationError, match="coefficient a"):
        pc.drift([0.1])


def test_dimension_checks():
    with pytest.raises(InvalidDimensionError):
        ProcessCoefficients(0, 1)
    pc = ProcessCoefficients(2, 1)
    fc = FieldCoefficients(1, 1, lambda x, p: x[:, 0])
    with pytest.raises(InvalidDimensionError):
        ScenarioSpec("x", 2, 1, pc, fc, IntensitySpec.point_mass(0.0), [0.0, 0.0])
    with pytest.raises(ScenarioError):
        ProcessCoefficients(1, 1, centered=True)


def test_catalog_overrides():
    spec = catalog("full-mix", T=2.5, z=(1.0, 2.0))
    assert spec.T == 2.5
    np.testing.assert_array_equal(spec.z, [1.0, 2.0])
    assert spec.params["lambda"] == 2.0
