import numpy as np
import pytest

from itowentzell import _backend
from itowentzell.catalog import catalog
from itowentzell.errors import ContractViolationError
from itowentzell.field import FieldRealization, eval_field, eval_gradient, eval_hessian
from itowentzell.noise import MarkedJumpStream, TimeGrid, WienerPath, sample_jumps, sample_wiener
from itowentzell.scenario import FieldCoefficients

PRODUCT = {"alpha": 0.3, "beta": 0.6, "a": 0.2, "b": 0.4, "lambda": 1.0}


def _noise(spec, N, seed):
    return sample_wiener(TimeGrid(spec.T, N), spec.m, seed), sample_jumps(spec.intensity, spec.T, seed)


def test_product_rule_field_is_phi_times_x():
    spec = catalog("product-rule", PRODUCT)
    w, jumps = _noise(spec, 40, 3)
    fr = FieldRealization(spec.field, w, jumps)
    # phi_j = 1 + alpha t_j + beta W_j, accumulated left-point
    phi = 1.0 + 0.3 * w.grid.nodes + 0.6 * w.values[:, 0]
    for j in (0, 7, 40):
        assert eval_field(fr, j, [1.7]) == pytest.approx(phi[j] * 1.7, rel=1e-13)
        assert eval_gradient(fr, j, [1.7])[0] == pytest.approx(phi[j], rel=1e-13)
        assert eval_hessian(fr, j, [1.7])[0, 0] == 0.0


def test_jump_field_before_and_after_events():
    spec = catalog("jump-only", {"lambda": 1.0, "c": 3.0})
    w = WienerPath(TimeGrid(1.0, 4), 1, np.zeros((4, 1)))
    jumps = MarkedJumpStream([0.5, 0.6], [2.0, 1.0], 1.0)
    fr = FieldRealization(spec.field, w, jumps)
    x = np.array([[0.25]])
    # just before event l only the earlier events have entered
    np.testing.assert_allclose(fr.values(fr.before_events([0, 1]), np.repeat(x, 2, axis=0)), [0.25, 0.25 + 6.0])
    assert eval_field(fr, 2, x[0]) == pytest.approx(0.25 + 6.0)
    assert eval_field(fr, 4, x[0]) == pytest.approx(0.25 + 9.0)


def test_fractional_step_before_event():
    spec = catalog("product-rule", PRODUCT)
    w = sample_wiener(TimeGrid(1.0, 4), 1, 0)
    jumps = MarkedJumpStream([0.3], [0.5], 1.0)
    fr = FieldRealization(spec.field, w, jumps)
    # event sits 20% into step 1
    dphi = 0.3 * 0.25 + 0.6 * w.increments[1, 0]
    phi1 = 1.0 + 0.3 * 0.25 + 0.6 * w.increments[0, 0]
    got = fr.values(fr.before_events([0]), [[2.0]])[0]
    assert got == pytest.approx((phi1 + 0.2 * dphi) * 2.0, rel=1e-13)


def test_full_mix_analytic_derivatives_match_finite_differences():
    spec = catalog("full-mix")
    w, jumps = _noise(spec, 32, 5)
    assert len(jumps)
    analytic = FieldRealization(spec.field, w, jumps)
    numeric = FieldRealization(spec.field, w, jumps, derivatives="numeric")
    x = np.array([[0.4, -0.2], [1.1, 0.9], [-0.5, 0.3]])
    m = analytic.at_nodes([0, 17, 32])
    np.testing.assert_allclose(numeric.gradients(m, x), analytic.gradients(m, x), rtol=1e-7, atol=1e-8)
    np.testing.assert_allclose(numeric.hessians(m, x), analytic.hessians(m, x), rtol=1e-4, atol=1e-5)
    H = analytic.hessians(m, x)
    np.testing.assert_array_equal(H, np.swapaxes(H, 1, 2))


def test_missing_derivatives_fall_back_to_finite_differences():
    def F0(x, p):
        return np.exp(x[:, 0]) * x[:, 1]

    def Q(t, x, p):
        return t * x[:, 0] ** 2

    fc = FieldCoefficients(2, 1, F0, Q=Q)
    w = sample_wiener(TimeGrid(1.0, 8), 1, 0)
    fr = FieldRealization(fc, w, MarkedJumpStream.empty(1.0))
    x = np.array([0.3, 2.0])
    tsum = np.sum(w.grid.nodes[:8]) * w.grid.dt
    grad = eval_gradient(fr, 8, x)
    np.testing.assert_allclose(grad, [np.exp(0.3) * 2.0 + 2 * 0.3 * tsum, np.exp(0.3)], rtol=1e-8)
    H = eval_hessian(fr, 8, x)
    np.testing.assert_allclose(H, [[np.exp(0.3) * 2.0 + 2 * tsum, np.exp(0.3)], [np.exp(0.3), 0.0]], atol=2e-6)


def test_memo_returns_cached_value():
    spec = catalog("full-mix")
    w, jumps = _noise(spec, 16, 1)
    fr = FieldRealization(spec.field, w, jumps)
    v = eval_field(fr, 9, [0.1, 0.2])
    assert len(fr._cache) == 1
    assert eval_field(fr, 9, [0.1, 0.2]) == v
    assert len(fr._cache) == 1
    fresh = FieldRealization(spec.field, w, jumps, memo=False)
    assert eval_field(fresh, 9, [0.1, 0.2]) == v


@pytest.mark.skipif(not _backend.HAVE_NUMBA, reason="numba backend disabled")
def test_backends_agree_on_full_mix():
    spec = catalog("full-mix")
    w, jumps = _noise(spec, 64, 2)
    x = np.random.default_rng(0).normal(size=(65, 2))
    out = {}
    for b in ("numba", "numpy"):
        fr = FieldRealization(spec.field, w, jumps, backend=b)
        m = fr.at_nodes(np.arange(65))
        out[b] = (fr.values(m, x), fr.gradients(m, x), fr.hessians(m, x))
    for a, b in zip(out["numba"], out["numpy"]):
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-13)


def test_non_finite_field_is_reported():
    def F0(x, p):
        return x[:, 0]

    def Q(t, x, p):
        return np.where(t > 0.5, np.inf, 0.0) * x[:, 0]

    fr = FieldRealization(FieldCoefficients(1, 1, F0, Q=Q), sample_wiener(TimeGrid(1.0, 4), 1, 0),
                          MarkedJumpStream.empty(1.0))
    with pytest.raises(ContractViolationError, match="Q"):
        eval_field(fr, 4, [1.0])


def test_query_validation():
    spec = catalog("full-mix")
    w, jumps = _noise(spec, 4, 0)
    fr = FieldRealization(spec.field, w, jumps)
    with pytest.raises(ValueError):
        fr.values(fr.at_nodes([0]), [[1.0, 2.0, 3.0]])
    with pytest.raises(IndexError):
        fr.at_nodes([5])
    with pytest.raises(ValueError):
        fr.values(fr.at_nodes([0]), [[np.nan, 0.0]])
    with pytest.raises(ValueError):
        FieldRealization(spec.field, sample_wiener(TimeGrid(1.0, 4), 1, 0), jumps)
