import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from wardnet.simplex import gradient_mapping_norm, project_columns, project_simplex, projected_gradient_descent

finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)


def test_projection_examples():
    np.testing.assert_array_equal(project_simplex([0.2, 0.8]), [0.2, 0.8])
    np.testing.assert_array_equal(project_simplex([2.0, 0.0]), [1.0, 0.0])
    np.testing.assert_allclose(project_simplex([0.6, 0.6]), [0.5, 0.5], atol=1e-15)


def test_projection_rejects_nonfinite():
    with pytest.raises(FloatingPointError):
        project_simplex([np.nan, 1.0])


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, st.integers(1, 8), elements=finite))
def test_projection_is_feasible_idempotent_and_optimal(v):
    u = project_simplex(v)
    assert np.all(u >= 0)
    assert abs(u.sum() - 1.0) <= 1e-14 * max(1, len(v))
    np.testing.assert_allclose(project_simplex(u), u, atol=1e-14)
    # obtuse-angle characterization: <v - u, w - u> <= 0 for every vertex w
    for k in range(len(v)):
        w = np.zeros(len(v))
        w[k] = 1.0
        assert np.dot(v - u, w - u) <= 1e-9 * (1 + np.abs(v).max())


def test_columnwise_projection_matches_vector_projection():
    rng = np.random.default_rng(0)
    m = rng.normal(size=(5, 7)) * 3
    cols = np.stack([project_simplex(m[:, c]) for c in range(7)], axis=1)
    np.testing.assert_array_equal(project_columns(m), cols)


def test_gradient_mapping_vanishes_at_constrained_minimum():
    x = np.array([[1.0], [0.0]])
    g = np.array([[0.0], [5.0]])  # moving mass to row 1 only increases the objective
    assert gradient_mapping_norm([x], [g]) == 0.0


def test_pgd_quadratic_on_simplex_is_monotone_and_exact():
    target = np.array([[0.7], [0.5], [-0.2]])
    fun = lambda p: float(np.sum((p[0] - target) ** 2))
    grad = lambda p: [2 * (p[0] - target)]
    res = projected_gradient_descent(fun, grad, [np.full((3, 1), 1 / 3)], keep_history=True)
    assert res.converged and res.monotone
    np.testing.assert_allclose(res.params[0][:, 0], project_simplex(target[:, 0]), atol=1e-9)
    assert all(b <= a + 8 * np.finfo(float).eps * max(1, a) for a, b in zip(res.history, res.history[1:]))


def test_pgd_argument_validation():
    with pytest.raises(ValueError):
        projected_gradient_descent(lambda p: 0.0, lambda p: [p[0] * 0], [np.ones((2, 1)) / 2], step0=0)
    with pytest.raises(ValueError):
        projected_gradient_descent(lambda p: 0.0, lambda p: [p[0] * 0], [np.ones((2, 1)) / 2], tol=0)
