import numpy as np
import pytest
from hypothesis import given, strategies as st

from fern.hat_basis import (
    HatParams,
    basis_matrix,
    hat_eval_piecewise,
    hat_eval_relu,
    hat_grad,
    pwl_from_slopes,
)

EPS = np.finfo(float).eps


def scale(a, h, x):
    return np.maximum(1.0, np.abs(x) + np.abs(a) + np.abs(h))


def test_piecewise_peak_outside_and_edge_values():
    assert hat_eval_piecewise(0.5, 0.05, 0.5) == pytest.approx(0.05, abs=4 * EPS)
    assert hat_eval_piecewise(0.5, 0.05, 0.7) == 0.0
    assert hat_eval_piecewise(0.5, 0.05, 0.475) == pytest.approx(0.025, abs=4 * EPS)


def test_relu_matches_stated_examples():
    assert hat_eval_relu(0.5, 0.05, 0.5) == pytest.approx(0.05, abs=4 * EPS)
    assert hat_eval_relu(0.0, 1.0, -0.5) == pytest.approx(0.5, abs=4 * EPS)


def test_nonpositive_width_rejected():
    for fn in (hat_eval_piecewise, hat_eval_relu, hat_grad):
        with pytest.raises(ValueError):
            fn(0.0, 0.0, 0.0)
        with pytest.raises(ValueError):
            fn(0.0, -0.1, 0.0)


def test_relu_equals_piecewise_on_random_triples():
    rng = np.random.default_rng(123)
    a = rng.uniform(-3, 3, 100_000)
    h = rng.uniform(1e-4, 2.0, 100_000)
    x = rng.uniform(-4, 4, 100_000)
    dev = np.abs(hat_eval_relu(a, h, x) - hat_eval_piecewise(a, h, x))
    assert np.max(dev / (EPS * scale(a, h, x))) <= 4.0


def test_support_left_tail_is_exactly_zero():
    rng = np.random.default_rng(7)
    a = rng.uniform(-2, 2, 10_000)
    h = rng.uniform(1e-4, 1.0, 10_000)
    x = a - h - rng.uniform(0, 3, 10_000)
    assert np.all(hat_eval_relu(a, h, x) == 0.0)


def test_support_right_tail_cancels_to_rounding():
    # beyond x = a+h the three ReLU terms cancel; in floats the residue stays
    # within the assembly tolerance rather than being bitwise zero
    rng = np.random.default_rng(8)
    a = rng.uniform(-2, 2, 10_000)
    h = rng.uniform(1e-4, 1.0, 10_000)
    x = a + h + rng.uniform(0, 3, 10_000)
    val = np.abs(hat_eval_relu(a, h, x))
    assert np.max(val / (EPS * scale(a, h, x))) <= 4.0
    assert np.all(hat_eval_piecewise(a, h, x) == 0.0)


def test_peak_value_equals_width():
    rng = np.random.default_rng(9)
    a = rng.uniform(-2, 2, 1000)
    h = rng.uniform(1e-4, 1.0, 1000)
    dev = np.abs(hat_eval_relu(a, h, a) - h)
    assert np.max(dev / (EPS * scale(a, h, a))) <= 4.0


@given(
    st.floats(-10, 10),
    st.floats(1e-4, 5.0),
    st.floats(-15, 15),
)
def test_relu_piecewise_agreement_property(a, h, x):
    dev = abs(hat_eval_relu(a, h, x) - hat_eval_piecewise(a, h, x))
    assert dev <= 4.0 * EPS * max(1.0, abs(x) + abs(a) + h)


def test_grad_examples_on_both_edges():
    assert hat_grad(0.5, 0.05, 0.48) == (-1.0, 1.0, 1.0)
    assert hat_grad(0.5, 0.05, 0.52) == (1.0, 1.0, -1.0)


def test_grad_kink_convention_uses_zero_relu_slope():
    # binary-exact knots so each ReLU argument is exactly zero at its kink:
    # the kinked term contributes nothing, the others their one-sided slopes
    assert hat_grad(0.5, 0.05, 0.5) == (-1.0, 1.0, 1.0)
    assert hat_grad(0.5, 0.25, 0.25) == (0.0, 0.0, 0.0)
    assert hat_grad(0.5, 0.25, 0.75) == (1.0, 1.0, -1.0)


def test_grad_matches_central_differences_away_from_kinks():
    rng = np.random.default_rng(11)
    checked = 0
    while checked < 300:
        a = rng.uniform(-1, 1)
        h = rng.uniform(0.05, 1.0)
        x = rng.uniform(-2, 2)
        if min(abs(x - (a - h)), abs(x - a), abs(x - (a + h))) < 1e-3:
            continue
        checked += 1
        d_da, d_dh, d_dx = hat_grad(a, h, x)
        step = 1e-7
        fd_a = (hat_eval_relu(a + step, h, x) - hat_eval_relu(a - step, h, x)) / (2 * step)
        fd_h = (hat_eval_relu(a, h + step, x) - hat_eval_relu(a, h - step, x)) / (2 * step)
        fd_x = (hat_eval_relu(a, h, x + step) - hat_eval_relu(a, h, x - step)) / (2 * step)
        for got, want in ((d_da, fd_a), (d_dh, fd_h), (d_dx, fd_x)):
            assert got == pytest.approx(want, rel=1e-6, abs=1e-6)


def test_pwl_examples():
    assert pwl_from_slopes([1, -1], [0.5], 1.0) == pytest.approx(0.0, abs=1e-15)
    assert pwl_from_slopes([2], [], 0.3) == pytest.approx(0.6)
    assert pwl_from_slopes([1.5, -2.0, 0.5], [0.2, 0.7], 0.0) == 0.0


def test_pwl_rejects_unsorted_nodes():
    with pytest.raises(ValueError):
        pwl_from_slopes([1, 2, 3], [0.5, 0.4], 0.1)
    with pytest.raises(ValueError):
        pwl_from_slopes([1, 2], [0.5, 0.6], 0.1)


def test_pwl_matches_cumulative_integration_of_slopes():
    rng = np.random.default_rng(21)
    for _ in range(20):
        n = rng.integers(1, 7)
        slopes = rng.uniform(-3, 3, n)
        nodes = np.sort(rng.uniform(0.05, 0.95, n - 1)) if n > 1 else np.empty(0)
        xs = np.linspace(0, 1, 10_000)
        # oracle: integrate the piecewise-constant slope field from 0
        edges = np.concatenate([[0.0], nodes, [1.0]])
        seg = np.clip(np.searchsorted(edges, xs, side="right") - 1, 0, n - 1)
        base = np.concatenate([[0.0], np.cumsum(slopes[:-1] * np.diff(edges)[:-1])]) if n > 1 else [0.0]
        oracle = np.array([base[s] + slopes[s] * (x - edges[s]) for s, x in zip(seg, xs)])
        got = pwl_from_slopes(slopes, nodes, xs)
        assert np.allclose(got, oracle, atol=1e-10)


def test_pwl_exactly_linear_between_nodes():
    slopes = [0.7, -1.3, 2.1]
    nodes = [0.3, 0.6]
    xs = np.linspace(0.31, 0.59, 101)
    vals = pwl_from_slopes(slopes, nodes, xs)
    second_diff = np.diff(vals, 2)
    assert np.max(np.abs(second_diff)) < 1e-12


def test_basis_matrix_examples_and_oracle():
    params = HatParams([0.5], [0.5])
    col = basis_matrix(params, [0.0, 0.5, 1.0])
    assert np.allclose(col[:, 0], [0.0, 0.5, 0.0], atol=1e-15)

    far = HatParams([10.0, 12.0], [0.5, 0.25])
    assert np.all(basis_matrix(far, np.linspace(0, 1, 7)) == 0.0)

    rng = np.random.default_rng(3)
    params = HatParams(rng.uniform(0, 1, 9), rng.uniform(0.01, 0.4, 9))
    xs = rng.uniform(-0.2, 1.2, 33)
    mat = basis_matrix(params, xs)
    for m, x in enumerate(xs):
        for k in range(9):
            want = hat_eval_piecewise(params.centers[k], params.supports[k], x)
            assert mat[m, k] == pytest.approx(want, abs=4 * EPS * scale(params.centers[k], params.supports[k], x))


def test_hat_params_validation():
    with pytest.raises(ValueError):
        HatParams([0.1, 0.2], [0.05])
    with pytest.raises(ValueError):
        HatParams([], [])
    with pytest.raises(ValueError):
        HatParams([0.1], [0.0])
    with pytest.raises(ValueError):
        HatParams([np.nan], [0.1])


def test_clip_supports_enforces_floor():
    params = HatParams([0.1, 0.5, 0.9], [0.3, 0.2, 0.1])
    params.supports[:] = [1e-7, 0.2, 5e-5]
    params.clip_supports(1e-4)
    assert np.all(params.supports >= 1e-4)
    assert params.supports[1] == 0.2
