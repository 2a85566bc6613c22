import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lipgnn.filters import (
    bank_response,
    build_vandermonde,
    frequency_response,
    integral_lipschitz_constant,
    integral_lipschitz_transform,
    lipschitz_constant,
    max_abs_response,
    write_response_profile,
)
from lipgnn.gnn import init_model
from lipgnn.graphs import GraphShiftOperator, graph_convolve


def test_horner_examples():
    assert frequency_response([1.0, 2.0, 3.0], 2.0) == 17.0
    assert frequency_response([4.0], 123.0) == 4.0
    np.testing.assert_array_equal(frequency_response([0.0, 1.0], [-1.0, 0.5]), [-1.0, 0.5])


def test_response_matches_power_sum():
    rng = np.random.default_rng(0)
    h = rng.standard_normal(5)
    lam = rng.uniform(-1, 1, 20)
    direct = sum(hk * lam**k for k, hk in enumerate(h))
    np.testing.assert_allclose(frequency_response(h, lam), direct, rtol=1e-13, atol=1e-14)


def test_bank_response_shape_and_values():
    bank = np.array([[[1.0, 0.0], [0.0, 2.0]], [[1.0, 1.0], [-1.0, 0.0]]])
    lam = np.array([0.0, 3.0])
    out = bank_response(bank, lam)
    assert out.shape == (2, 2, 2)
    np.testing.assert_array_equal(out[0, 1], [0.0, 6.0])
    np.testing.assert_array_equal(out[1, 0], [1.0, 4.0])


def test_empty_filter_rejected():
    with pytest.raises(ValueError):
        frequency_response([], 1.0)


def test_vandermonde_rows():
    vde = build_vandermonde([2.0, -1.0, 0.0], 3)
    np.testing.assert_array_equal(vde.matrix, [[1, 2, 4], [1, -1, 1], [1, 0, 0]])
    assert vde.taps == 3


def test_vandermonde_too_few_points():
    with pytest.raises(ValueError, match="at least K=4"):
        build_vandermonde([0.0, 1.0], 4)


def test_lipschitz_identity_filter():
    s = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert lipschitz_constant([1.0], s) == 1.0
    # H(lam) = lam on spectrum {-1, 1}
    assert lipschitz_constant([0.0, 1.0], s) == 1.0
    assert lipschitz_constant([1.0, 1.0], s) == 2.0


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 8), st.integers(1, 5), st.integers(0, 2**31 - 1))
def test_lipschitz_attained_on_eigenvector(n, taps, seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n))
    s = GraphShiftOperator((a + a.T) / 2)
    h = rng.standard_normal(taps)
    lip = lipschitz_constant(h, s)
    dec = s.spectrum
    i = int(np.argmax(np.abs(frequency_response(h, dec.eigenvalues))))
    v = dec.eigenvectors[:, i]
    ratio = np.linalg.norm(graph_convolve(h, s, v)) / np.linalg.norm(v)
    assert ratio == pytest.approx(lip, rel=1e-8)
    for _ in range(20):
        x, y = rng.standard_normal((2, n))
        d = np.linalg.norm(x - y)
        assert np.linalg.norm(graph_convolve(h, s, x) - graph_convolve(h, s, y)) <= lip * d * (1 + 1e-10)


def test_max_abs_response_over_filters():
    model = init_model([1, 2], 2, 2, seed=0)
    model.layers[0][0, 0] = [1.0, 0.0]
    model.layers[0][0, 1] = [0.0, 2.0]
    assert max_abs_response(model, 3.0) == 6.0
    np.testing.assert_array_equal(max_abs_response(model, np.array([0.0, 0.25])), [1.0, 1.0])


def test_max_abs_response_accepts_layer_list():
    layers = [np.zeros((1, 1, 3)), np.array([[[0.0, 0.0, -1.0]]])]
    assert max_abs_response(layers, 2.0) == 4.0


def test_integral_lipschitz_example():
    np.testing.assert_array_equal(integral_lipschitz_transform([1.0, 1.0, 1.0]), [0.0, 1.0, 2.0])
    # lam H'(lam) = lam + 2 lam^2 = 10 at lam = 2
    assert frequency_response(integral_lipschitz_transform([1.0, 1.0, 1.0]), 2.0) == 10.0
    assert integral_lipschitz_constant([1.0, 1.0, 1.0], [-1.0, 2.0]) == 10.0


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 6), st.floats(-1.5, 1.5), st.integers(0, 2**31 - 1))
def test_integral_lipschitz_is_lambda_derivative(taps, lam, seed):
    h = np.random.default_rng(seed).standard_normal(taps)
    step = 1e-5
    deriv = (frequency_response(h, lam + step) - frequency_response(h, lam - step)) / (2 * step)
    got = frequency_response(integral_lipschitz_transform(h), lam)
    assert got == pytest.approx(lam * deriv, rel=1e-7, abs=1e-8)


def test_response_profile_csv(tmp_path):
    path = tmp_path / "p.csv"
    write_response_profile(path, [0.0, 0.5], [1.0, 2.5])
    assert path.read_text().splitlines() == ["lambda,H_star", "0.0,1.0", "0.5,2.5"]
