import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lipgnn.filters import frequency_response
from lipgnn.graphs import (
    DynamicGraphSequence,
    GraphShiftOperator,
    generate_rgg_sequence,
    generate_sbm,
    graph_convolve,
    permute,
    read_edge_list,
    read_signal,
    write_edge_list,
    write_signal,
)

PATH2 = np.array([[0.0, 1.0], [1.0, 0.0]])


def random_operator(rng, n):
    a = rng.standard_normal((n, n))
    return GraphShiftOperator((a + a.T) / 2)


def test_identity_filter_leaves_signal():
    x = np.random.default_rng(0).standard_normal((5, 3))
    s = random_operator(np.random.default_rng(1), 5)
    np.testing.assert_array_equal(graph_convolve([1.0], s, x), x)


def test_single_shift_on_path():
    np.testing.assert_array_equal(graph_convolve([0.0, 1.0], PATH2, [1.0, 0.0]), [0.0, 1.0])


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 16), st.integers(1, 6), st.integers(0, 2**31 - 1))
def test_convolution_equals_spectral_filter(n, taps, seed):
    rng = np.random.default_rng(seed)
    s = random_operator(rng, n)
    h = rng.standard_normal(taps)
    x = rng.standard_normal(n)
    dec = s.spectrum
    spectral = dec.eigenvectors @ (frequency_response(h, dec.eigenvalues) * (dec.eigenvectors.T @ x))
    np.testing.assert_allclose(graph_convolve(h, s, x), spectral, atol=1e-9)


def test_small_spectral_example():
    rng = np.random.default_rng(5)
    s = random_operator(rng, 6)
    x = rng.standard_normal(6)
    v, lam = s.spectrum.eigenvectors, s.eigenvalues
    expect = v @ np.diag(1 + 2 * lam + 3 * lam**2) @ v.T @ x
    np.testing.assert_allclose(graph_convolve([1, 2, 3], s, x), expect, atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 12), st.integers(1, 5), st.integers(0, 2**31 - 1))
def test_convolution_linear(n, taps, seed):
    rng = np.random.default_rng(seed)
    s = random_operator(rng, n)
    h = rng.standard_normal(taps)
    x, y = rng.standard_normal((2, n, 2))
    a, b = rng.standard_normal(2)
    lhs = graph_convolve(h, s, a * x + b * y)
    rhs = a * graph_convolve(h, s, x) + b * graph_convolve(h, s, y)
    scale = max(1.0, np.abs(a * graph_convolve(h, s, x)).max(), np.abs(b * graph_convolve(h, s, y)).max())
    np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-12 * scale)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 12), st.integers(1, 5), st.integers(0, 2**31 - 1))
def test_convolution_permutation_equivariant(n, taps, seed):
    rng = np.random.default_rng(seed)
    s = random_operator(rng, n)
    h = rng.standard_normal(taps)
    x = rng.standard_normal((n, 2))
    perm = rng.permutation(n)
    sp, xp = permute(s, x, perm)
    ref = graph_convolve(h, s, x)[perm]
    scale = max(1.0, np.abs(ref).max())
    np.testing.assert_allclose(graph_convolve(h, sp, xp), ref, rtol=0, atol=1e-12 * scale)


def test_convolution_dimension_mismatch():
    with pytest.raises(ValueError):
        graph_convolve([1.0, 1.0], PATH2, np.ones(3))
    with pytest.raises(ValueError):
        graph_convolve([], PATH2, np.ones(2))


def test_permute_identity_and_swap():
    x = np.array([[1.0], [2.0]])
    s1, x1 = permute(PATH2, x, [0, 1])
    np.testing.assert_array_equal(s1.matrix, PATH2)
    np.testing.assert_array_equal(x1, x)
    s2, x2 = permute(PATH2, x, [1, 0])
    np.testing.assert_array_equal(s2.matrix, PATH2)
    np.testing.assert_array_equal(x2, [[2.0], [1.0]])


def test_permute_preserves_spectrum():
    rng = np.random.default_rng(2)
    s = random_operator(rng, 8)
    sp, _ = permute(s, np.zeros(8), rng.permutation(8))
    np.testing.assert_allclose(sp.eigenvalues, s.eigenvalues, atol=1e-9)


@pytest.mark.parametrize("perm", [[0, 0], [0, 2], [1]])
def test_permute_rejects_invalid(perm):
    with pytest.raises(ValueError):
        permute(PATH2, np.ones(2), perm)


def test_operator_rejects_asymmetric():
    with pytest.raises(ValueError):
        GraphShiftOperator(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_operator_kinds():
    lap = GraphShiftOperator.from_adjacency(PATH2, "laplacian")
    np.testing.assert_array_equal(lap.matrix, [[1.0, -1.0], [-1.0, 1.0]])
    a = np.array([[0, 2.0], [2.0, 0]])
    norm = GraphShiftOperator.from_adjacency(a, "normalized_adjacency")
    assert norm.lambda_max == pytest.approx(1.0)


def test_sbm_extremes():
    full = generate_sbm(4, 2, 1.0, 0.0, seed=0).matrix
    expect = np.array([[0, 1, 0, 0], [1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=float)
    np.testing.assert_array_equal(full, expect)
    assert not generate_sbm(6, 3, 0.0, 0.0, seed=0).matrix.any()


def test_sbm_density():
    n, c, p_in, p_out = 50, 5, 0.8, 0.1
    expected = (p_in * (n / c - 1) + p_out * (n - n / c)) / (n - 1)
    assert 0.15 <= expected <= 0.35
    a = generate_sbm(n, c, p_in, p_out, seed=7).matrix
    density = a.sum() / (n * (n - 1))
    assert 0.15 <= density <= 0.35
    assert abs(density - expected) < 0.05


def test_sbm_structure_and_determinism():
    a = generate_sbm(20, 4, 0.5, 0.2, seed=3).matrix
    b = generate_sbm(20, 4, 0.5, 0.2, seed=3).matrix
    np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(a, a.T)
    assert not np.diag(a).any()
    assert set(np.unique(a)) <= {0.0, 1.0}


@pytest.mark.parametrize("kwargs", [dict(p_in=1.5, p_out=0.1), dict(p_in=0.5, p_out=-0.1)])
def test_sbm_rejects_bad_probabilities(kwargs):
    with pytest.raises(ValueError):
        generate_sbm(10, 2, seed=0, **kwargs)


def test_sbm_rejects_uneven_communities():
    with pytest.raises(ValueError):
        generate_sbm(10, 3, 0.5, 0.1, seed=0)


def test_rgg_complete_and_empty():
    full = generate_rgg_sequence(12, np.sqrt(2.0), 4, 0.05, seed=1)
    for op in full:
        np.testing.assert_array_equal(op.matrix, 1.0 - np.eye(12))
    empty = generate_rgg_sequence(12, 1e-12, 4, 0.05, seed=1)
    assert all(not op.matrix.any() for op in empty)


def test_rgg_shape_and_determinism():
    seq = generate_rgg_sequence(30, 0.3, 10, 0.02, seed=4)
    assert len(seq) == 10 and all(op.matrix.shape == (30, 30) for op in seq)
    again = generate_rgg_sequence(30, 0.3, 10, 0.02, seed=4)
    for a, b in zip(seq, again):
        np.testing.assert_array_equal(a.matrix, b.matrix)
    assert seq.positions.shape == (10, 30, 2)
    assert seq.positions.min() >= 0 and seq.positions.max() <= 1


@pytest.mark.parametrize("kwargs", [dict(radius=0.0, steps=2), dict(radius=0.3, steps=0)])
def test_rgg_rejects_bad_arguments(kwargs):
    with pytest.raises(ValueError):
        generate_rgg_sequence(5, step_scale=0.1, seed=0, **kwargs)


def test_sequence_requires_uniform_size():
    with pytest.raises(ValueError):
        DynamicGraphSequence(())
    with pytest.raises(ValueError):
        DynamicGraphSequence((GraphShiftOperator(np.eye(2)), GraphShiftOperator(np.eye(3))))


def test_edge_list_round_trip(tmp_path):
    a = generate_sbm(12, 3, 0.6, 0.2, seed=2).matrix
    path = tmp_path / "g.edges"
    write_edge_list(path, a)
    lines = path.read_text().splitlines()
    n, m = map(int, lines[0].split())
    assert n == 12 and m == int(a.sum() / 2) == len(lines) - 1
    np.testing.assert_array_equal(read_edge_list(path), a)


def test_edge_list_rejects_bad_header(tmp_path):
    path = tmp_path / "g.edges"
    path.write_text("3 2\n0 1\n")
    with pytest.raises(ValueError):
        read_edge_list(path)


def test_signal_round_trip(tmp_path):
    x = np.random.default_rng(0).standard_normal((7, 3))
    write_signal(tmp_path / "x.csv", x)
    np.testing.assert_array_equal(read_signal(tmp_path / "x.csv"), x)
