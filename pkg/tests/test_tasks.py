import numpy as np
import pytest

from lipgnn.constraints import harvest_interval
from lipgnn.graphs import DynamicGraphSequence, GraphShiftOperator, generate_rgg_sequence, generate_sbm
from lipgnn.graphs import sbm_communities
from lipgnn.tasks import gen_dynamic_task, gen_source_localization, read_dataset, write_dataset


def test_isolated_communities_are_perfectly_separable():
    ds = gen_source_localization(n=10, communities=2, p_in=0.8, p_out=0.0, num_samples=200, T=5, seed=1)
    groups = ds.groups
    mass = np.stack([np.abs(ds.x[:, groups == c, 0]).sum(axis=1) for c in range(2)], axis=1)
    assert np.all(mass[np.arange(200), 1 - ds.y] == 0.0)
    assert np.mean(np.argmax(mass, axis=1) == ds.y) == 1.0


def test_single_step_signal_supported_on_neighbors():
    ds = gen_source_localization(n=20, communities=4, num_samples=50, T=1, seed=2)
    a = ds.adjacency[0]
    for i in range(50):
        s = ds.sources[i]
        np.testing.assert_array_equal(np.nonzero(ds.x[i, :, 0])[0], np.nonzero(a[:, s])[0])
        np.testing.assert_allclose(ds.x[i, :, 0], a[:, s] / ds.scale, rtol=1e-15)


def test_class_balance():
    ds = gen_source_localization(num_samples=2000, seed=3)
    counts = np.bincount(ds.y, minlength=5)
    # binomial(2000, 1/5): sd ~ 17.9, allow 4 sd
    assert np.all(np.abs(counts - 400) <= 4 * np.sqrt(2000 * 0.2 * 0.8))


def test_labels_are_source_communities():
    ds = gen_source_localization(n=20, communities=4, num_samples=30, seed=0)
    np.testing.assert_array_equal(ds.y, sbm_communities(20, 4)[ds.sources])
    assert ds.num_classes == 4 and ds.is_static


def test_normalized_operator_has_unit_norm():
    ds = gen_source_localization(seed=0)
    assert np.linalg.norm(ds.S.matrix, 2) == pytest.approx(1.0, rel=1e-12)
    assert ds.S.lambda_max <= 1.0 + 1e-12


def test_laplacian_operator_normalized():
    ds = gen_source_localization(n=20, communities=4, num_samples=10, seed=0, kind="laplacian")
    assert np.linalg.norm(ds.S.matrix, 2) == pytest.approx(1.0, rel=1e-12)
    assert ds.S.kind == "laplacian"


def test_diffusion_spectral_identity():
    ds = gen_source_localization(n=20, communities=4, num_samples=40, T=6, seed=5)
    dec = ds.S.spectrum
    v, lam = dec.eigenvectors, dec.eigenvalues
    for i in range(40):
        e = np.zeros(20)
        e[ds.sources[i]] = 1.0
        spectral = v @ (lam ** ds.times[i] * (v.T @ e))
        np.testing.assert_allclose(ds.x[i, :, 0], spectral, atol=1e-9)


def test_window_channels():
    ds = gen_source_localization(n=10, communities=2, num_samples=20, T=4, seed=6, window=3)
    s = ds.S.matrix
    for i in range(20):
        e = np.zeros(10)
        e[ds.sources[i]] = 1.0
        for c in range(3):
            t = max(ds.times[i] - 2 + c, 0)
            np.testing.assert_allclose(ds.x[i, :, c], np.linalg.matrix_power(s, t) @ e, atol=1e-14)


def test_splits_partition_samples():
    ds = gen_source_localization(num_samples=101, seed=0)
    allidx = np.concatenate([ds.splits[k] for k in ("train", "val", "test")])
    np.testing.assert_array_equal(np.sort(allidx), np.arange(101))
    assert ds.splits["train"].size == 61


def test_seeded_generation_identical():
    a = gen_source_localization(num_samples=100, seed=4)
    b = gen_source_localization(num_samples=100, seed=4)
    np.testing.assert_array_equal(a.x, b.x)
    np.testing.assert_array_equal(a.y, b.y)
    c = gen_source_localization(num_samples=100, seed=5)
    assert not np.array_equal(a.x, c.x)


@pytest.mark.parametrize("kwargs", [dict(p_in=1.2), dict(T=0), dict(num_samples=0), dict(communities=5)])
def test_invalid_parameters_rejected(kwargs):
    base = dict(n=12, communities=4, num_samples=10)
    base.update(kwargs)
    with pytest.raises(ValueError):
        gen_source_localization(**base)


def test_dynamic_length_one_reduces_to_static():
    sbm = generate_sbm(20, 4, 0.8, 0.1, seed=7)
    static = gen_source_localization(n=20, communities=4, p_in=0.8, p_out=0.1,
                                     num_samples=60, T=5, seed=7)
    dyn = gen_dynamic_task(DynamicGraphSequence((GraphShiftOperator(sbm.matrix),)), 60, 5, 7, groups=4)
    np.testing.assert_array_equal(dyn.x, static.x)
    np.testing.assert_array_equal(dyn.y, static.y)
    for k in static.splits:
        np.testing.assert_array_equal(dyn.splits[k], static.splits[k])


def test_dynamic_samples_live_on_their_step_graph():
    seq = generate_rgg_sequence(15, 0.45, 5, 0.05, seed=3)
    ds = gen_dynamic_task(seq, 80, 3, seed=1, groups=3)
    assert len(ds.operators) == 5 and not ds.is_static
    for i in range(80):
        s = ds.operators[ds.steps[i]].matrix
        e = np.zeros(15)
        e[ds.sources[i]] = 1.0
        np.testing.assert_allclose(ds.x[i, :, 0], np.linalg.matrix_power(s, ds.times[i]) @ e, atol=1e-13)
    shifts, _, _ = ds.subset("test")
    assert shifts.shape == (ds.splits["test"].size, 15, 15)
    lo, hi = harvest_interval(ds.operators)
    for op in ds.operators:
        assert lo <= op.eigenvalues.min() and op.eigenvalues.max() <= hi


def test_dynamic_generation_deterministic():
    seq = generate_rgg_sequence(12, 0.5, 4, 0.05, seed=2)
    a = gen_dynamic_task(seq, 30, 3, seed=0)
    b = gen_dynamic_task(generate_rgg_sequence(12, 0.5, 4, 0.05, seed=2), 30, 3, seed=0)
    np.testing.assert_array_equal(a.x, b.x)
    np.testing.assert_array_equal(a.steps, b.steps)


@pytest.mark.parametrize("dynamic", [False, True])
def test_dataset_round_trip(tmp_path, dynamic):
    if dynamic:
        ds = gen_dynamic_task(generate_rgg_sequence(12, 0.5, 3, 0.05, seed=2), 25, 3, seed=0, groups=3)
    else:
        ds = gen_source_localization(n=10, communities=2, num_samples=25, seed=1, window=2)
    write_dataset(tmp_path, ds)
    assert {"signals.csv", "labels.csv", "manifest.json", "graph_0000.edges"} <= {p.name for p in tmp_path.iterdir()}
    back = read_dataset(tmp_path)
    np.testing.assert_array_equal(back.x, ds.x)
    np.testing.assert_array_equal(back.y, ds.y)
    np.testing.assert_array_equal(back.steps, ds.steps)
    for a, b in zip(back.operators, ds.operators):
        np.testing.assert_array_equal(a.matrix, b.matrix)
    for k in ds.splits:
        np.testing.assert_array_equal(back.splits[k], ds.splits[k])
