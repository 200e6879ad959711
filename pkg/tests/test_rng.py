import numpy as np

from decom_alm import rng


def test_same_key_same_stream():
    a = rng.normals(1, rng.DOMAIN_SOLVE, (3, 4), 100)
    b = rng.normals(1, rng.DOMAIN_SOLVE, (3, 4), 100)
    np.testing.assert_array_equal(a, b)


def test_keys_and_domains_separate_streams():
    base = rng.normals(1, rng.DOMAIN_SOLVE, (3, 4), 100)
    assert not np.array_equal(base, rng.normals(1, rng.DOMAIN_SOLVE, (3, 5), 100))
    assert not np.array_equal(base, rng.normals(1, rng.DOMAIN_SIMULATE, (3, 4), 100))
    assert not np.array_equal(base, rng.normals(2, rng.DOMAIN_SOLVE, (3, 4), 100))


def test_prefix_consistent_shapes():
    long = rng.normals(7, rng.DOMAIN_MESH, (0,), 1000)
    short = rng.normals(7, rng.DOMAIN_MESH, (0,), 10)
    np.testing.assert_array_equal(long[:10], short)
