"""Sparse symmetric-use multilinear maps."""

import numpy as np
import pytest

from odexpand import MultiLinearMap

from helpers import cvec, dense_apply, random_multilinear


def test_entries_merge_and_drop_zeros():
    G = MultiLinearMap(2, 2, ((0, (0, 1), 2.0), (0, (0, 1), 1.0), (1, (0, 0), 0.0)))
    assert G.entries == ((0, (0, 1), 3.0 + 0.0j),)


def test_entries_sorted_canonically():
    e1 = ((1, (1, 0), 1.0), (0, (0, 1), 2.0))
    e2 = ((0, (0, 1), 2.0), (1, (1, 0), 1.0))
    assert MultiLinearMap(2, 2, e1) == MultiLinearMap(2, 2, e2)


def test_call_matches_bruteforce():
    rng = np.random.default_rng(11)
    for _ in range(25):
        arity = int(rng.integers(1, 4))
        dim = int(rng.integers(1, 5))
        G = random_multilinear(rng, arity, dim, n_entries=6)
        args = [cvec(rng, dim) for _ in range(arity)]
        got = G(*args)
        np.testing.assert_allclose(got, dense_apply(G, args), rtol=1e-13, atol=1e-13)


def test_call_is_multilinear_in_each_slot():
    rng = np.random.default_rng(12)
    G = random_multilinear(rng, 3, 3, n_entries=8)
    x, y, z, w = (cvec(rng, 3) for _ in range(4))
    a = 0.7 - 1.3j
    lhs = G(x, a * y + w, z)
    rhs = a * G(x, y, z) + G(x, w, z)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12)


def test_scalar_power_is_plain_power():
    cube = MultiLinearMap.scalar_power(3)
    assert cube.arity == 3 and cube.dim == 1
    v = np.array([1.5 + 0.5j])
    np.testing.assert_allclose(cube(v, v, v), v**3)


def test_index_validation():
    with pytest.raises(ValueError):
        MultiLinearMap(2, 2, ((2, (0, 0), 1.0),))  # output index out of range
    with pytest.raises(ValueError):
        MultiLinearMap(2, 2, ((0, (0, 2), 1.0),))  # input index out of range
    with pytest.raises(ValueError):
        MultiLinearMap(2, 2, ((0, (0,), 1.0),))  # tuple length != arity
    with pytest.raises(ValueError):
        MultiLinearMap(0, 2)  # arity must be >= 1


def test_is_real_detects_imaginary_entries():
    G = MultiLinearMap(2, 1, ((0, (0, 0), 1.0),))
    assert G.is_real()
    H = MultiLinearMap(2, 1, ((0, (0, 0), 1.0 + 1e-6j),))
    assert not H.is_real()
    assert H.is_real(tol=1e-3)


def test_call_arity_mismatch():
    G = MultiLinearMap.scalar_power(2)
    v = np.array([1.0 + 0j])
    with pytest.raises((TypeError, ValueError)):
        G(v)
