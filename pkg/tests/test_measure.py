import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hgasket import gasket, measure
from hgasket.measure import TauNormalization

import oracle

mats = arrays(float, (2, 2), elements=st.floats(-10, 10))


def test_ruelle_identity_against_exact_value():
    assert oracle.BETA == oracle.R(3, 5)
    assert oracle.ruelle(oracle.sp.eye(2)) == oracle.R(3, 5) * oracle.sp.eye(2)
    assert np.abs(measure.ruelle_apply(np.eye(2)) - 0.6 * np.eye(2)).max() <= 1e-14


def test_ruelle_zero():
    assert np.array_equal(measure.ruelle_apply(np.zeros((2, 2))), np.zeros((2, 2)))


@given(mats, mats)
def test_ruelle_linear(a, b):
    lhs = measure.ruelle_apply(a + b)
    rhs = measure.ruelle_apply(a) + measure.ruelle_apply(b)
    assert np.allclose(lhs, rhs, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(mats)
def test_ruelle_matches_exact_operator(a):
    exact = oracle.ruelle(oracle.sp.Matrix(a.tolist()))
    assert np.allclose(measure.ruelle_apply(a), np.array(oracle.as_float(exact)), atol=1e-12)


def test_principal_eigenvalue():
    res = measure.principal_eigenvalue(1e-12, 100)
    assert abs(res.beta - 0.6) <= 1e-12
    assert np.abs(res.eigenmatrix - np.eye(2)).max() <= 1e-12
    assert res.residual <= 1e-12
    assert res.iterations <= 3
    with pytest.raises(ValueError):
        measure.principal_eigenvalue(0.0, 10)


def test_tau_examples_against_exact_values():
    root = measure.tau_cell(())
    assert np.allclose(root.tau, 0.5 * np.eye(2), atol=1e-15) and root.kappa == pytest.approx(1.0, abs=1e-15)
    for i in gasket.SYMBOLS:
        assert measure.kappa_cell((i,)) == pytest.approx(1 / 3, abs=1e-15)
    assert oracle.kappa((1, 1)) == oracle.R(41, 225)
    assert oracle.kappa((1, 2)) == oracle.kappa((1, 3)) == oracle.R(17, 225)
    assert measure.kappa_cell((1, 1)) == pytest.approx(41 / 225, abs=1e-15)
    assert measure.kappa_cell((1, 2)) == pytest.approx(17 / 225, abs=1e-15)
    assert measure.kappa_cell((1, 3)) == pytest.approx(17 / 225, abs=1e-15)


@pytest.mark.parametrize("w", [(2, 3, 1), (3, 3, 2, 1), (1, 2, 1, 3, 2)])
def test_tau_cell_matches_exact_matrix(w):
    assert np.allclose(measure.tau_cell(w).tau, oracle.as_float(oracle.tau(w)), atol=1e-15)


def test_normalization_parameter():
    with pytest.raises(ValueError):
        TauNormalization(0.0)
    t = measure.tau_cell((2, 1), TauNormalization(1.0))
    assert np.allclose(t.tau, 2 * measure.tau_cell((2, 1)).tau)


@pytest.mark.parametrize("depth", range(0, 11))
def test_telescoping(depth):
    tau, kappa = measure.tau_at_depth(depth)
    assert np.linalg.norm(tau.sum(axis=0) - 0.5 * np.eye(2)) <= 1e-10
    assert abs(kappa.sum() - 1) <= 1e-9


@given(st.lists(st.sampled_from(gasket.SYMBOLS), max_size=10).map(tuple))
def test_children_sum_and_psd(w):
    parent = measure.tau_cell(w).tau
    kids = sum(measure.tau_cell(w + (j,)).tau for j in gasket.SYMBOLS)
    assert np.abs(kids - parent).max() <= 1e-12
    assert np.linalg.eigvalsh(parent).min() >= -1e-14
    assert np.allclose(parent, parent.T)


def test_psd_at_depth_8():
    tau, kappa = measure.tau_at_depth(8)
    assert np.linalg.eigvalsh(tau).min() >= -1e-14
    assert np.allclose(kappa, np.trace(tau, axis1=1, axis2=2))


def test_pushforward_examples():
    depth3 = list(itertools.product(gasket.SYMBOLS, repeat=3))
    depth2 = list(itertools.product(gasket.SYMBOLS, repeat=2))
    assert measure.verify_pushforward((), depth3) == 0.0
    assert measure.verify_pushforward((1,), depth3) <= 1e-12
    assert measure.verify_pushforward((2, 3), depth2) <= 1e-12


def test_max_mass_strictly_decreasing():
    maxima = [measure.tau_at_depth(l)[1].max() for l in range(13)]
    assert all(b < a for a, b in zip(maxima, maxima[1:]))


def test_child_probabilities():
    lin = gasket.linear_parts(0)
    assert np.allclose(measure.child_probabilities(lin), 1 / 3, atol=1e-15)
    lin = gasket.linear_parts(5)
    p = measure.child_probabilities(lin)
    assert np.abs(p.sum(axis=1) - 1).max() <= 1e-14


def test_sampler_deterministic_and_shaped():
    a = measure.sample_kappa(11, 7, 50)
    b = measure.sample_kappa(11, 7, 50)
    assert a.shape == (50, 7) and a.dtype == np.int8
    assert np.array_equal(a, b)
    assert not np.array_equal(a, measure.sample_kappa(12, 7, 50))


def test_sampler_conditional_on_prefix():
    n = 200_000
    prefix = (2, 3)
    first = measure.sample_kappa(3, 1, n, prefix=prefix)[:, 0]
    freq = np.bincount(first, minlength=4)[1:] / n
    exact = np.array([float(oracle.kappa(prefix + (j,)) / oracle.kappa(prefix)) for j in (1, 2, 3)])
    assert np.all(np.abs(freq - exact) <= 4 * np.sqrt(exact * (1 - exact) / n))


def test_sampler_depth2_frequencies():
    n = 10**6
    words = measure.sample_kappa(2024, 2, n)
    idx = (words[:, 0].astype(int) - 1) * 3 + (words[:, 1] - 1)
    freq = np.bincount(idx, minlength=9) / n
    exact = np.array([float(oracle.kappa(w)) for w in itertools.product((1, 2, 3), repeat=2)])
    se = np.sqrt(exact * (1 - exact) / n)
    assert np.all(np.abs(freq - exact) <= 4 * se)


def test_ergodic_average_of_F_orbits():
    # kappa is F-invariant: the visit frequency of a fixed cell by F^k(x),
    # x ~ kappa, is kappa of that cell for every k
    n = 10**5
    words = measure.sample_kappa(5, 20, n)
    lin, tr = gasket.affine_parts_of(words)
    pts = gasket.centroids(lin, tr)
    steps = np.arange(n) % 6
    for k in range(6):
        pts[steps > k] = gasket.apply_F_batch(pts[steps > k])[0]
    codes = gasket.point_to_code_batch(pts, 2)
    hit = (codes[:, 0] == 1) & (codes[:, 1] == 2)
    p = 17 / 225
    assert abs(hit.mean() - p) <= 4 * np.sqrt(p * (1 - p) / n)


def test_sampler_long_words_bypass_guard():
    words = measure.sample_kappa(0, 60, 5, max_depth=None)
    assert words.shape == (5, 60)
    with pytest.raises(gasket.DepthError):
        measure.sample_kappa(0, 60, 5)
