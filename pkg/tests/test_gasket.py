import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hgasket import gasket
from hgasket.gasket import DepthError, DomainError

import oracle

A, B, C = gasket.VERTICES
symbols = st.sampled_from(gasket.SYMBOLS)
words = st.lists(symbols, max_size=14).map(tuple)
bary = st.tuples(*(st.floats(0.01, 1.0),) * 3).map(lambda t: np.array(t) / sum(t))


def tri_point(b):
    return b @ gasket.VERTICES


def test_branch_matrices_match_exact_values():
    for i in gasket.SYMBOLS:
        assert np.allclose(gasket.branch(i).linear, oracle.as_float(oracle.T[i]), atol=1e-15)


@pytest.mark.parametrize("i", gasket.SYMBOLS)
def test_branch_fixes_its_vertex(i):
    p = gasket.VERTICES[i - 1]
    assert np.allclose(gasket.branch(i)(p), p, atol=1e-15)


def test_junction_points_exact():
    c_exact = oracle.psi(1, oracle.P[2])
    assert oracle.psi(2, oracle.P[1]).equals(c_exact)
    c = gasket.branch(1)(B)
    assert np.allclose(c, [3 / 5, 1 / (5 * np.sqrt(3))], atol=1e-15)
    assert np.allclose(c, [float(c_exact[0]), float(c_exact[1])], atol=1e-15)
    assert np.allclose(gasket.branch(2)(A), c, atol=1e-14)
    assert np.allclose(gasket.branch(1)(C), gasket.branch(3)(A), atol=1e-14)
    assert np.allclose(gasket.branch(2)(C), [0.8, 0.0], atol=1e-14)
    assert np.allclose(gasket.branch(3)(B), [0.8, 0.0], atol=1e-14)


def test_compose_word_examples():
    ident = gasket.compose_word(())
    assert np.array_equal(ident.linear, np.eye(2)) and np.array_equal(ident.translation, np.zeros(2))
    assert np.allclose(gasket.compose_word((1, 1)).linear, np.diag([9 / 25, 1 / 25]), atol=1e-15)
    one = gasket.compose_word((1,))
    assert np.allclose(one.linear, gasket.branch(1).linear) and np.allclose(one.translation, gasket.branch(1).translation)


@given(st.lists(symbols, min_size=1, max_size=8).map(tuple))
def test_compose_word_matches_exact_product(w):
    assert np.allclose(gasket.compose_word(w).linear, oracle.as_float(oracle.word_linear(w)), atol=1e-14)


@given(words, bary)
def test_compose_word_is_left_to_right(w, b):
    p = tri_point(b)
    q = p
    for s in reversed(w):
        q = gasket.branch(s)(q)
    assert np.allclose(gasket.compose_word(w)(p), q, atol=1e-14)


def test_cell_examples():
    assert np.allclose(gasket.cell(()).vertices, [[0, 0], [1, 1 / np.sqrt(3)], [1, -1 / np.sqrt(3)]])
    verts = gasket.cell((2,)).vertices
    assert np.min(np.linalg.norm(verts - [0.8, 0.0], axis=1)) < 1e-14
    assert gasket.cell((1, 1, 1)).diameter <= (2 / np.sqrt(3)) * 0.6**3


@given(words)
def test_cell_diameter_bound(w):
    assert gasket.cell(w).diameter <= gasket.diameter_bound(len(w)) + 1e-14


@settings(max_examples=200)
@given(st.lists(symbols, max_size=12).map(tuple), symbols)
def test_nesting(w, j):
    parent = gasket.cell(w).vertices
    child = gasket.cell(w + (j,)).vertices
    # barycentric coordinates of the child's vertices in the parent triangle
    m = np.column_stack([parent[1] - parent[0], parent[2] - parent[0]])
    lb = np.linalg.solve(m, (child - parent[0]).T).T
    lam = np.column_stack([1 - lb.sum(axis=1), lb])
    # coordinates carry absolute rounding ~1e-16; in barycentric units that
    # is amplified by 1/smallest singular value of the edge matrix
    assert lam.min() >= -1e-14 / np.linalg.svd(m, compute_uv=False)[-1]


@settings(max_examples=200)
@given(symbols, bary, bary)
def test_contraction(i, b1, b2):
    p, q = tri_point(b1), tri_point(b2)
    psi = gasket.branch(i)
    assert np.linalg.norm(psi(p) - psi(q)) <= 0.6 * np.linalg.norm(p - q) + 1e-14


@given(st.lists(symbols, min_size=1, max_size=14).map(tuple))
def test_operator_norm_bounded_by_eta(w):
    assert np.linalg.norm(gasket.compose_word(w).linear, 2) <= 0.6 + 1e-14


def test_code_to_point_examples():
    p, bound = gasket.code_to_point((1,) * 12)
    assert np.linalg.norm(p - A) <= bound
    p, bound = gasket.code_to_point((2,) * 20)
    assert np.linalg.norm(p - B) <= bound < 1e-4
    assert gasket.diameter_bound(10) == pytest.approx(6.98e-3, abs=5e-6)


def test_code_to_point_bounds_infinite_extensions():
    rng = np.random.default_rng(1)
    for _ in range(50):
        w = tuple(rng.integers(1, 4, size=6))
        deep = w + tuple(rng.integers(1, 4, size=14))
        p, bound = gasket.code_to_point(w)
        q, _ = gasket.code_to_point(deep)
        assert np.linalg.norm(p - q) <= bound


def test_point_to_code_examples():
    assert gasket.point_to_code(A, 5) == (1, 1, 1, 1, 1)
    assert gasket.point_to_code((0.8, 0.0), 1) == (2,)
    with pytest.raises(DomainError):
        gasket.point_to_code((2.0, 0.0), 3)
    with pytest.raises(DomainError):
        gasket.apply_F((-0.1, 0.0))


def test_point_to_code_round_trip():
    rng = np.random.default_rng(7)
    ws = rng.integers(1, 4, size=(1000, 20))
    for l in (1, 5, 10):
        for w in ws[:: 10 if l == 10 else 1][:1000]:
            p, _ = gasket.code_to_point(w)
            back, _ = gasket.code_to_point(gasket.point_to_code(p, l))
            assert np.linalg.norm(back - p) <= 2 * gasket.diameter_bound(l)


def test_point_to_code_batch_agrees_with_scalar():
    rng = np.random.default_rng(3)
    lin, tr = gasket.affine_parts_of(rng.integers(1, 4, size=(200, 16)))
    pts = gasket.centroids(lin, tr)
    batch = gasket.point_to_code_batch(pts, 8)
    for p, row in zip(pts[:20], batch[:20]):
        assert gasket.point_to_code(p, 8) == tuple(row)


@settings(max_examples=200)
@given(symbols, bary)
def test_apply_F_inverts_branches(i, b):
    p = tri_point(b)
    assert np.allclose(gasket.apply_F(gasket.branch(i)(p)), p, atol=1e-12)


def test_apply_F_fixes_A():
    assert np.allclose(gasket.apply_F(A), A)


@settings(max_examples=300)
@given(st.lists(symbols, min_size=1, max_size=14).map(tuple))
def test_conjugacy(w):
    p, bound = gasket.code_to_point(w)
    q, bound_shift = gasket.code_to_point(gasket.shift(w))
    assert np.linalg.norm(gasket.apply_F(p) - q) <= bound + bound_shift


def test_shift():
    assert gasket.shift((1, 2, 3)) == (2, 3)
    assert gasket.shift((2,)) == ()
    with pytest.raises(DomainError):
        gasket.shift(())


def test_depth_guard_and_symbol_validation():
    with pytest.raises(DepthError):
        gasket.compose_word((1,) * 21)
    with pytest.raises(DepthError):
        gasket.words_at_depth(21)
    assert gasket.compose_word((1,) * 30, max_depth=30).linear[0, 0] == pytest.approx(0.6**30)
    with pytest.raises(DomainError):
        gasket.branch(4)
    with pytest.raises(DomainError):
        gasket.cell((1, 0))


def test_batch_enumeration_matches_single_words():
    depth = 4
    ws = gasket.words_at_depth(depth)
    assert ws.shape == (81, 4)
    assert [tuple(r) for r in ws] == list(itertools.product(gasket.SYMBOLS, repeat=depth))
    lin, tr = gasket.affine_parts(depth)
    for k in (0, 17, 80):
        m = gasket.compose_word(ws[k])
        assert np.allclose(lin[k], m.linear, atol=1e-15) and np.allclose(tr[k], m.translation, atol=1e-15)
        assert gasket.word_index(ws[k]) == k
    assert not lin.flags.writeable


def test_subdivision_points_counts():
    # 3, 6, 15, 42 distinct vertices at depths 0..3
    assert [len(gasket.subdivision_points(d)) for d in range(4)] == [3, 6, 15, 42]
