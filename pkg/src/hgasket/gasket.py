"""The harmonic Sierpinski gasket: its three affine branches, words, cells,
the coding map and the expanding map F.

Words are tuples of symbols in {1, 2, 3}. A word ``(w0, w1, ..., w_{l-1})``
addresses the cell ``psi_{w0} o psi_{w1} o ... o psi_{w_{l-1}}(S)``.

Batch helpers (``words_at_depth``, ``linear_parts``, ``affine_parts``) work on
numpy arrays in lexicographic word order so that depth-12 enumerations
(531441 cells) stay cheap.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

SQRT3 = np.sqrt(3.0)
ETA = 3.0 / 5.0
DIAM = 2.0 / SQRT3
MAX_DEPTH = 20
SYMBOLS = (1, 2, 3)

VERTEX_A = np.array([0.0, 0.0])
VERTEX_B = np.array([1.0, 1.0 / SQRT3])
VERTEX_C = np.array([1.0, -1.0 / SQRT3])
VERTICES = np.stack([VERTEX_A, VERTEX_B, VERTEX_C])
CENTROID = VERTICES.mean(axis=0)

T1 = np.array([[3 / 5, 0.0], [0.0, 1 / 5]])
T2 = np.array([[3 / 10, SQRT3 / 10], [SQRT3 / 10, 1 / 2]])
T3 = np.array([[3 / 10, -SQRT3 / 10], [-SQRT3 / 10, 1 / 2]])
LINEAR = np.stack([T1, T2, T3])
# psi_i(x) = P_i + T_i (x - P_i) = T_i x + (I - T_i) P_i
OFFSETS = np.stack([(np.eye(2) - LINEAR[i]) @ VERTICES[i] for i in range(3)])

Word = tuple


class DepthError(ValueError):
    """A word or enumeration exceeds the configured depth guard."""


class DomainError(ValueError):
    """An argument lies outside the domain of an operation."""


def as_word(w: Iterable[int], max_depth: int = MAX_DEPTH) -> Word:
    word = tuple(int(s) for s in w)
    if any(s not in SYMBOLS for s in word):
        raise DomainError(f"word {word!r} contains symbols outside {{1,2,3}}")
    if len(word) > max_depth:
        raise DepthError(f"word length {len(word)} exceeds depth guard {max_depth}")
    return word


@dataclass(frozen=True)
class AffineMap:
    """``x -> linear @ x + translation``."""

    linear: np.ndarray
    translation: np.ndarray

    def __call__(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        return p @ self.linear.T + self.translation

    def compose(self, other: "AffineMap") -> "AffineMap":
        """Return ``self o other``."""
        return AffineMap(
            self.linear @ other.linear,
            self.linear @ other.translation + self.translation,
        )

    def inverse(self) -> "AffineMap":
        inv = np.linalg.inv(self.linear)
        return AffineMap(inv, -inv @ self.translation)

    @classmethod
    def identity(cls) -> "AffineMap":
        return cls(np.eye(2), np.zeros(2))


@dataclass(frozen=True)
class Cell:
    word: Word
    map: AffineMap
    vertices: np.ndarray  # rows: images of A, B, C

    @property
    def centroid(self) -> np.ndarray:
        return self.vertices.mean(axis=0)

    @property
    def diameter(self) -> float:
        v = self.vertices
        return float(max(np.linalg.norm(v[i] - v[j]) for i, j in ((0, 1), (1, 2), (2, 0))))


def branch(i: int) -> AffineMap:
    if i not in SYMBOLS:
        raise DomainError(f"symbol {i!r} not in {{1,2,3}}")
    return AffineMap(LINEAR[i - 1].copy(), OFFSETS[i - 1].copy())


def compose_word(w: Sequence[int], max_depth: int = MAX_DEPTH) -> AffineMap:
    """Left-to-right composition ``psi_{w0} o ... o psi_{w_{l-1}}``."""
    word = as_word(w, max_depth)
    lin = np.eye(2)
    tr = np.zeros(2)
    for s in word:
        tr = lin @ OFFSETS[s - 1] + tr
        lin = lin @ LINEAR[s - 1]
    return AffineMap(lin, tr)


def cell(w: Sequence[int], max_depth: int = MAX_DEPTH) -> Cell:
    word = as_word(w, max_depth)
    m = compose_word(word, max_depth)
    return Cell(word, m, m(VERTICES))


def diameter_bound(length: int) -> float:
    """Upper bound on the diameter of any cell addressed by a word of this length."""
    return DIAM * ETA**length


def code_to_point(w: Sequence[int], max_depth: int = MAX_DEPTH) -> tuple[np.ndarray, float]:
    """Centroid of the cell of ``w`` and a bound on its distance to the coded
    point of any infinite extension of ``w``."""
    c = cell(w, max_depth)
    return c.centroid, diameter_bound(len(c.word))


def shift(w: Sequence[int]) -> Word:
    word = tuple(w)
    if not word:
        raise DomainError("cannot shift the empty word")
    return word[1:]


# barycentric coordinates (lambda_B, lambda_C) w.r.t. each child triangle psi_i(ABC)
_CHILD = np.einsum("kij,vj->kvi", LINEAR, VERTICES) + OFFSETS[:, None, :]
_CHILD_INV = np.linalg.inv(np.stack([np.column_stack([t[1] - t[0], t[2] - t[0]]) for t in _CHILD]))
_INV = np.linalg.inv(LINEAR)
_TRI_INV = np.linalg.inv(np.column_stack([VERTEX_B - VERTEX_A, VERTEX_C - VERTEX_A]))


def _min_barycentric(points: np.ndarray, inv: np.ndarray, origin: np.ndarray) -> np.ndarray:
    lb = (points - origin) @ inv.T
    return np.minimum(1.0 - lb.sum(axis=-1), lb.min(axis=-1))


def in_triangle(points, tol: float = 1e-12) -> np.ndarray:
    """Whether points lie in the closed triangle ABC (up to ``tol`` in barycentric terms)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return _min_barycentric(pts, _TRI_INV, VERTEX_A) >= -tol


def branch_of(points, tol: float = 1e-12) -> np.ndarray:
    """Symbol of the child triangle containing each point.

    At junctions the smallest symbol wins.  Points of the central hole, which
    lie in no child, go to the child that misses them by the least
    barycentric margin.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    score = np.stack([_min_barycentric(pts, _CHILD_INV[k], _CHILD[k, 0]) for k in range(3)], axis=1)
    inside = score >= -tol
    first = np.argmax(inside, axis=1)
    nearest = np.argmax(score, axis=1)
    return np.where(inside.any(axis=1), first, nearest) + 1


def apply_F_batch(points, tol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    """``(F(p), branch)`` for each point; ``F = psi_i^{-1}`` on branch ``i``."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if not in_triangle(pts, tol).all():
        raise DomainError("points outside the triangle ABC")
    s = branch_of(pts, tol)
    k = s - 1
    # psi_i^{-1}(q) = T_i^{-1} (q - offset_i)
    out = np.einsum("nij,nj->ni", _INV[k], pts - OFFSETS[k])
    return out, s


def apply_F(p, tol: float = 1e-12) -> np.ndarray:
    """The expanding map: ``psi_i^{-1}(p)`` for the branch ``i`` containing ``p``."""
    p = np.asarray(p, dtype=float)
    return apply_F_batch(p, tol)[0][0]


def point_to_code_batch(points, depth: int, tol: float = 1e-12, max_depth: int = MAX_DEPTH) -> np.ndarray:
    """Addresses ``(n, depth)`` read off the F-orbit of each point."""
    if depth > max_depth:
        raise DepthError(f"depth {depth} exceeds depth guard {max_depth}")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if not in_triangle(pts, tol).all():
        raise DomainError("points outside the triangle ABC")
    words = np.empty((len(pts), depth), dtype=np.int8)
    q = pts
    for j in range(depth):
        s = branch_of(q, tol)
        words[:, j] = s
        k = s - 1
        q = np.einsum("nij,nj->ni", _INV[k], q - OFFSETS[k])
    return words


def point_to_code(p, depth: int, tol: float = 1e-12, max_depth: int = MAX_DEPTH) -> Word:
    """Address of a depth-``depth`` cell whose vertex triangle contains ``p``.

    Junction points take the smallest admissible symbol at each ambiguous
    step, so ``point_to_code((4/5, 0), 1) == (2,)``.
    """
    p = np.asarray(p, dtype=float)
    if not in_triangle(p, tol)[0]:
        raise DomainError(f"point {p.tolist()} lies outside the triangle ABC")
    return tuple(int(s) for s in point_to_code_batch(p, depth, tol, max_depth)[0])


# -- batch enumeration -------------------------------------------------------


def _check_depth(depth: int, max_depth: int) -> None:
    if depth < 0:
        raise DomainError(f"negative depth {depth}")
    if depth > max_depth:
        raise DepthError(f"depth {depth} exceeds depth guard {max_depth}")


def words_at_depth(depth: int, symbols: Sequence[int] = SYMBOLS, max_depth: int = MAX_DEPTH) -> np.ndarray:
    """All words of the given length, lexicographic, as an ``(k**depth, depth)`` int array."""
    _check_depth(depth, max_depth)
    sym = np.asarray(symbols, dtype=np.int8)
    k = len(sym)
    idx = np.arange(k**depth)
    cols = [sym[(idx // k ** (depth - 1 - j)) % k] for j in range(depth)]
    if not cols:
        return np.zeros((1, 0), dtype=np.int8)
    return np.stack(cols, axis=1)


def linear_parts(depth: int, symbols: Sequence[int] = SYMBOLS, max_depth: int = MAX_DEPTH) -> np.ndarray:
    """Linear parts of every word map at ``depth``, same order as ``words_at_depth``."""
    return affine_parts(depth, symbols, max_depth)[0]


def affine_parts(
    depth: int, symbols: Sequence[int] = SYMBOLS, max_depth: int = MAX_DEPTH
) -> tuple[np.ndarray, np.ndarray]:
    """``(L, t)`` arrays of shape ``(n, 2, 2)`` and ``(n, 2)`` for all words at ``depth``.

    Results are cached and returned read-only.
    """
    _check_depth(depth, max_depth)
    return _affine_parts(depth, tuple(int(s) for s in symbols))


@lru_cache(maxsize=6)
def _affine_parts(depth: int, symbols: tuple) -> tuple[np.ndarray, np.ndarray]:
    sel = np.asarray(symbols) - 1
    lin_k, off_k = LINEAR[sel], OFFSETS[sel]
    k = len(sel)
    lin = np.eye(2)[None]
    tr = np.zeros((1, 2))
    for _ in range(depth):
        n = lin.shape[0]
        tr = (np.einsum("nij,kj->nki", lin, off_k) + tr[:, None, :]).reshape(n * k, 2)
        lin = np.einsum("nij,kjl->nkil", lin, lin_k).reshape(n * k, 2, 2)
    lin.setflags(write=False)
    tr.setflags(write=False)
    return lin, tr


def affine_parts_of(words: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``(L, t)`` for an ``(n, l)`` array of words of equal length."""
    words = np.asarray(words)
    n = words.shape[0]
    lin = np.broadcast_to(np.eye(2), (n, 2, 2)).copy()
    tr = np.zeros((n, 2))
    for j in range(words.shape[1]):
        s = words[:, j] - 1
        tr = np.einsum("nij,nj->ni", lin, OFFSETS[s]) + tr
        lin = np.einsum("nij,njk->nik", lin, LINEAR[s])
    return lin, tr


def cell_vertices(lin: np.ndarray, tr: np.ndarray) -> np.ndarray:
    """Vertex triangles ``(n, 3, 2)`` of batched affine maps."""
    return np.einsum("nij,vj->nvi", lin, VERTICES) + tr[:, None, :]


def centroids(lin: np.ndarray, tr: np.ndarray) -> np.ndarray:
    return lin @ CENTROID + tr


def word_index(w: Sequence[int]) -> int:
    """Position of ``w`` in the lexicographic order of ``words_at_depth(len(w))``."""
    idx = 0
    for s in w:
        idx = 3 * idx + (s - 1)
    return idx


def subdivision_points(depth: int) -> np.ndarray:
    """Distinct vertices of the depth-``depth`` cells of the reference triangle,
    in first-seen lexicographic order."""
    lin, tr = affine_parts(depth)
    pts = cell_vertices(lin, tr).reshape(-1, 2)
    _, first = np.unique(np.round(pts, 12), axis=0, return_index=True)
    return pts[np.sort(first)]
