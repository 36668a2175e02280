"""Cell shape diagnostics: the boundary curve M, the sets S_theta, cell
anisotropy along the projection field, and how kappa concentrates away from
the boundary of deep cells.

M is approximated by the three side curves of the gasket (the sub-attractors
of the symbol pairs {1,2}, {2,3} and {1,3}) drawn as vertex polylines.  Every
distance to M carries the error bar ``(2/sqrt 3) * eta**depth``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
import shapely

from . import gasket, measure
from .cocycle import projection_batch, projection_estimate
from .gasket import DomainError, as_word, diameter_bound

DEFAULT_POLYLINE_DEPTH = 12
SIDES = {"AB": ((1, 2), 0, 1), "BC": ((2, 3), 1, 2), "AC": ((1, 3), 0, 2)}


@dataclass(frozen=True)
class BoundaryApprox:
    depth: int
    sides: dict  # name -> (k, 2) array, ordered from first to second endpoint

    def segments(self) -> np.ndarray:
        return np.concatenate([np.stack([p[:-1], p[1:]], axis=1) for p in self.sides.values()])


@lru_cache(maxsize=32)
def boundary_polyline(depth: int) -> BoundaryApprox:
    """Vertex chains of the cells over each symbol pair, in word order."""
    sides = {}
    for name, (symbols, i, j) in SIDES.items():
        lin, tr = gasket.affine_parts(depth, symbols)
        start = lin @ gasket.VERTICES[i] + tr
        end = lin @ gasket.VERTICES[j] + tr
        pts = np.vstack([start, end[-1:]])
        pts.setflags(write=False)
        sides[name] = pts
    return BoundaryApprox(depth, sides)


@lru_cache(maxsize=32)
def _segment_tree(depth: int):
    segs = boundary_polyline(depth).segments()
    geoms = shapely.linestrings(segs)
    return shapely.STRtree(geoms)


def dist_to_M_batch(points, depth: int = DEFAULT_POLYLINE_DEPTH) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    tree = _segment_tree(depth)
    idx, dist = tree.query_nearest(shapely.points(pts), return_distance=True, all_matches=False)
    out = np.empty(len(pts))
    out[idx[0]] = dist
    return out


def dist_to_M(p, depth: int = DEFAULT_POLYLINE_DEPTH) -> tuple[float, float]:
    """Distance from ``p`` to the approximated boundary curve and its error bar."""
    return float(dist_to_M_batch(p, depth)[0]), diameter_bound(depth)


def inradius() -> float:
    return 1.0 / 3.0


def in_S_theta_batch(points, theta: float, depth: int = DEFAULT_POLYLINE_DEPTH) -> np.ndarray:
    if not theta > 0:
        raise DomainError("theta must be positive")
    if theta > inradius():
        return np.zeros(len(np.atleast_2d(points)), dtype=bool)
    return dist_to_M_batch(points, depth) - diameter_bound(depth) >= theta


def in_S_theta(p, theta: float, depth: int = DEFAULT_POLYLINE_DEPTH) -> bool:
    """Membership in S_theta, decided on the conservative side of the error bar."""
    return bool(in_S_theta_batch(p, theta, depth)[0])


# -- anisotropy ---------------------------------------------------------------


@dataclass(frozen=True)
class AnisotropyRecord:
    word: tuple
    n: int
    v: np.ndarray
    labeled_vertices: np.ndarray  # rows A, B, C after relabeling
    ratio34: float
    alignment35: float | None = None
    theta_member: bool = False
    flagged: bool = False


_PAIRS = ((0, 1), (1, 2), (2, 0))


def _ratio34(verts: np.ndarray, v: np.ndarray):
    """Relabel so AB has the longest projection on ``v``; return (labels, ratio)."""
    perp = np.array([-v[..., 1], v[..., 0]])
    diffs = np.stack([verts[j] - verts[i] for i, j in _PAIRS])
    par = np.abs(diffs @ v)
    per = np.abs(diffs @ perp)
    k = int(np.argmax(par))  # first maximal pair wins ties
    i, j = _PAIRS[k]
    third = 3 - i - j
    labels = verts[[i, j, third]]
    if par[k] == 0:
        return labels, np.inf
    return labels, float(per.max() / par[k])


def ratio34_batch(verts: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Vectorized ratio34 for ``verts (n, 3, 2)`` and unit ``v (n, 2)``."""
    perp = np.stack([-v[:, 1], v[:, 0]], axis=1)
    diffs = np.stack([verts[:, j] - verts[:, i] for i, j in _PAIRS], axis=1)
    par = np.abs(np.einsum("nki,ni->nk", diffs, v)).max(axis=1)
    per = np.abs(np.einsum("nki,ni->nk", diffs, perp)).max(axis=1)
    with np.errstate(divide="ignore"):
        return np.where(par > 0, per / par, np.inf)


def anisotropy(
    w: Sequence[int],
    n: int,
    theta: float | None = None,
    v=None,
    polyline_depth: int = DEFAULT_POLYLINE_DEPTH,
) -> AnisotropyRecord:
    """Shape of the depth-``n`` cell along the direction ``v`` of the full word.

    ``v`` defaults to the projection estimate of ``w``.  When ``theta`` is set
    and the coded point pulled back into the depth-``n`` cell lies in
    S_theta, the alignment ratio of the long-side endpoints is also computed.
    """
    word = as_word(w)
    if not 0 <= n <= len(word):
        raise DomainError(f"n={n} must lie in [0, {len(word)}]")
    if v is None:
        v = projection_estimate(word).v
    v = np.asarray(v, dtype=float)
    v = v / np.linalg.norm(v)
    c = gasket.cell(word[:n])
    labels, ratio = _ratio34(c.vertices, v)
    alignment = None
    member = False
    if theta is not None:
        point = gasket.cell(word).centroid
        pulled = gasket.cell(word[n:]).centroid  # = psi_{w,n}^{-1}(point)
        member = in_S_theta(pulled, theta, polyline_depth)
        if member:
            alignment = _alignment(point, labels[0], labels[1], v)
    return AnisotropyRecord(word, n, v, labels, ratio, alignment, member, flagged=not np.isfinite(ratio))


def _alignment(x, a, b, v) -> float:
    perp = np.array([-v[1], v[0]])
    out = 0.0
    for p in (a, b):
        d = x - p
        par = abs(d @ v)
        out = max(out, abs(d @ perp) / par if par > 0 else np.inf)
    return float(out)


# -- mass concentration -------------------------------------------------------


@dataclass
class ThetaReport:
    theta: float
    n: int
    samples: int
    seed: int
    ratio_mass: float
    ratio_mass_se: float
    kappa_S_theta: float
    delta_hat: float
    empirical_F_theta_mass: float
    F_theta_se: float
    theta0_estimate: float
    sub_depth: int
    polyline_depth: int
    n_range: tuple = field(default=())


@lru_cache(maxsize=8)
def _suffix_table(sub_depth: int, polyline_depth: int):
    """Centroids, distances to M and tau for every word of length ``sub_depth``."""
    lin, tr = gasket.affine_parts(sub_depth)
    cents = gasket.centroids(lin, tr)
    dist = dist_to_M_batch(cents, polyline_depth)
    tau = measure.tau_batch(lin, sub_depth, 1.0)  # unit normalization; rescaled by callers
    return cents, dist, tau


def theta0_estimate(sub_depth: int = 8, polyline_depth: int = DEFAULT_POLYLINE_DEPTH) -> float:
    """Largest theta for which some sub-cell centroid passes the conservative S_theta test."""
    _, dist, _ = _suffix_table(sub_depth, polyline_depth)
    return float(dist.max() - diameter_bound(polyline_depth))


def tau_S_theta(theta: float, sub_depth: int = 8, polyline_depth: int = DEFAULT_POLYLINE_DEPTH, c: float = 0.5) -> np.ndarray:
    """tau(S_theta) by summing tau over the sub-cells whose centroid lies in S_theta."""
    _, dist, tau = _suffix_table(sub_depth, polyline_depth)
    member = dist - diameter_bound(polyline_depth) >= theta
    return c * tau[member].sum(axis=0)


def cell_mass_ratio(lin: np.ndarray, tau_theta: np.ndarray, c: float = 0.5) -> np.ndarray:
    """``kappa(psi_w(S_theta)) / kappa(psi_w(S))`` for linear parts ``lin (n, 2, 2)``.

    Pushing tau(S_theta) forward through the cell map gives the restricted
    measure up to the common factor beta**-n, which cancels in the ratio.
    """
    num = np.einsum("nij,jk,nik->n", lin, tau_theta, lin)
    den = c * np.einsum("nij,nij->n", lin, lin)
    return num / den


def theta_mass_report(
    theta: float,
    n: int,
    samples: int,
    seed: int,
    sub_depth: int = 8,
    n_range: Sequence[int] | None = None,
    polyline_depth: int = DEFAULT_POLYLINE_DEPTH,
    c: float = 0.5,
) -> ThetaReport:
    """Monte Carlo report on how much of a deep cell's mass sits in psi_w(S_theta).

    ``samples`` points are drawn from kappa as words of length
    ``max(n_range) + sub_depth``.  A point ``x`` in the depth-``n`` cell ``w``
    lies in ``psi_w(S_theta)`` when the centroid of its remaining
    ``sub_depth`` symbols (that is, the pull-back of ``x``) is in S_theta.
    Per-cell ratios come from tau(S_theta) pushed through the cell map.
    """
    if not theta > 0:
        raise DomainError("theta must be positive")
    theta0 = theta0_estimate(sub_depth, polyline_depth)
    if theta > theta0:
        raise DomainError(f"S_theta is empty for theta={theta}; theta0 is about {theta0:.6g}")
    if n_range is None:
        n_range = (n, n + 1, n + 2)
    n_range = tuple(sorted(set(int(k) for k in n_range) | {n}))
    top = max(n_range)
    _, dist, _ = _suffix_table(sub_depth, polyline_depth)
    member_table = dist - diameter_bound(polyline_depth) >= theta
    tau_theta = tau_S_theta(theta, sub_depth, polyline_depth, c)

    words = measure.sample_kappa(seed, top + sub_depth, samples)
    powers = 3 ** np.arange(sub_depth - 1, -1, -1)

    def member_at(k: int) -> np.ndarray:
        suffix_idx = (words[:, k : k + sub_depth].astype(np.int64) - 1) @ powers
        return member_table[suffix_idx]

    def ratios_at(k: int) -> np.ndarray:
        lin, _ = gasket.affine_parts_of(words[:, :k])
        return cell_mass_ratio(lin, tau_theta, c)

    member_n = member_at(n)
    ratio_mass = float(member_n.mean())
    ratio_se = float(np.sqrt(ratio_mass * (1 - ratio_mass) / samples))

    ratio_by_k = {k: ratios_at(k) for k in n_range}
    delta_hat = float(1.0 - ratio_by_k[n].min())

    in_F = np.zeros(samples, dtype=bool)
    for k in n_range:
        in_F |= member_at(k) & (ratio_by_k[k] >= 1.0 - 2.0 * delta_hat)
    f_mass = float(in_F.mean())
    return ThetaReport(
        theta=theta,
        n=n,
        samples=samples,
        seed=seed,
        ratio_mass=ratio_mass,
        ratio_mass_se=ratio_se,
        kappa_S_theta=float(np.trace(tau_theta)),
        delta_hat=delta_hat,
        empirical_F_theta_mass=f_mass,
        F_theta_se=float(np.sqrt(f_mass * (1 - f_mass) / samples)),
        theta0_estimate=theta0,
        sub_depth=sub_depth,
        polyline_depth=polyline_depth,
        n_range=n_range,
    )


def anisotropy_table(depth: int, words: np.ndarray) -> np.ndarray:
    """ratio34 of each full-depth cell against its own projection direction."""
    lin, tr = gasket.affine_parts_of(words[:, :depth])
    v = projection_batch(lin)["v"]
    return ratio34_batch(gasket.cell_vertices(lin, tr), v)
