"""Dirichlet form quadrature, self-similarity, the local Lipschitz estimator
and the pre-Cheeger energy.

All sums run over the cells of a fixed depth with the cell centroid as
quadrature node.  Scalar fields are vectorized: ``f`` maps ``(n, 2)`` points
to ``(n,)`` values and ``grad`` maps them to ``(n, 2)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import gasket, measure
from .cocycle import projection_batch
from .gasket import MAX_DEPTH, DepthError, as_word

FLOOR = 1e-300
CHUNK = 1 << 15


class GradientMismatch(ValueError):
    pass


@dataclass(frozen=True)
class ScalarField:
    name: str
    f: Callable[[np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray], np.ndarray]
    checked: bool = field(default=False, compare=False)

    def __call__(self, p):
        return self.f(np.atleast_2d(p))

    def compose(self, m: gasket.AffineMap, name: str | None = None) -> "ScalarField":
        """``f o m``; its gradient is ``m.linear^t (grad f) o m``."""
        lin, tr = m.linear, m.translation
        return ScalarField(
            name or f"{self.name}∘map",
            lambda p: self.f(p @ lin.T + tr),
            lambda p: self.grad(p @ lin.T + tr) @ lin,
            checked=True,
        )


def register(name: str, f, grad, h: float = 1e-5, tol: float = 1e-6, seed: int = 0) -> ScalarField:
    """Build a ScalarField after checking ``grad`` against central differences
    at 100 random points of the triangle."""
    rng = np.random.default_rng(seed)
    bary = rng.dirichlet(np.ones(3), size=100)
    pts = bary @ gasket.VERTICES
    g = np.asarray(grad(pts), dtype=float)
    fd = np.empty_like(g)
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        fd[:, k] = (f(pts + e) - f(pts - e)) / (2 * h)
    err = float(np.abs(fd - g).max())
    if err > tol:
        raise GradientMismatch(f"gradient of {name!r} disagrees with finite differences by {err:.3e}")
    return ScalarField(name, f, grad, checked=True)


def linear_field(a, name: str | None = None) -> ScalarField:
    a = np.asarray(a, dtype=float)
    return register(
        name or f"linear({a[0]:g},{a[1]:g})",
        lambda p: p @ a,
        lambda p: np.broadcast_to(a, p.shape).copy(),
    )


def constant_field(value: float = 1.0) -> ScalarField:
    return register("constant", lambda p: np.full(len(p), float(value)), lambda p: np.zeros_like(p))


def battery() -> list[ScalarField]:
    """The fixed test battery."""
    pi = np.pi
    return [
        constant_field(),
        linear_field([1.0, 0.0], "x1"),
        linear_field([0.0, 1.0], "x2"),
        register("x1^2", lambda p: p[:, 0] ** 2, lambda p: np.stack([2 * p[:, 0], 0 * p[:, 0]], 1)),
        register("x1*x2", lambda p: p[:, 0] * p[:, 1], lambda p: p[:, ::-1].copy()),
        register(
            "sin(pi x1)cos(pi x2)",
            lambda p: np.sin(pi * p[:, 0]) * np.cos(pi * p[:, 1]),
            lambda p: np.stack(
                [
                    pi * np.cos(pi * p[:, 0]) * np.cos(pi * p[:, 1]),
                    -pi * np.sin(pi * p[:, 0]) * np.sin(pi * p[:, 1]),
                ],
                1,
            ),
        ),
    ]


def _guard(depth: int, extra: int = 0) -> None:
    if depth < 0 or extra < 0:
        raise ValueError("depths must be non-negative")
    if depth + extra > MAX_DEPTH:
        raise DepthError(f"depth {depth}+{extra} exceeds depth guard {MAX_DEPTH}")


def _chunks(n: int):
    for start in range(0, n, CHUNK):
        yield slice(start, min(start + CHUNK, n))


def dirichlet_matrix(f: ScalarField, g: ScalarField, depth: int, c: float = measure.DEFAULT_C) -> float:
    """``sum_w <grad f(x_w), tau[w] grad g(x_w)>`` over the cells at ``depth``."""
    _guard(depth)
    lin, tr = gasket.affine_parts(depth)
    x = gasket.centroids(lin, tr)
    tau = measure.tau_batch(lin, depth, c)
    gf, gg = f.grad(x), g.grad(x)
    return float(np.einsum("ni,nij,nj->", gf, tau, gg))


def dirichlet_vfield(
    f: ScalarField, g: ScalarField, depth: int, c: float = measure.DEFAULT_C, return_flags: bool = False
):
    """``sum_w kappa[w] <grad f(x_w), P_v(w) grad g(x_w)>`` with v from the cell's word."""
    _guard(depth)
    if depth == 0:
        raise ValueError("dirichlet_vfield needs depth >= 1")
    lin, tr = gasket.affine_parts(depth)
    x = gasket.centroids(lin, tr)
    kappa = measure.kappa_batch(lin, depth, c)
    pb = projection_batch(lin)
    v, flagged = pb["v"], pb["flagged"]
    gf, gg = f.grad(x), g.grad(x)
    terms = kappa * np.einsum("ni,ni->n", gf, v) * np.einsum("ni,ni->n", gg, v)
    value = float(terms[~flagged].sum())
    n_flag = int(flagged.sum())
    if n_flag > 0.01 * len(flagged):
        warnings.warn(f"{n_flag} of {len(flagged)} projection estimates are degenerate")
    if return_flags:
        return value, n_flag
    return value


def self_similarity_residual(f: ScalarField, depth: int, floor: float = 1e-12, c: float = measure.DEFAULT_C) -> float:
    """Relative defect of ``E(f) = (1/beta) sum_i E(f o psi_i)`` at quadrature depth ``depth``."""
    whole = dirichlet_matrix(f, f, depth, c)
    parts = sum(dirichlet_matrix(fi, fi, depth, c) for fi in (f.compose(gasket.branch(i)) for i in gasket.SYMBOLS))
    return abs(whole - parts / measure.BETA) / max(whole, floor)


def _pairs(k: int) -> tuple[np.ndarray, np.ndarray]:
    i, j = np.triu_indices(k, 1)
    return i, j


def _lip_batch(f: ScalarField, lin: np.ndarray, tr: np.ndarray, ref_pts: np.ndarray) -> np.ndarray:
    """Max chord slope of ``f`` over the images of ``ref_pts`` in each cell."""
    i, j = _pairs(len(ref_pts))
    out = np.empty(len(lin))
    for sl in _chunks(len(lin)):
        pts = np.einsum("nab,kb->nka", lin[sl], ref_pts) + tr[sl, None, :]
        vals = f.f(pts.reshape(-1, 2)).reshape(pts.shape[:2])
        num = np.abs(vals[:, i] - vals[:, j])
        den = np.linalg.norm(pts[:, i] - pts[:, j], axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            slope = np.where(den > 0, num / den, 0.0)
        out[sl] = slope.max(axis=1) if slope.shape[1] else 0.0
    return out


def lip_a_estimate(f: ScalarField, w, sub_depth: int) -> float:
    """Largest difference quotient of ``f`` between distinct vertices of the
    ``3**sub_depth`` sub-cells of the cell of ``w``."""
    word = as_word(w)
    _guard(len(word), sub_depth)
    m = gasket.compose_word(word)
    ref = gasket.subdivision_points(sub_depth)
    return float(_lip_batch(f, m.linear[None], m.translation[None], ref)[0])


def lip_a_at_depth(f: ScalarField, depth: int, sub_depth: int) -> np.ndarray:
    _guard(depth, sub_depth)
    lin, tr = gasket.affine_parts(depth)
    return _lip_batch(f, lin, tr, gasket.subdivision_points(sub_depth))


def cheeger_pre(f: ScalarField, depth: int, sub_depth: int, c: float = measure.DEFAULT_C) -> float:
    """``(1/2) sum_w kappa[w] * lip_a_estimate(f, w, sub_depth)**2``."""
    lin = gasket.linear_parts(depth)
    lip = lip_a_at_depth(f, depth, sub_depth)
    return 0.5 * float(np.sum(measure.kappa_batch(lin, depth, c) * lip**2))


@dataclass
class EnergyReport:
    field: str
    dirichlet_matrix: float
    dirichlet_vfield: float
    cheeger_pre: float
    half_dirichlet: float
    relative_gap: float
    depth: int
    sub_depth: int
    c: float
    lower_bound_violations: int
    lower_bound_cells: int
    lower_bound_worst: float
    pointwise: tuple | None = None  # (lip, |<grad f, v>|) per cell, if requested


def theorem1_report(
    f: ScalarField,
    depth: int,
    sub_depth: int,
    c: float = measure.DEFAULT_C,
    floor: float = 1e-12,
    tol: float = 1e-9,
    keep_pointwise: bool = False,
) -> EnergyReport:
    """Compare the pre-Cheeger energy with half the Dirichlet form.

    Also counts cells violating ``lip >= |<grad f(x_w), v(w)>| - tol * max|grad f|``.
    """
    _guard(depth, sub_depth)
    lin, tr = gasket.affine_parts(depth)
    x = gasket.centroids(lin, tr)
    kappa = measure.kappa_batch(lin, depth, c)
    tau = measure.tau_batch(lin, depth, c)
    grad = f.grad(x)
    dm = float(np.einsum("ni,nij,nj->", grad, tau, grad))
    if depth >= 1:
        v = projection_batch(lin)["v"]
    else:
        v = np.array([[1.0, 0.0]])
    proj = np.abs(np.einsum("ni,ni->n", grad, v))
    dv = float(np.sum(kappa * proj**2))
    lip = _lip_batch(f, lin, tr, gasket.subdivision_points(sub_depth))
    pch = 0.5 * float(np.sum(kappa * lip**2))
    half = 0.5 * dm
    gap = abs(pch - half) / max(half, floor)
    gnorm = float(np.abs(grad).max()) if len(grad) else 0.0
    slack = lip - proj + tol * gnorm
    return EnergyReport(
        field=f.name,
        dirichlet_matrix=dm,
        dirichlet_vfield=dv,
        cheeger_pre=pch,
        half_dirichlet=half,
        relative_gap=gap,
        depth=depth,
        sub_depth=sub_depth,
        c=c,
        lower_bound_violations=int(np.sum(slack < 0)),
        lower_bound_cells=len(lip),
        lower_bound_worst=float(np.min(lip - proj)) if len(lip) else 0.0,
        pointwise=(lip, proj) if keep_pointwise else None,
    )
