"""Derivative cocycle along words, the projection field v and Lyapunov exponents."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import gasket
from .gasket import LINEAR, DomainError, as_word

LOG_DET = float(np.log(3.0 / 25.0))  # every T_i has determinant 3/25


def svd2(m: np.ndarray):
    """Closed-form SVD of 2x2 matrices (batched over leading axes).

    Returns ``(u, s, vt)`` with ``m = u @ diag(s) @ vt``, ``s[..., 0] >= s[..., 1] >= 0``.
    """
    m = np.asarray(m, dtype=float)
    a, b, c, d = m[..., 0, 0], m[..., 0, 1], m[..., 1, 0], m[..., 1, 1]
    e, f = (a + d) / 2, (a - d) / 2
    g, h = (c + b) / 2, (c - b) / 2
    q, r = np.hypot(e, h), np.hypot(f, g)
    s1 = q + r
    det = a * d - b * c
    # s2 from the determinant avoids the cancellation in q - r
    with np.errstate(divide="ignore", invalid="ignore"):
        s2 = np.where(s1 > 0, np.abs(det) / s1, 0.0)
    sign = np.where(det < 0, -1.0, 1.0)
    a1, a2 = np.arctan2(g, f), np.arctan2(h, e)
    theta, phi = (a2 - a1) / 2, (a2 + a1) / 2
    cp, sp = np.cos(phi), np.sin(phi)
    ct, st = np.cos(theta), np.sin(theta)
    u = np.stack([np.stack([cp, -sp * sign], -1), np.stack([sp, cp * sign], -1)], -2)
    vt = np.stack([np.stack([ct, -st], -1), np.stack([st, ct], -1)], -2)
    return u, np.stack([s1, s2], -1), vt


def sign_normalize(v: np.ndarray) -> np.ndarray:
    """Flip vectors so that their first nonzero component is positive."""
    v = np.asarray(v, dtype=float)
    lead = np.where(v[..., 0] != 0, v[..., 0], v[..., 1])
    return v * np.where(lead < 0, -1.0, 1.0)[..., None]


@dataclass(frozen=True)
class CocycleProduct:
    word: tuple
    H: np.ndarray
    singular_values: np.ndarray
    left: np.ndarray   # columns are left singular vectors
    right: np.ndarray  # columns are right singular vectors


@dataclass(frozen=True)
class ProjectionEstimate:
    word: tuple
    v: np.ndarray
    vl: np.ndarray
    M: np.ndarray
    residual_proj: float
    residual_rank1: float
    flagged: bool = False


@dataclass(frozen=True)
class LyapunovReport:
    lambda1: float
    lambda2: float
    gap: float
    depth: int
    flagged: bool = False


def cocycle(w: Sequence[int]) -> CocycleProduct:
    word = as_word(w)
    if not word:
        raise DomainError("cocycle needs a non-empty word")
    h = gasket.compose_word(word).linear
    u, s, vt = svd2(h)
    return CocycleProduct(word, h, s, u, vt.T)


def _projection_arrays(h: np.ndarray):
    u, s, _ = svd2(h)
    v = sign_normalize(u[..., :, 0])
    hs2 = np.einsum("...ij,...ij->...", h, h)
    hs = np.sqrt(hs2)
    m = np.einsum("...ij,...kj->...ik", h, h) / hs2[..., None, None]
    vl = np.einsum("...ji,...j->...i", h, v) / hs[..., None]
    res_proj = np.sqrt(2.0) * s[..., 1] ** 2 / (s[..., 0] ** 2 + s[..., 1] ** 2)
    rank1 = h / hs[..., None, None] - np.einsum("...i,...j->...ij", v, vl)
    res_rank1 = np.sqrt(np.einsum("...ij,...ij->...", rank1, rank1))
    flagged = s[..., 0] == s[..., 1]
    res_proj = np.where(flagged, np.sqrt(2.0), res_proj)
    return v, vl, m, res_proj, res_rank1, flagged


def projection_estimate(w: Sequence[int]) -> ProjectionEstimate:
    """Finite-depth estimate of the projection direction at the point coded by ``w``."""
    word = as_word(w)
    if not word:
        raise DomainError("projection_estimate needs a non-empty word")
    h = gasket.compose_word(word).linear
    v, vl, m, rp, r1, flagged = _projection_arrays(h)
    return ProjectionEstimate(word, v, vl, m, float(rp), float(r1), bool(flagged))


def projection_batch(lin: np.ndarray) -> dict[str, np.ndarray]:
    """Vectorized ``projection_estimate`` over linear parts ``(n, 2, 2)``."""
    v, vl, m, rp, r1, flagged = _projection_arrays(lin)
    return {"v": v, "vl": vl, "M": m, "residual_proj": rp, "residual_rank1": r1, "flagged": flagged}


def v_field_table(depth: int, sample) -> list[dict]:
    """One row per word: centroid, v, and both residuals."""
    words = np.asarray(sample, dtype=np.int64).reshape(len(sample), -1)
    if words.shape[1] != depth:
        raise DomainError(f"all words must have length {depth}")
    if depth < 1:
        raise DomainError("depth must be >= 1")
    lin, tr = gasket.affine_parts_of(words)
    pts = gasket.centroids(lin, tr)
    pb = projection_batch(lin)
    rows = []
    for k in range(len(words)):
        rows.append({
            "word": "".join(str(int(s)) for s in words[k]),
            "x1": float(pts[k, 0]),
            "x2": float(pts[k, 1]),
            "v1": float(pb["v"][k, 0]),
            "v2": float(pb["v"][k, 1]),
            "residual_proj": float(pb["residual_proj"][k]),
            "residual_rank1": float(pb["residual_rank1"][k]),
        })
    return rows


def log_singular_values(w: Sequence[int]) -> tuple[float, float]:
    """``(ln s1, ln s2)`` of the word product, accumulated with renormalization.

    ``ln s2`` comes from the exact log-determinant, so arbitrarily long words
    never underflow.
    """
    word = tuple(int(s) for s in w)
    m = np.eye(2)
    log_scale = 0.0
    for s in word:
        m = m @ LINEAR[s - 1]
        n = np.linalg.norm(m)
        m /= n
        log_scale += np.log(n)
    _, sv, _ = svd2(m)
    log_s1 = log_scale + float(np.log(sv[0]))
    return log_s1, len(word) * LOG_DET - log_s1


def lyapunov(w: Sequence[int]) -> LyapunovReport:
    word = tuple(int(s) for s in w)
    if len(word) < 2:
        raise DomainError("lyapunov needs a word of length >= 2")
    if any(s not in gasket.SYMBOLS for s in word):
        raise DomainError("word contains symbols outside {1,2,3}")
    l1, l2 = log_singular_values(word)
    n = len(word)
    lam1, lam2 = l1 / n, l2 / n
    return LyapunovReport(lam1, lam2, lam1 - lam2, n, flagged=not lam1 > lam2)


def lyapunov_batch(words: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``(lambda1, lambda2)`` arrays for an ``(n, l)`` array of words."""
    words = np.asarray(words)
    n, length = words.shape
    m = np.broadcast_to(np.eye(2), (n, 2, 2)).copy()
    log_scale = np.zeros(n)
    for j in range(length):
        m = np.einsum("nij,njk->nik", m, LINEAR[words[:, j] - 1])
        nrm = np.linalg.norm(m, axis=(1, 2))
        m /= nrm[:, None, None]
        log_scale += np.log(nrm)
    _, sv, _ = svd2(m)
    l1 = (log_scale + np.log(sv[:, 0])) / length
    return l1, LOG_DET - l1
