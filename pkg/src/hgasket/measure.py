"""Ruelle operator on constant symmetric matrix fields, its principal
eigenvalue, Kusuoka's matrix measure on cells and the scalar measure kappa.

``tau[w] = beta**(-|w|) * L_w @ (c * Id) @ L_w.T`` where ``L_w`` is the linear
part of the word map and ``tau(S) = c * Id``.  With the default ``c = 1/2``
kappa (the trace of tau) is a probability measure.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import gasket
from .gasket import LINEAR, MAX_DEPTH, as_word

DEFAULT_C = 0.5


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class TauNormalization:
    c: float = DEFAULT_C

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError(f"normalization constant must be positive, got {self.c}")


@dataclass(frozen=True)
class CellMeasure:
    word: tuple
    tau: np.ndarray
    kappa: float


@dataclass(frozen=True)
class EigenResult:
    beta: float
    eigenmatrix: np.ndarray
    iterations: int
    residual: float


def ruelle_apply(a) -> np.ndarray:
    """``sum_i T_i^t A T_i``."""
    a = np.asarray(a, dtype=float)
    return np.einsum("kji,jl,klm->im", LINEAR, a, LINEAR)


def principal_eigenvalue(tol: float = 1e-12, max_iter: int = 100) -> EigenResult:
    """Power iteration for the Ruelle operator started from the identity."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    q = np.eye(2) / np.sqrt(2.0)
    beta = 0.0
    for it in range(1, max_iter + 1):
        lq = ruelle_apply(q)
        beta = float(np.sum(lq * q))  # Rayleigh quotient, ||q||_HS = 1
        residual = np.linalg.norm(lq - beta * q) / np.linalg.norm(q)
        if residual <= tol:
            eig = q / q[0, 0]
            return EigenResult(beta, eig, it, float(residual))
        q = lq / np.linalg.norm(lq)
    raise ConvergenceError(f"power iteration did not converge in {max_iter} steps (residual {residual:.3e})")


BETA = float(np.trace(ruelle_apply(np.eye(2)))) / 2.0


def tau_cell(w: Sequence[int], norm: TauNormalization = TauNormalization(), max_depth: int = MAX_DEPTH) -> CellMeasure:
    word = as_word(w, max_depth)
    lin = gasket.compose_word(word, max_depth).linear
    tau = norm.c * (lin @ lin.T) / BETA ** len(word)
    return CellMeasure(word, tau, float(np.trace(tau)))


def kappa_cell(w: Sequence[int], c: float = DEFAULT_C) -> float:
    return tau_cell(w, TauNormalization(c)).kappa


def tau_batch(lin: np.ndarray, depth: int, c: float = DEFAULT_C) -> np.ndarray:
    """tau of every cell with linear parts ``lin`` (all at the same depth)."""
    return c * np.einsum("nij,nkj->nik", lin, lin) / BETA**depth


def kappa_batch(lin: np.ndarray, depth: int, c: float = DEFAULT_C) -> np.ndarray:
    return c * np.einsum("nij,nij->n", lin, lin) / BETA**depth


def tau_at_depth(depth: int, c: float = DEFAULT_C) -> tuple[np.ndarray, np.ndarray]:
    """``(tau, kappa)`` for all cells at ``depth`` in lexicographic order."""
    lin = gasket.linear_parts(depth)
    return tau_batch(lin, depth, c), kappa_batch(lin, depth, c)


def verify_pushforward(w: Sequence[int], test_words: Sequence[Sequence[int]], c: float = DEFAULT_C) -> float:
    """Max HS residual of ``tau[u] = beta^n L_w^{-1} tau[w u] L_w^{-t}`` over ``test_words``."""
    w = as_word(w)
    n = len(w)
    inv = np.linalg.inv(gasket.compose_word(w).linear)
    norm = TauNormalization(c)
    worst = 0.0
    for u in test_words:
        lhs = tau_cell(u, norm).tau
        rhs = BETA**n * inv @ tau_cell(w + as_word(u), norm).tau @ inv.T
        worst = max(worst, float(np.linalg.norm(lhs - rhs)))
    return worst


def child_probabilities(lin: np.ndarray) -> np.ndarray:
    """Conditional masses ``kappa(w j) / kappa(w)`` for each row of ``lin``; shape ``(n, 3)``."""
    child = np.einsum("nij,kjl->nkil", lin, LINEAR)
    mass = np.einsum("nkij,nkij->nk", child, child)
    return mass / mass.sum(axis=1, keepdims=True)


def sample_kappa(seed: int, depth: int, count: int, prefix: Sequence[int] = (), max_depth: int | None = MAX_DEPTH) -> np.ndarray:
    """Draw ``count`` words of length ``depth`` with probability ``kappa[w]``.

    Symbols are chosen one at a time from the exact conditional cylinder
    masses.  With ``prefix`` the draw is conditional on the cell of
    ``prefix`` and only the continuation is returned.  Pass
    ``max_depth=None`` for long words (Lyapunov runs); the running product is
    renormalized at every step so nothing underflows.
    """
    if max_depth is not None and depth > max_depth:
        raise gasket.DepthError(f"depth {depth} exceeds depth guard {max_depth}")
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    lin0 = gasket.compose_word(prefix).linear
    lin = np.broadcast_to(lin0 / np.linalg.norm(lin0), (count, 2, 2)).copy()
    words = np.empty((count, depth), dtype=np.int8)
    for j in range(depth):
        p = child_probabilities(lin)
        u = rng.random(count)
        s = (u[:, None] > np.cumsum(p, axis=1)[:, :2]).sum(axis=1)
        words[:, j] = s + 1
        lin = np.einsum("nij,njk->nik", lin, LINEAR[s])
        lin /= np.linalg.norm(lin, axis=(1, 2))[:, None, None]
    return words
