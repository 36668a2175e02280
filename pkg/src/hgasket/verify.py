"""Registered acceptance checks, run by ``hgasket verify`` and the test suite.

Each check returns one or more ``CheckResult`` rows.  Wall-clock budgets are
reported separately (``runtime_checks``) because timings are not
reproducible and must not leak into the byte-stable report file.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import cocycle, energy, gasket, geometry, measure

THETA_GRID = (0.2, 0.1, 0.05, 0.025)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    measured: float
    threshold: float
    criterion: int

    @property
    def status(self) -> str:
        return "pass" if self.passed else "fail"


@dataclass
class VerifyContext:
    seed: int = 0
    samples: int = 10_000
    c: float = measure.DEFAULT_C
    word_samples: int = 1000


CHECKS: dict[int, Callable[[VerifyContext], list[CheckResult]]] = {}


def check(criterion: int):
    def deco(fn):
        CHECKS[criterion] = fn
        return fn

    return deco


def _strictly_decreasing(xs) -> bool:
    return all(b < a for a, b in zip(xs, xs[1:]))


def _max_violation_of_decrease(xs) -> float:
    """Largest ``x[k+1] - x[k]``; negative when strictly decreasing."""
    return float(max(b - a for a, b in zip(xs, xs[1:])))


@check(1)
def eigenvalue(ctx: VerifyContext) -> list[CheckResult]:
    res = measure.principal_eigenvalue(1e-12, 100)
    err_beta = abs(res.beta - 0.6)
    err_id = float(np.abs(measure.ruelle_apply(np.eye(2)) - 0.6 * np.eye(2)).max())
    err_eig = float(np.abs(res.eigenmatrix - np.eye(2)).max())
    return [
        CheckResult("beta", err_beta <= 1e-12, err_beta, 1e-12, 1),
        CheckResult("ruelle_identity", err_id <= 1e-14, err_id, 1e-14, 1),
        CheckResult("eigenmatrix_identity", err_eig <= 1e-12, err_eig, 1e-12, 1),
    ]


@check(2)
def telescoping(ctx: VerifyContext) -> list[CheckResult]:
    worst_tau = worst_kappa = 0.0
    lin = np.eye(2)[None]
    for depth in range(11):
        if depth:
            lin = np.einsum("nij,kjl->nkil", lin, gasket.LINEAR).reshape(-1, 2, 2)
        tau = measure.tau_batch(lin, depth, ctx.c)
        kap = measure.kappa_batch(lin, depth, ctx.c)
        worst_tau = max(worst_tau, float(np.linalg.norm(tau.sum(axis=0) - ctx.c * np.eye(2))))
        worst_kappa = max(worst_kappa, abs(float(kap.sum()) / (2 * ctx.c) - 1.0))
    got = np.array([measure.kappa_cell(w, 0.5) for w in ((1, 1), (1, 2), (1, 3))])
    err = float(np.abs(got - np.array([41, 17, 17]) / 225).max())
    return [
        CheckResult("tau_telescoping", worst_tau <= 1e-10, worst_tau, 1e-10, 2),
        CheckResult("kappa_telescoping", worst_kappa <= 1e-9, worst_kappa, 1e-9, 2),
        CheckResult("depth2_masses", err <= 1e-12, err, 1e-12, 2),
    ]


def _all_words(max_len: int):
    for n in range(max_len + 1):
        yield from itertools.product(gasket.SYMBOLS, repeat=n)


@check(3)
def pushforward(ctx: VerifyContext) -> list[CheckResult]:
    tests = list(_all_words(3))
    worst = max(measure.verify_pushforward(w, tests, ctx.c) for w in _all_words(2))
    return [CheckResult("pushforward", worst <= 1e-10, worst, 1e-10, 3)]


@check(4)
def rank_one(ctx: VerifyContext) -> list[CheckResult]:
    words = measure.sample_kappa(ctx.seed, 16, ctx.word_samples)
    medians = []
    for d in (4, 8, 12, 16):
        lin, _ = gasket.affine_parts_of(words[:, :d])
        medians.append(float(np.median(cocycle.projection_batch(lin)["residual_rank1"])))
    err = 0.0
    for l in range(1, 21):
        est = cocycle.projection_estimate((1,) * l)
        s1, s2 = 0.6**l, 0.2**l
        err = max(
            err,
            abs(est.residual_rank1 - s2 / np.hypot(s1, s2)),
            abs(est.residual_proj - np.sqrt(2) * s2**2 / (s1**2 + s2**2)),
            float(np.abs(est.v - [1.0, 0.0]).max()),
        )
    return [
        CheckResult("rank1_median_decreasing", _strictly_decreasing(medians), _max_violation_of_decrease(medians), 0.0, 4),
        CheckResult("rank1_diagonal_closed_form", err <= 1e-12, err, 1e-12, 4),
    ]


@check(5)
def lyapunov(ctx: VerifyContext) -> list[CheckResult]:
    words = measure.sample_kappa(ctx.seed, 200, ctx.word_samples, max_depth=None)
    l1, l2 = cocycle.lyapunov_batch(words)
    per_word = [cocycle.lyapunov(w) for w in words[:50]]
    l1 = np.concatenate([l1, [r.lambda1 for r in per_word]])
    l2 = np.concatenate([l2, [r.lambda2 for r in per_word]])
    det_err = float(np.abs(l1 + l2 - np.log(3 / 25)).max())
    ones = cocycle.lyapunov((1,) * 100)
    ones_err = max(abs(ones.lambda1 - np.log(0.6)), abs(ones.lambda2 - np.log(0.2)))
    return [
        CheckResult("lyapunov_sum", det_err <= 1e-10, det_err, 1e-10, 5),
        CheckResult("lyapunov_all_ones", ones_err <= 1e-12, ones_err, 1e-12, 5),
        CheckResult("lambda1_negative", bool(np.all(l1 < 0)), float(l1.max()), 0.0, 5),
    ]


@check(6)
def anisotropy(ctx: VerifyContext) -> list[CheckResult]:
    words = measure.sample_kappa(ctx.seed, 16, ctx.word_samples)
    lin, tr = gasket.affine_parts_of(words)
    v = cocycle.projection_batch(lin)["v"]
    medians = []
    for n in (4, 8, 12):
        ln, tn = gasket.affine_parts_of(words[:, :n])
        medians.append(float(np.median(geometry.ratio34_batch(gasket.cell_vertices(ln, tn), v))))
    ratios = [geometry.anisotropy((1,) * l, l, v=(1.0, 0.0)).ratio34 for l in range(1, 14)]
    steps = np.array(ratios[1:]) / np.array(ratios[:-1])
    worst = float(np.abs(steps * 3 - 1).max())
    return [
        CheckResult("ratio34_median_decreasing", _strictly_decreasing(medians), _max_violation_of_decrease(medians), 0.0, 6),
        CheckResult("ratio34_all_ones_decay", worst <= 0.1, worst, 0.1, 6),
    ]


@check(7)
def mass_concentration(ctx: VerifyContext) -> list[CheckResult]:
    samples = max(ctx.samples, 10_000)
    masses = []
    f_slack = np.inf
    for theta in THETA_GRID:
        try:
            rep = geometry.theta_mass_report(theta, 6, samples, ctx.seed, c=ctx.c)
        except gasket.DomainError:
            masses.append(0.0)  # S_theta empty: no mass
            continue
        masses.append(rep.ratio_mass)
        bound = 1 - 2 * rep.delta_hat - 3 * rep.F_theta_se
        f_slack = min(f_slack, rep.empirical_F_theta_mass - bound)
    increasing = all(b > a for a, b in zip(masses, masses[1:]))
    return [
        CheckResult("ratio_mass_increasing", increasing, float(min(b - a for a, b in zip(masses, masses[1:]))), 0.0, 7),
        CheckResult("ratio_mass_smallest_theta", masses[-1] >= 0.95, masses[-1], 0.95, 7),
        CheckResult("F_theta_mass_bound", bool(f_slack >= 0), float(f_slack), 0.0, 7),
    ]


@check(8)
def dirichlet_exactness(ctx: VerifyContext) -> list[CheckResult]:
    vecs = [np.array([1.0, 0.0]), np.array([0.0, 1.0]), np.array([1.0, 1.0])]
    worst = 0.0
    for depth in range(1, 13):
        for a, b in itertools.product(vecs, vecs):
            got = energy.dirichlet_matrix(energy.linear_field(a), energy.linear_field(b), depth, ctx.c)
            worst = max(worst, abs(got - ctx.c * float(a @ b)))
    return [CheckResult("dirichlet_linear_exact", worst <= 1e-12, worst, 1e-12, 8)]


@check(9)
def self_similarity(ctx: VerifyContext) -> list[CheckResult]:
    fields = {f.name: f for f in energy.battery()}
    lin_worst = max(
        energy.self_similarity_residual(fields[n], d, c=ctx.c) for n in ("x1", "x2") for d in range(0, 9)
    )
    rows = [CheckResult("self_similarity_linear", lin_worst <= 1e-12, lin_worst, 1e-12, 9)]
    for name in ("x1^2", "sin(pi x1)cos(pi x2)"):
        r6 = energy.self_similarity_residual(fields[name], 6, c=ctx.c)
        r10 = energy.self_similarity_residual(fields[name], 10, c=ctx.c)
        rows.append(CheckResult(f"self_similarity_refines[{name}]", r10 <= r6, r10, r6, 9))
    return rows


ENERGY_DEPTHS = ((6, 2), (9, 2), (12, 2))


def energy_reports(c: float = measure.DEFAULT_C) -> dict[str, list[energy.EnergyReport]]:
    return {
        f.name: [energy.theorem1_report(f, d, s, c=c) for d, s in ENERGY_DEPTHS] for f in energy.battery()
    }


@check(10)
def energy_comparison(ctx: VerifyContext) -> list[CheckResult]:
    reports = energy_reports(ctx.c)
    target = ctx.c / 2
    lin = reports["x1"][-1]
    err = abs(lin.cheeger_pre - target) / target
    rows = [CheckResult("cheeger_linear_depth12", err <= 1e-2, err, 1e-2, 10)]
    for name, reps in reports.items():
        gaps = [r.relative_gap for r in reps]
        if all(r.half_dirichlet == 0 and r.cheeger_pre == 0 for r in reps):
            ok = True  # zero energy on both sides: the gap is identically 0
        else:
            ok = _strictly_decreasing(gaps)
        rows.append(CheckResult(f"gap_decreasing[{name}]", ok, _max_violation_of_decrease(gaps), 0.0, 10))
    violations = sum(r.lower_bound_violations for reps in reports.values() for r in reps)
    cells = sum(r.lower_bound_cells for reps in reports.values() for r in reps)
    rows.append(CheckResult("lip_lower_bound_pointwise", violations == 0, violations / cells, 0.0, 10))
    return rows


@check(11)
def determinism(ctx: VerifyContext) -> list[CheckResult]:
    # in-process proxy; the acceptance tests also compare two full CLI runs
    from .report import render_rows

    def run():
        words = measure.sample_kappa(ctx.seed, 8, 200)
        rows = cocycle.v_field_table(8, words)
        return render_rows(rows, "csv")

    same = run() == run()
    return [CheckResult("determinism", same, float(same), 1.0, 11)]


def run_checks(ctx: VerifyContext | None = None, criteria=None, timings: dict | None = None) -> list[CheckResult]:
    ctx = ctx or VerifyContext()
    out: list[CheckResult] = []
    for k in sorted(CHECKS):
        if criteria is None or k in criteria:
            t = time.perf_counter()
            out.extend(CHECKS[k](ctx))
            if timings is not None:
                timings[k] = time.perf_counter() - t
    return out


def _uncached_depth10():
    lin, _ = gasket._affine_parts.__wrapped__(10, gasket.SYMBOLS)
    tau = measure.tau_batch(lin, 10)
    return tau.sum(axis=0), measure.kappa_batch(lin, 10).sum()


def runtime_budgets(timings: dict) -> list[tuple[str, float, float]]:
    """``(name, seconds, budget)`` rows.  Fast operations are timed afresh
    (best of five); the energy battery uses its timing from ``run_checks``."""

    def best(fn, repeat=5):
        times = []
        for _ in range(repeat):
            t = time.perf_counter()
            fn()
            times.append(time.perf_counter() - t)
        return min(times)

    out = [
        ("eigenvalue_runtime", best(lambda: (measure.principal_eigenvalue(1e-12, 100), measure.ruelle_apply(np.eye(2)))), 1e-3),
        ("telescoping_depth10_runtime", best(_uncached_depth10, 1), 10.0),
    ]
    if 10 in timings:
        out.append(("energy_battery_runtime", timings[10], 120.0))
    return out
