"""Command-line front end.

    hgasket gasket  --depth 2 --out out/
    hgasket energy  --depth 9 --sub-depth 2 --format jsonl --out out/
    hgasket verify  --config run.ini

Every subcommand writes one table per report type into ``--out`` (a
directory).  Exit codes: 0 success, 1 verification failure, 2 usage or
configuration error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import configparser
import logging
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import cocycle, energy, gasket, geometry, measure, verify
from .report import FORMATS, write_table

log = logging.getLogger("hgasket")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    depth: int = 4
    sub_depth: int = 2
    theta_grid: tuple = verify.THETA_GRID
    samples: int = 10_000
    seed: int = 0
    c: float = measure.DEFAULT_C
    output_format: str = "csv"
    output_path: Path = field(default=Path("out"))
    word: tuple | None = None

    def validate(self) -> "RunConfig":
        if not 0 <= self.depth <= gasket.MAX_DEPTH:
            raise ConfigError(f"depth: must lie in [0, {gasket.MAX_DEPTH}], got {self.depth}")
        if self.sub_depth < 0 or self.depth + self.sub_depth > gasket.MAX_DEPTH:
            raise ConfigError(f"sub_depth: depth + sub_depth must not exceed {gasket.MAX_DEPTH}")
        if self.samples < 1:
            raise ConfigError(f"samples: must be >= 1, got {self.samples}")
        if not self.c > 0:
            raise ConfigError(f"norm_c: must be positive, got {self.c}")
        g = self.theta_grid
        if not g or any(t <= 0 for t in g) or any(b >= a for a, b in zip(g, g[1:])):
            raise ConfigError(f"theta: must be strictly decreasing positive values, got {list(g)}")
        if self.output_format not in FORMATS:
            raise ConfigError(f"format: must be one of {FORMATS}, got {self.output_format!r}")
        if self.word is not None and any(s not in gasket.SYMBOLS for s in self.word):
            raise ConfigError(f"word: symbols must be 1, 2 or 3")
        return self


# config keys (INI, section [run]) -> (RunConfig field, parser)
def _theta_list(text: str) -> tuple:
    return tuple(float(t) for t in str(text).replace(",", " ").split())


def _word(text: str) -> tuple:
    text = str(text).strip()
    if "x" in text:  # "1x100" -> (1,) * 100
        sym, count = text.split("x", 1)
        return (int(sym),) * int(count)
    return tuple(int(ch) for ch in text if not ch.isspace() and ch != ",")


KEYS = {
    "depth": ("depth", int),
    "sub_depth": ("sub_depth", int),
    "theta": ("theta_grid", _theta_list),
    "samples": ("samples", int),
    "seed": ("seed", int),
    "norm_c": ("c", float),
    "format": ("output_format", str),
    "out": ("output_path", Path),
    "word": ("word", _word),
}


def load_config(path: Path | None, overrides: dict) -> RunConfig:
    values: dict = {}
    if path is not None:
        parser = configparser.ConfigParser()
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except OSError as exc:
            raise ConfigError(f"config: cannot read {path}: {exc}") from exc
        except configparser.Error as exc:
            raise ConfigError(f"config: {exc}") from exc
        for section in parser.sections():
            for key, raw in parser.items(section):
                key = key.replace("-", "_")
                if key not in KEYS:
                    raise ConfigError(f"{key}: unknown configuration key")
                name, conv = KEYS[key]
                try:
                    values[name] = conv(raw)
                except ValueError as exc:
                    raise ConfigError(f"{key}: {exc}") from exc
    for key, raw in overrides.items():
        if raw is None:
            continue
        name, conv = KEYS[key]
        try:
            values[name] = conv(raw)
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}") from exc
    return RunConfig(**values).validate()


def _w(word) -> str:
    return "".join(str(int(s)) for s in word)


def _prov(cfg: RunConfig) -> dict:
    return {"depth": cfg.depth, "seed": cfg.seed, "c": cfg.c}


def _sampled(cfg: RunConfig, depth: int, max_depth=gasket.MAX_DEPTH) -> np.ndarray:
    words = measure.sample_kappa(cfg.seed, depth, cfg.samples, max_depth=max_depth)
    order = sorted(range(len(words)), key=lambda k: (_w(words[k]), k))
    return words[order]


# -- subcommands ---------------------------------------------------------------


def cmd_gasket(cfg: RunConfig) -> dict[str, list[dict]]:
    words = gasket.words_at_depth(cfg.depth)
    lin, tr = gasket.affine_parts(cfg.depth)
    verts = gasket.cell_vertices(lin, tr)
    cells, vrows = [], []
    seen: dict[tuple, dict] = {}
    for k, w in enumerate(words):
        name = _w(w)
        row = {**_prov(cfg), "word": name}
        for label, p in zip("ABC", verts[k]):
            row[f"{label}_x1"], row[f"{label}_x2"] = float(p[0]), float(p[1])
            vrows.append({**_prov(cfg), "word": name, "vertex": label, "x1": float(p[0]), "x2": float(p[1])})
            key = (round(float(p[0]), 12), round(float(p[1]), 12))
            entry = seen.setdefault(key, {"x1": float(p[0]), "x2": float(p[1]), "cells": []})
            entry["cells"].append(f"{name}:{label}")
        cent = verts[k].mean(axis=0)
        row["centroid_x1"], row["centroid_x2"] = float(cent[0]), float(cent[1])
        cells.append(row)
    junctions = [
        {**_prov(cfg), "x1": e["x1"], "x2": e["x2"], "multiplicity": len(e["cells"]), "cells": " ".join(e["cells"])}
        for e in seen.values()
        if len(e["cells"]) > 1
    ]
    boundary = []
    poly = geometry.boundary_polyline(cfg.depth)
    for side, pts in poly.sides.items():
        for i, p in enumerate(pts):
            boundary.append({**_prov(cfg), "side": side, "index": i, "x1": float(p[0]), "x2": float(p[1])})
    return {"gasket_cells": cells, "gasket_vertices": vrows, "gasket_junctions": junctions, "gasket_boundary": boundary}


def cmd_measure(cfg: RunConfig) -> dict[str, list[dict]]:
    words = gasket.words_at_depth(cfg.depth)
    tau, kap = measure.tau_at_depth(cfg.depth, cfg.c)
    rows = [
        {
            **_prov(cfg),
            "word": _w(w),
            "tau11": float(t[0, 0]),
            "tau12": float(t[0, 1]),
            "tau22": float(t[1, 1]),
            "kappa": float(k),
        }
        for w, t, k in zip(words, tau, kap)
    ]
    eig = measure.principal_eigenvalue()
    summary = [{**_prov(cfg), "beta": eig.beta, "iterations": eig.iterations, "residual": eig.residual,
                "kappa_total": float(kap.sum())}]
    return {"measure_cells": rows, "measure_summary": summary}


def cmd_sample(cfg: RunConfig) -> dict[str, list[dict]]:
    words = _sampled(cfg, cfg.depth)
    lin, tr = gasket.affine_parts_of(words)
    pts = gasket.centroids(lin, tr)
    kap = measure.kappa_batch(lin, cfg.depth, cfg.c)
    rows = [
        {**_prov(cfg), "index": i, "word": _w(w), "kappa": float(k), "x1": float(p[0]), "x2": float(p[1])}
        for i, (w, k, p) in enumerate(zip(words, kap, pts))
    ]
    return {"sample": rows}


def cmd_vfield(cfg: RunConfig) -> dict[str, list[dict]]:
    if cfg.depth < 1:
        raise ConfigError("depth: vfield needs depth >= 1")
    words = np.array([cfg.word]) if cfg.word else _sampled(cfg, cfg.depth)
    depth = words.shape[1]
    rows = [{**_prov(cfg), **row} for row in cocycle.v_field_table(depth, words)]
    return {"vfield": rows}


def cmd_lyapunov(cfg: RunConfig) -> dict[str, list[dict]]:
    if cfg.word is not None:
        words = [cfg.word]
    else:
        if cfg.depth < 2:
            raise ConfigError("depth: lyapunov needs depth >= 2")
        words = list(_sampled(cfg, cfg.depth))
    rows = []
    for w in words:
        rep = cocycle.lyapunov(tuple(int(s) for s in w))
        rows.append({**_prov(cfg), "length": rep.depth, "word": _w(w), "lambda1": rep.lambda1,
                     "lambda2": rep.lambda2, "gap": rep.gap, "flagged": rep.flagged})
    return {"lyapunov": rows}


def cmd_anisotropy(cfg: RunConfig) -> dict[str, list[dict]]:
    theta = cfg.theta_grid[-1]
    words = [cfg.word] if cfg.word else list(_sampled(cfg, cfg.depth + cfg.sub_depth))
    rows = []
    for w in words:
        w = tuple(int(s) for s in w)
        n = min(cfg.depth, len(w))
        rec = geometry.anisotropy(w, n, theta=theta)
        rows.append({**_prov(cfg), "word": _w(w), "n": n, "theta": theta, "v1": float(rec.v[0]),
                     "v2": float(rec.v[1]), "ratio34": rec.ratio34,
                     "alignment35": "" if rec.alignment35 is None else rec.alignment35,
                     "theta_member": rec.theta_member, "flagged": rec.flagged})
    return {"anisotropy": rows}


def cmd_theta(cfg: RunConfig) -> dict[str, list[dict]]:
    rows = []
    for theta in cfg.theta_grid:
        try:
            rep = geometry.theta_mass_report(theta, cfg.depth, cfg.samples, cfg.seed, c=cfg.c)
        except gasket.DomainError as exc:
            log.warning("%s", exc)
            rows.append({**_prov(cfg), "theta": theta, "empty": True, "ratio_mass": 0.0, "ratio_mass_se": 0.0,
                         "kappa_S_theta": 0.0, "delta_hat": 1.0, "empirical_F_theta_mass": 0.0,
                         "F_theta_se": 0.0, "theta0_estimate": geometry.theta0_estimate()})
            continue
        rows.append({**_prov(cfg), "theta": theta, "empty": False, "ratio_mass": rep.ratio_mass,
                     "ratio_mass_se": rep.ratio_mass_se, "kappa_S_theta": rep.kappa_S_theta,
                     "delta_hat": rep.delta_hat, "empirical_F_theta_mass": rep.empirical_F_theta_mass,
                     "F_theta_se": rep.F_theta_se, "theta0_estimate": rep.theta0_estimate})
    return {"theta": rows}


def cmd_energy(cfg: RunConfig) -> dict[str, list[dict]]:
    rows = []
    for f in energy.battery():
        r = energy.theorem1_report(f, cfg.depth, cfg.sub_depth, c=cfg.c)
        rows.append({**_prov(cfg), "sub_depth": r.sub_depth, "field": r.field,
                     "dirichlet_matrix": r.dirichlet_matrix, "dirichlet_vfield": r.dirichlet_vfield,
                     "cheeger_pre": r.cheeger_pre, "half_dirichlet": r.half_dirichlet,
                     "relative_gap": r.relative_gap, "lower_bound_violations": r.lower_bound_violations,
                     "lower_bound_cells": r.lower_bound_cells})
    return {"energy": rows}


def cmd_verify(cfg: RunConfig, stream=None) -> tuple[dict[str, list[dict]], bool]:
    stream = stream or sys.stdout
    ctx = verify.VerifyContext(seed=cfg.seed, samples=cfg.samples, c=cfg.c)
    timings: dict = {}
    results = verify.run_checks(ctx, timings=timings)
    rows = [{"seed": cfg.seed, "c": cfg.c, "criterion": r.criterion, "check": r.name, "status": r.status,
             "measured": r.measured, "threshold": r.threshold} for r in results]
    budgets = verify.runtime_budgets(timings)
    ok = all(r.passed for r in results) and all(t <= b for _, t, b in budgets)
    width = max(len(r.name) for r in results)
    for r in results:
        print(f"[{r.status.upper():4s}] {r.criterion:2d} {r.name:<{width}}  measured={r.measured:.6g}  "
              f"threshold={r.threshold:.6g}", file=stream)
    for name, t, b in budgets:
        status = "PASS" if t <= b else "FAIL"
        print(f"[{status}]    {name:<{width}}  seconds={t:.4g}  budget={b:g}", file=stream)
    failing = [r.name for r in results if not r.passed] + [n for n, t, b in budgets if t > b]
    print(f"{len(results)} checks, {len(failing)} failing" + (f": {', '.join(failing)}" if failing else ""),
          file=stream)
    return {"verify": rows}, ok


COMMANDS = {
    "gasket": cmd_gasket,
    "measure": cmd_measure,
    "vfield": cmd_vfield,
    "lyapunov": cmd_lyapunov,
    "anisotropy": cmd_anisotropy,
    "theta": cmd_theta,
    "energy": cmd_energy,
    "sample": cmd_sample,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--depth", type=int)
    common.add_argument("--sub-depth", type=int, dest="sub_depth")
    common.add_argument("--theta", help="comma separated, strictly decreasing")
    common.add_argument("--samples", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--norm-c", type=float, dest="norm_c")
    common.add_argument("--format", choices=FORMATS)
    common.add_argument("--out", help="output directory")
    common.add_argument("--config", type=Path, help="INI file with a [run] section")
    common.add_argument("--word", help="explicit word, e.g. 1123 or 1x100")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="hgasket", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    overrides = {k: getattr(args, k) for k in KEYS}
    try:
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        print(f"hgasket: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.command == "verify":
            tables, ok = cmd_verify(cfg)
        else:
            tables, ok = COMMANDS[args.command](cfg), True
    except (ConfigError, gasket.DomainError, gasket.DepthError) as exc:
        print(f"hgasket: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg.output_path.mkdir(parents=True, exist_ok=True)
        for name, rows in tables.items():
            path = write_table(rows, cfg.output_path, name, cfg.output_format)
            log.info("wrote %s (%d rows)", path, len(rows))
    except OSError as exc:
        print(f"hgasket: cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK if ok else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
