"""Batch driver for the shell, cap, Fourier and restriction experiments.

Every experiment is a sweep over one parameter (m, beta or a dyadic radius).
Rows are computed independently, optionally in worker processes, and written
in parameter order, so the output bytes do not depend on ``--jobs``.

Configuration may come from an INI file (``--config``) with one section per
experiment and an optional ``[common]`` section; command-line flags win.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields

import numpy as np

from . import __version__
from .cap_stats import (chord_to_arc, cell_histogram, max_cap_count, mean_square_statistic,
                        min_enclosing_arc_of_three, Cap)
from .expsums import PATTERNS, bilinear_sum, cap_pair_sum, separated_set
from .lattice_shell import (DIMENSIONS, ShellSpec, enumerate_shell, shell_count,
                            two_squares_count_oracle)
from .restriction import (cluster_certificate, cluster_threshold, random_coefficients,
                          restriction_record, CoefficientVector)
from .surface import KINDS, decay_profile, parse_surface

log = logging.getLogger("torusrestrict")

SCHEMA_VERSION = 1
EXPERIMENTS = ("shells", "caps", "jarnik", "meansquare", "sigma", "restrict", "certify",
               "bilinear", "cappair")
M_EXPERIMENTS = ("shells", "caps", "jarnik", "meansquare", "restrict", "certify", "cappair")
SURFACE_EXPERIMENTS = ("sigma", "restrict", "certify", "cappair")

COLUMNS = {
    "shells": ["count", "oracle", "count_per_power"],
    "caps": ["count", "lam", "r", "centered_r", "centered_2r", "exact2d_r", "exact2d_chord_r"],
    "jarnik": ["count", "lam", "min_arc3", "normalized", "max_cap_2lam13"],
    "meansquare": ["count", "cell_side", "n_cells", "sum_counts", "sum_sq", "sum_sq_per_count"],
    "sigma": ["block_end", "sup_scaled", "envelope", "samples"],
    "restrict": ["shell_size", "lambda_min", "lambda_max", "offdiag_total", "c_est", "C_est",
                 "n_groups", "max_group", "restricted"],
    "certify": ["shell_size", "threshold", "n_groups", "max_group", "offdiag_total", "c_est",
                "C_est", "lambda_min", "lambda_max", "sound"],
    "bilinear": ["pattern", "trial", "size_x", "size_y", "magnitude", "magnitude_linear",
                 "trivial_bound", "normalized", "within_bound"],
    "cappair": ["lam", "r", "size_a", "size_b", "magnitude", "trivial_bound", "normalized"],
}
PARAM_COLUMN = {"sigma": "R", "bilinear": "beta"}

DEFAULT_SURFACE = {2: "circle:rho=0.25", 3: "sphere:rho=0.25"}
CAP_DIRECTION = (1.0, math.sqrt(2.0), math.sqrt(3.0))


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str
    d: int = 2
    m_min: int | None = None
    m_max: int | None = None
    m_list: list = field(default_factory=list)
    beta_list: list = field(default_factory=list)
    surface: str | None = None
    threshold: float | None = None
    tol: float = 1e-8
    seed: int = 0
    out: str | None = None
    format: str = "csv"
    jobs: int = 1
    radius_scale: float = 1.0
    radius_exponent: float = 0.5
    cell_exponent: float = 0.25
    r_min: float = 16.0
    r_max: float = 1024.0
    samples: int = 32
    patterns: list = field(default_factory=lambda: list(PATTERNS))
    trials: int = 5
    cap_fraction: float = 0.25
    separation: float = 4.0

    def parameters(self) -> list:
        if self.experiment == "bilinear":
            return [float(b) for b in self.beta_list]
        if self.experiment == "sigma":
            out, R = [], self.r_min
            while 2 * R <= self.r_max * (1 + 1e-12):
                out.append(R)
                R *= 2
            return out
        if self.m_list:
            return [int(m) for m in self.m_list]
        if self.m_min is None or self.m_max is None:
            return []
        return list(range(int(self.m_min), int(self.m_max) + 1))

    def surface_text(self) -> str:
        return self.surface or DEFAULT_SURFACE.get(self.d, "sphere:rho=0.25")


CONFIG_FIELDS = {f.name: f for f in fields(ExperimentConfig) if f.name != "experiment"}
LIST_FIELDS = {"m_list": int, "beta_list": float, "patterns": str}


def _coerce(name: str, raw):
    if name in LIST_FIELDS:
        if isinstance(raw, (list, tuple)):
            items = list(raw)
        else:
            items = [s for s in str(raw).replace(";", ",").split(",") if s.strip()]
        conv = LIST_FIELDS[name]
        if conv is int:
            return [int(float(s)) for s in items]
        if conv is float:
            return [float(s) for s in items]
        return [str(s).strip() for s in items]
    kind = CONFIG_FIELDS[name].type
    if raw is None:
        return None
    if "int" in str(kind) and "float" not in str(kind):
        value = float(raw)
        if not value.is_integer():
            raise ValueError(f"{raw!r} is not an integer")
        return int(value)
    if "float" in str(kind):
        return float(raw)
    return str(raw)


def config_diagnostics(cfg: ExperimentConfig) -> list[str]:
    """Every schema violation in a config, without running anything."""
    out = []
    if cfg.experiment not in EXPERIMENTS:
        out.append(f"experiment: unknown experiment {cfg.experiment!r}; allowed: {', '.join(EXPERIMENTS)}")
        return out
    if cfg.d not in DIMENSIONS:
        out.append(f"d: must be one of {DIMENSIONS}, got {cfg.d}")
    if cfg.tol <= 0:
        out.append(f"tol: must be positive, got {cfg.tol}")
    if cfg.threshold is not None and cfg.threshold <= 0:
        out.append(f"threshold: must be positive, got {cfg.threshold}")
    if cfg.format not in ("csv", "json"):
        out.append(f"format: must be csv or json, got {cfg.format!r}")
    if cfg.jobs < 1:
        out.append(f"jobs: must be at least 1, got {cfg.jobs}")
    if cfg.experiment in M_EXPERIMENTS:
        if cfg.m_list and any(m < 0 for m in cfg.m_list):
            out.append("m_list: values must be non-negative")
        if not cfg.m_list:
            if cfg.m_min is None or cfg.m_max is None:
                out.append("m_min/m_max: an m-range (or m_list) is required")
            elif cfg.m_min < 0 or cfg.m_max < cfg.m_min:
                out.append(f"m_min/m_max: empty or negative range [{cfg.m_min}, {cfg.m_max}]")
    if cfg.experiment == "bilinear":
        if not cfg.beta_list:
            out.append("beta_list: at least one beta is required")
        elif any(b < 1 for b in cfg.beta_list):
            out.append("beta_list: every beta must be >= 1")
        bad = [p for p in cfg.patterns if p not in PATTERNS]
        if bad or not cfg.patterns:
            out.append(f"patterns: allowed values are {', '.join(PATTERNS)}")
        if cfg.trials < 1:
            out.append("trials: must be at least 1")
    if cfg.experiment == "sigma":
        if not (1 <= cfg.r_min < cfg.r_max):
            out.append(f"r_min/r_max: need 1 <= r_min < r_max, got {cfg.r_min}, {cfg.r_max}")
        if cfg.samples < 1:
            out.append("samples: must be at least 1")
    if cfg.experiment in SURFACE_EXPERIMENTS:
        try:
            surf = parse_surface(cfg.surface_text())
            if cfg.surface is not None and surf.d != cfg.d and cfg.experiment != "sigma":
                out.append(f"surface: {surf.kind} lives in d={surf.d}, config has d={cfg.d}")
        except (ValueError, KeyError) as exc:
            out.append(f"surface: {exc}")
    if cfg.experiment == "jarnik" and cfg.d != 2:
        out.append("d: jarnik needs d = 2")
    if cfg.experiment == "cappair":
        if cfg.d != 3:
            out.append("d: cappair needs d = 3")
        if not 0 < cfg.cap_fraction < 1:
            out.append("cap_fraction: must lie in (0, 1)")
    for name in ("radius_scale", "cell_exponent"):
        if getattr(cfg, name) <= 0:
            out.append(f"{name}: must be positive")
    return out


def _section_values(section, where: str, diags: list) -> dict:
    values = {}
    for key, raw in section.items():
        name = key.replace("-", "_")
        if name not in CONFIG_FIELDS:
            diags.append(f"[{where}] {key}: unknown key")
            continue
        try:
            values[name] = _coerce(name, raw)
        except (TypeError, ValueError) as exc:
            diags.append(f"[{where}] {key}: {exc}")
    return values


def read_config_file(path: str) -> tuple[dict, list[str]]:
    """Parse an INI config into {section: values} plus parse diagnostics."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except configparser.Error as exc:
        return {}, [f"{path}: {exc}"]
    diags, sections = [], {}
    for name in parser.sections():
        if name != "common" and name not in EXPERIMENTS:
            diags.append(f"[{name}]: unknown experiment; allowed: {', '.join(EXPERIMENTS)}")
            continue
        sections[name] = _section_values(parser[name], name, diags)
    return sections, diags


def validate(path: str) -> list[str]:
    """Full schema check of a config file; returns every violation found."""
    sections, diags = read_config_file(path)
    common = sections.get("common", {})
    for name, values in sections.items():
        if name == "common":
            continue
        try:
            cfg = ExperimentConfig(name, **{**common, **values})
        except TypeError as exc:
            diags.append(f"[{name}] {exc}")
            continue
        diags.extend(f"[{name}] {msg}" for msg in config_diagnostics(cfg))
    return diags


# --------------------------------------------------------------------------
# per-parameter workers (module level so they pickle)

def _derived_seed(seed: int, *keys) -> int:
    ints = [int(seed)] + [int(round(k)) if isinstance(k, float) else int(k) for k in keys]
    return int(np.random.SeedSequence(ints).generate_state(1)[0])


def _oracle_count(d: int, m: int) -> int:
    if d == 2:
        return two_squares_count_oracle(m)
    s = math.isqrt(m)
    return sum(_oracle_count(d - 1, m - x * x) for x in range(-s, s + 1))


def _row_shells(cfg, m):
    count = shell_count(ShellSpec(cfg.d, m))
    power = m ** ((cfg.d - 2) / 2) if m else 1.0
    return [{"count": count, "oracle": _oracle_count(cfg.d, m), "count_per_power": count / power}]


def _row_caps(cfg, m):
    shell = enumerate_shell(ShellSpec(cfg.d, m))
    if len(shell) == 0:
        return [{"status": "empty", "count": 0}]
    lam = shell.radius
    r = cfg.radius_scale * lam ** cfg.radius_exponent
    row = {"count": len(shell), "lam": lam, "r": r,
           "centered_r": max_cap_count(shell, r, "centered"),
           "centered_2r": max_cap_count(shell, 2 * r, "centered")}
    if cfg.d == 2 and m > 0:
        row["exact2d_r"] = max_cap_count(shell, r, "exact2d")
        row["exact2d_chord_r"] = max_cap_count(shell, 2 * chord_to_arc(r, lam), "exact2d")
    return [row]


def _row_jarnik(cfg, m):
    shell = enumerate_shell(ShellSpec(2, m))
    if len(shell) < 3:
        return [{"status": "skipped", "count": len(shell)}]
    lam = shell.radius
    arc = min_enclosing_arc_of_three(shell)
    return [{"count": len(shell), "lam": lam, "min_arc3": arc, "normalized": arc / lam ** (1 / 3),
             "max_cap_2lam13": max_cap_count(shell, 2.0 * lam ** (1 / 3), "exact2d")}]


def _row_meansquare(cfg, m):
    shell = enumerate_shell(ShellSpec(cfg.d, m))
    if len(shell) == 0:
        return [{"status": "empty", "count": 0}]
    hist = cell_histogram(shell, m ** cfg.cell_exponent)
    ms = mean_square_statistic(hist)
    return [{"count": len(shell), "cell_side": hist.cell_side, "n_cells": len(hist.counts),
             "sum_counts": hist.total, "sum_sq": ms, "sum_sq_per_count": ms / len(shell)}]


def _envelope(surf) -> float:
    rho = surf.semi_axes[0]
    if surf.kind == "circle":
        return 1 / (math.pi * math.sqrt(rho))
    if surf.kind == "sphere":
        return 1 / (2 * math.pi * rho)
    return float("nan")


def _row_sigma(cfg, R):
    surf = parse_surface(cfg.surface_text())
    (_, sup), = decay_profile(surf, R, 2 * R, cfg.samples, cfg.tol)
    return [{"d_override": surf.d, "block_end": 2 * R, "sup_scaled": sup,
             "envelope": _envelope(surf), "samples": cfg.samples}]


def _row_restrict(cfg, m):
    surf = parse_surface(cfg.surface_text())
    rec = restriction_record(surf, m, cfg.tol)
    if rec is None:
        return [{"status": "empty", "shell_size": 0}]
    row = rec.as_dict()
    row.pop("m")
    row["restricted"] = int(row["restricted"])
    return [row]


def _row_certify(cfg, m):
    surf = parse_surface(cfg.surface_text())
    shell = enumerate_shell(ShellSpec(surf.d, m))
    if len(shell) == 0:
        return [{"status": "empty", "shell_size": 0}]
    thr = cfg.threshold if cfg.threshold is not None else cluster_threshold(m)
    rec = cluster_certificate(shell, surf, thr, cfg.tol)
    sound = rec.c_est <= rec.lambda_min + 1e-12 and rec.lambda_max <= rec.C_est + 1e-12
    return [{"shell_size": rec.shell_size, "threshold": thr, "n_groups": rec.n_groups,
             "max_group": rec.max_group, "offdiag_total": rec.offdiag_total, "c_est": rec.c_est,
             "C_est": rec.C_est, "lambda_min": rec.lambda_min, "lambda_max": rec.lambda_max,
             "sound": int(sound)}]


def _row_bilinear(cfg, beta):
    rows = []
    for pattern in cfg.patterns:
        trials = 1 if pattern == "maximal_grid" else cfg.trials
        for trial in range(trials):
            sx = _derived_seed(cfg.seed, beta, PATTERNS.index(pattern), trial, 0)
            sy = _derived_seed(cfg.seed, beta, PATTERNS.index(pattern), trial, 1)
            X = separated_set(beta, pattern, sx)
            Y = separated_set(beta, pattern, sy)
            mag = abs(bilinear_sum(beta, X, Y))
            rows.append({"pattern": pattern, "trial": trial, "size_x": len(X), "size_y": len(Y),
                         "magnitude": mag,
                         "magnitude_linear": abs(bilinear_sum(beta, X, Y, nonlinear=False)),
                         "trivial_bound": len(X) * len(Y),
                         "normalized": mag / beta ** (23 / 24),
                         "within_bound": int(mag <= beta ** (23 / 24 + 0.05))})
    return rows


def cap_pair_magnitude(m: int, surface_text: str, cap_fraction: float, seed: int,
                       separation: float) -> dict:
    surf = parse_surface(surface_text)
    shell = enumerate_shell(ShellSpec(3, m))
    if len(shell) == 0:
        return {"status": "empty"}
    lam = shell.radius
    r = cap_fraction * lam
    capA = Cap.toward(CAP_DIRECTION, r)
    capB = Cap.toward(-np.asarray(CAP_DIRECTION), r)
    support = np.concatenate([capA.members(shell), capB.members(shell)])
    if len(support) == 0:
        return {"lam": lam, "r": r, "size_a": 0, "size_b": 0, "magnitude": 0.0,
                "trivial_bound": 0.0, "normalized": 0.0}
    coeffs = random_coefficients(shell.points[np.sort(support)], seed)
    mag = abs(cap_pair_sum(shell, surf, capA, capB, coeffs, separation))
    amp = {tuple(p): abs(v) for p, v in zip(coeffs.points.tolist(), coeffs.values)}
    ta = sum(amp[tuple(p)] for p in shell.points[capA.members(shell)].tolist())
    tb = sum(amp[tuple(p)] for p in shell.points[capB.members(shell)].tolist())
    return {"lam": lam, "r": r, "size_a": len(capA.members(shell)),
            "size_b": len(capB.members(shell)), "magnitude": mag, "trivial_bound": ta * tb,
            "normalized": mag / lam}


def _row_cappair(cfg, m):
    return [cap_pair_magnitude(m, cfg.surface_text(), cfg.cap_fraction,
                               _derived_seed(cfg.seed, m), cfg.separation)]


ROW_FUNCS = {"shells": _row_shells, "caps": _row_caps, "jarnik": _row_jarnik,
             "meansquare": _row_meansquare, "sigma": _row_sigma, "restrict": _row_restrict,
             "certify": _row_certify, "bilinear": _row_bilinear, "cappair": _row_cappair}


def _compute(task):
    cfg, param = task
    try:
        rows = ROW_FUNCS[cfg.experiment](cfg, param)
    except Exception as exc:  # recorded in the status column, sweep continues
        rows = [{"status": f"error:{type(exc).__name__}"}]
    return param, rows


def header(experiment: str) -> list[str]:
    return (["experiment", "schema_version", "d", PARAM_COLUMN.get(experiment, "m"), "seed", "status"]
            + COLUMNS[experiment])


def collect_rows(cfg: ExperimentConfig) -> list[dict]:
    params = cfg.parameters()
    tasks = [(cfg, p) for p in params]
    if cfg.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_compute, tasks, chunksize=max(1, len(tasks) // (4 * cfg.jobs))))
    else:
        results = [_compute(t) for t in tasks]
    cols = header(cfg.experiment)
    out = []
    for param, rows in results:
        for row in rows:
            d = row.pop("d_override", cfg.d)
            if cfg.experiment in ("restrict", "certify", "cappair"):
                d = parse_surface(cfg.surface_text()).d
            record = {c: "nan" for c in cols}
            record.update({"experiment": cfg.experiment, "schema_version": SCHEMA_VERSION, "d": d,
                           cols[3]: param, "seed": cfg.seed, "status": "ok"})
            record.update(row)
            out.append(record)
    return out


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _jsonable(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        return f if math.isfinite(f) else str(f)
    return v


def render(cfg: ExperimentConfig, rows: list[dict]) -> str:
    cols = header(cfg.experiment)
    if cfg.format == "json":
        payload = {"experiment": cfg.experiment, "schema_version": SCHEMA_VERSION,
                   "columns": cols,
                   "records": [{c: _jsonable(r[c]) for c in cols} for r in rows]}
        return json.dumps(payload, indent=1) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    for r in rows:
        writer.writerow([_fmt(r[c]) for c in cols])
    return buf.getvalue()


def write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def run(cfg: ExperimentConfig) -> int:
    diags = config_diagnostics(cfg)
    if not cfg.parameters() and not diags:
        diags.append("parameter range is empty")
    if diags:
        raise ConfigError("; ".join(diags))
    rows = collect_rows(cfg)
    out = cfg.out or f"{cfg.experiment}.{cfg.format}"
    write_atomic(out, render(cfg, rows))
    log.info("wrote %d rows to %s", len(rows), out)
    return 0


# --------------------------------------------------------------------------
# argument parsing

def _add_common(p: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    p.add_argument("--config", help="INI file with [common] and per-experiment sections")
    p.add_argument("--d", type=int, default=S, help="dimension (2..5)")
    p.add_argument("--m-min", type=int, default=S, help="first norm-square m")
    p.add_argument("--m-max", type=int, default=S, help="last norm-square m (inclusive)")
    p.add_argument("--m-list", default=S, help="comma-separated m values (overrides the range)")
    p.add_argument("--beta-list", default=S, help="comma-separated beta values")
    p.add_argument("--surface", default=S,
                   help="e.g. circle:rho=0.25,cx=0.5,cy=0.5 or ellipsoid:a=0.3,b=0.25,c=0.2")
    p.add_argument("--threshold", type=float, default=S,
                   help="cluster linking distance (default 2 lam^(1/3))")
    p.add_argument("--tol", type=float, default=S, help="quadrature tolerance (default 1e-8)")
    p.add_argument("--seed", type=int, default=S, help="base random seed (default 0)")
    p.add_argument("--out", default=S, help="output path (default <experiment>.<format>)")
    p.add_argument("--format", choices=("csv", "json"), default=S)
    p.add_argument("--jobs", type=int, default=S, help="worker processes (default 1)")
    p.add_argument("--radius-scale", type=float, default=S, help="caps: r = scale * lam^exponent")
    p.add_argument("--radius-exponent", type=float, default=S)
    p.add_argument("--cell-exponent", type=float, default=S, help="meansquare: cell side m^exponent")
    p.add_argument("--r-min", type=float, default=S, help="sigma: first dyadic block start")
    p.add_argument("--r-max", type=float, default=S, help="sigma: end of last dyadic block")
    p.add_argument("--samples", type=int, default=S, help="sigma: samples per dyadic block")
    p.add_argument("--patterns", default=S, help=f"bilinear: subset of {','.join(PATTERNS)}")
    p.add_argument("--trials", type=int, default=S, help="bilinear: random sets per pattern")
    p.add_argument("--cap-fraction", type=float, default=S, help="cappair: r = fraction * lam")
    p.add_argument("--separation", type=float, default=S,
                   help="cappair: required cap distance in units of r")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="torusrestrict", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        _add_common(sub.add_parser(name, help=f"run the {name} sweep"))
    v = sub.add_parser("validate", help="check a config file without running it")
    v.add_argument("path")
    return parser


def config_from_args(ns: argparse.Namespace) -> ExperimentConfig:
    values: dict = {}
    if getattr(ns, "config", None):
        sections, diags = read_config_file(ns.config)
        if diags:
            raise ConfigError("; ".join(diags))
        values.update(sections.get("common", {}))
        values.update(sections.get(ns.command, {}))
    for name in CONFIG_FIELDS:
        if hasattr(ns, name):
            values[name] = _coerce(name, getattr(ns, name))
    if "surface" in values and "d" not in values and values["surface"]:
        values["d"] = KINDS.get(values["surface"].partition(":")[0].strip(), 2)
    if ns.command == "cappair":
        values.setdefault("d", 3)
    return ExperimentConfig(ns.command, **values)


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if ns.command == "validate":
        try:
            diags = validate(ns.path)
        except ConfigError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        for msg in diags:
            print(msg)
        return 1 if diags else 0
    try:
        return run(config_from_args(ns))
    except ConfigError as exc:
        parser.error(str(exc))
    return 2


if __name__ == "__main__":
    sys.exit(main())
