"""Command-line entry point: ``bmf <subcommand> ...``.

Each run writes its data files plus ``<command>.manifest.json`` into the
output directory (``--out``, else ``$BMF_OUT_DIR``, else the working
directory).  Failures exit non-zero with a one-line JSON error on stderr.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import re
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    CRITICAL_CUTOFF_RATIO,
    critical_point_convergence,
    identity_suite,
    polo_check,
    run_ensemble,
    seed_series,
    vertical_scan,
)
from .distance import d_sigma_at_cutoffs, geometric_cutoffs, tail_diagnostic
from .errors import BMFError, CapacityError, DomainError, UsageError
from .sampling import BiasProfile, DeltaRule, realize, sample_omega
from .sieve import DEFAULT_GRID_RATIO, mertens, n_max

SCHEMA_VERSION = 1
_NUM = r"\s*([-+0-9.eE]+)\s*"
_PRESETS = {
    "alpha": re.compile(rf"alpha\({_NUM}\)$"),
    "alpha-delta": re.compile(rf"alpha-delta\({_NUM},\s*([A-Za-z_\-:0-9.eE+]+)\s*\)$"),
    "alpha-k": re.compile(rf"alpha-k\({_NUM},{_NUM}\)$"),
    "strong": re.compile(rf"strong\({_NUM},{_NUM}\)$"),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# profiles --------------------------------------------------------------------


def parse_preset(text: str) -> BiasProfile:
    """Profile from a preset name such as ``alpha-delta(0.25,0.5)`` or ``strong(0.5,0.8)``."""
    name = text.strip().lower().replace(" ", "")
    if name == "unbiased":
        return BiasProfile.unbiased()
    if name == "mobius":
        return BiasProfile.mobius()
    try:
        if m := _PRESETS["alpha"].match(name):
            return BiasProfile.alpha_delta(float(m.group(1)), 1.0)
        if m := _PRESETS["alpha-delta"].match(name):
            return BiasProfile.alpha_delta(float(m.group(1)), DeltaRule.from_json(m.group(2)))
        if m := _PRESETS["alpha-k"].match(name):
            return BiasProfile.alpha_k(float(m.group(1)), int(m.group(2)))
        if m := _PRESETS["strong"].match(name):
            return BiasProfile.strong(float(m.group(1)), float(m.group(2)))
    except ValueError as exc:
        if isinstance(exc, BMFError):
            raise
        raise UsageError(f"bad preset parameters in {text!r}: {exc}") from None
    raise UsageError(f"unknown preset {text!r}")


def parse_profile(text: str) -> BiasProfile:
    """A preset name, an inline JSON object, or a path to a JSON profile file."""
    text = text.strip()
    if text.startswith("{"):
        return BiasProfile.from_json(text)
    path = Path(text)
    if path.suffix == ".json" or path.is_file():
        if not path.is_file():
            raise UsageError(f"profile file not found: {text}")
        return BiasProfile.from_json(path.read_text())
    return parse_preset(text)


def _profile_from_args(args) -> BiasProfile:
    if getattr(args, "profile", None) and getattr(args, "preset", None):
        raise UsageError("give either --profile or --preset, not both")
    if getattr(args, "profile", None):
        return parse_profile(args.profile)
    if getattr(args, "preset", None):
        return parse_preset(args.preset)
    raise UsageError("a profile is required (--profile FILE or --preset NAME)")


# validation helpers ----------------------------------------------------------


def _seeds(args) -> list[int]:
    k = 1 if args.seeds is None else int(args.seeds)
    if k < 1:
        raise UsageError("--seeds must be >= 1")
    return [int(args.seed) + i for i in range(k)]


def _check_limit(name: str, value: int, lo: int = 2) -> int:
    if value < lo:
        raise DomainError(f"{name} must be >= {lo}, got {value}")
    if value > n_max():
        raise CapacityError(f"{name} = {value} exceeds the configured cap {n_max()}")
    return value


def _check_sigma(sigma: float) -> float:
    if not 0.5 < sigma <= 1.0:
        raise DomainError(f"sigma must lie in (1/2, 1], got {sigma}")
    return sigma


def _check_grid_ratio(r: float) -> float:
    if not 1.0 < r <= 2.0:
        raise DomainError(f"grid ratio must lie in (1, 2], got {r}")
    return r


def _parse_complex(text: str) -> complex:
    parts = [p for p in re.split(r"[,\s]+", text.strip()) if p]
    try:
        vals = [float(p) for p in parts]
    except ValueError:
        raise UsageError(f"cannot parse s = {text!r}; expected 'sigma,t'") from None
    if len(vals) == 1:
        return complex(vals[0], 0.0)
    if len(vals) == 2:
        return complex(vals[0], vals[1])
    raise UsageError(f"cannot parse s = {text!r}; expected 'sigma,t'")


def _parse_cutoffs(text: str) -> list[int]:
    parts = text.split(":")
    if len(parts) not in (2, 3):
        raise UsageError(f"cutoffs must look like lo:hi[:ratio], got {text!r}")
    try:
        lo, hi = int(float(parts[0])), int(float(parts[1]))
        ratio = float(parts[2]) if len(parts) == 3 else CRITICAL_CUTOFF_RATIO
    except ValueError:
        raise UsageError(f"cannot parse cutoffs {text!r}") from None
    _check_limit("largest cutoff", hi, 1)
    return geometric_cutoffs(lo, hi, ratio)


def _parse_grid(text: str) -> list[float]:
    try:
        return [float(a) for a in text.split(",") if a.strip()]
    except ValueError:
        raise UsageError(f"cannot parse a grid {text!r}") from None


# output ----------------------------------------------------------------------


class Run:
    """Collects outputs of one invocation and writes the manifest."""

    def __init__(self, command: str, argv: list[str], out_dir: Path):
        self.command = command
        self.argv = argv
        self.out_dir = out_dir
        self.started = datetime.now(timezone.utc).isoformat()
        self.files: list[Path] = []
        self.params: dict = {}
        self.profile: dict | None = None
        self.seeds: list[int] = []

    def csv(self, stem: str, schema: str, header: list[str], rows) -> Path:
        path = self.out_dir / f"{stem}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(f"#schema={schema}@{SCHEMA_VERSION}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
        self.files.append(path)
        return path

    def json(self, stem: str, schema: str, body: dict) -> Path:
        path = self.out_dir / f"{stem}.json"
        doc = {"schema": schema, "version": SCHEMA_VERSION, "artifact_version": __version__}
        doc.update(body)
        path.write_text(json.dumps(_jsonable(doc), indent=2) + "\n", encoding="utf-8")
        self.files.append(path)
        return path

    def finish(self) -> Path:
        manifest = {
            "schema": "manifest",
            "version": SCHEMA_VERSION,
            "artifact_version": __version__,
            "command": self.command,
            "argv": self.argv,
            "profile": self.profile,
            "seeds": self.seeds,
            "params": self.params,
            "started": self.started,
            "finished": datetime.now(timezone.utc).isoformat(),
            "outputs": {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in self.files},
        }
        path = self.out_dir / f"{self.command}.manifest.json"
        path.write_text(json.dumps(_jsonable(manifest), indent=2) + "\n", encoding="utf-8")
        return path


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        obj = float(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def _out_dir(args) -> Path:
    d = args.out or os.environ.get("BMF_OUT_DIR") or "."
    path = Path(d)
    path.mkdir(parents=True, exist_ok=True)
    return path


# subcommands -----------------------------------------------------------------


def cmd_mertens(args, run: Run):
    limit = _check_limit("--limit", args.limit, 1)
    ratio = _check_grid_ratio(args.grid_ratio)
    run.params = {"limit": limit, "grid_ratio": ratio}
    run.profile = BiasProfile.mobius().to_json()
    ser = mertens(limit, ratio)
    rows = ((int(x), int(m), int(r), "", "mobius") for x, m, r in zip(ser.grid, ser.sums, ser.running_max))
    run.csv("mertens", "series", ["x", "m", "running_max", "seed", "profile"], rows)


def cmd_msum(args, run: Run):
    profile = _profile_from_args(args)
    limit = _check_limit("--limit", args.limit)
    ratio = _check_grid_ratio(args.grid_ratio)
    seeds = _seeds(args)
    run.params = {"limit": limit, "grid_ratio": ratio}
    run.profile, run.seeds = profile.to_json(), seeds
    rows = []
    for seed in seeds:
        ser = seed_series(profile, limit, seed, ratio)
        rows.extend(
            (int(x), int(m), int(r), seed, profile.label()) for x, m, r in zip(ser.grid, ser.sums, ser.running_max)
        )
    run.csv("msum", "series", ["x", "m", "running_max", "seed", "profile"], rows)


def cmd_exponent(args, run: Run):
    profile = _profile_from_args(args)
    limit = _check_limit("--limit", args.limit)
    ratio = _check_grid_ratio(args.grid_ratio)
    seeds = _seeds(args)
    if len(seeds) < 2:
        raise DomainError("an ensemble needs --seeds >= 2")
    if not 0.0 < args.window <= 1.0:
        raise DomainError(f"--window must lie in (0, 1], got {args.window}")
    run.params = {"limit": limit, "grid_ratio": ratio, "window": args.window}
    run.profile, run.seeds = profile.to_json(), seeds
    summary = run_ensemble(profile, limit, seeds, ratio, args.window, args.workers)
    run.json("exponent", "ensemble_summary", summary.to_json())


def cmd_distance(args, run: Run):
    f_prof, g_prof = parse_profile(args.f), parse_profile(args.g)
    sigma = _check_sigma(args.sigma)
    pmax = _check_limit("--pmax", args.pmax)
    cuts = geometric_cutoffs(min(args.cutoff_start, pmax // 2 or 1), pmax, args.cutoff_ratio)
    run.params = {"sigma": sigma, "pmax": pmax, "cutoffs": cuts}
    run.profile = {"f": f_prof.to_json(), "g": g_prof.to_json()}
    run.seeds = [args.seed]
    omega = sample_omega(args.seed, pmax)
    vals = d_sigma_at_cutoffs(realize(omega, f_prof), realize(omega, g_prof), sigma, cuts)
    sq = [v.squared_value for v in vals]
    rep = tail_diagnostic(cuts, sq) if len(cuts) >= 4 else None
    diffs = [""] + ([repr(d) for d in rep.diffs] if rep else [""] * (len(cuts) - 1))
    label = f"{f_prof.label()}|{g_prof.label()}"
    rows = ((c, v, d, args.seed, label, sigma) for c, v, d in zip(cuts, sq, diffs))
    run.csv("distance_trend", "distance_trend", ["p_bound", "squared_value", "diff", "seed", "profile", "sigma"], rows)
    final = vals[-1]
    run.json(
        "distance",
        "distance_value",
        {
            "sigma": final.sigma,
            "p_bound": final.p_bound,
            "squared_value": final.squared_value,
            "diverged": final.diverged,
            "seed": args.seed,
            "verdict": rep.verdict if rep else None,
        },
    )


def cmd_scan(args, run: Run):
    profile = _profile_from_args(args)
    sigma = _check_sigma(args.sigma)
    cutoff = _check_limit("--cutoff", args.cutoff)
    if args.tmax < 2:
        raise DomainError("--tmax must be >= 2")
    if args.points < 1:
        raise DomainError("--points must be >= 1")
    seeds = _seeds(args)
    run.params = {"sigma": sigma, "tmax": args.tmax, "points": args.points, "cutoff": cutoff, "mode": args.mode}
    run.profile, run.seeds = profile.to_json(), seeds
    rows, wrows = [], []
    for seed in seeds:
        signs = realize(sample_omega(seed, cutoff), profile)
        d = vertical_scan(signs, profile, sigma, args.tmax, args.points, cutoff, args.mode)
        for t, v, e in zip(d.t, d.values, d.envelope):
            rows.append((float(t), float(v), float(e), float(v / e), seed, profile.label(), sigma))
        for lo, hi, r in d.windows:
            wrows.append((lo, hi, r, seed, profile.label(), sigma))
    run.csv("scan", "vertical_scan", ["t", "value", "envelope", "ratio", "seed", "profile", "sigma"], rows)
    run.csv("scan_windows", "scan_windows", ["t_lo", "t_hi", "max_ratio", "seed", "profile", "sigma"], wrows)


def cmd_critical(args, run: Run):
    cuts = _parse_cutoffs(args.cutoffs)
    if not 0.0 < args.alpha < 0.5:
        raise DomainError(f"--alpha must lie in (0, 1/2), got {args.alpha}")
    profile = _profile_from_args(args) if (args.profile or args.preset) else None
    seeds = _seeds(args)
    run.params = {"alpha": args.alpha, "t": args.t, "cutoffs": cuts}
    run.seeds = seeds
    rep = critical_point_convergence(args.alpha, args.t, seeds, cuts, profile, args.workers)
    run.profile = rep.profile.to_json()
    run.json("critical", "critical_report", rep.to_json())


def cmd_identity(args, run: Run):
    profile = _profile_from_args(args)
    s = _parse_complex(args.s)
    pmax = _check_limit("--pmax", args.pmax)
    seeds = _seeds(args)
    run.params = {"s": [s.real, s.imag], "pmax": pmax}
    run.profile, run.seeds = profile.to_json(), seeds
    reports = [identity_suite(sample_omega(seed, pmax), profile, s, pmax) for seed in seeds]
    run.json(
        "identity",
        "identity_report",
        {
            "passed": all(r.passed for r in reports),
            "max_relative_error": max(r.relative_error for r in reports),
            "max_factor_gap": max(r.max_factor_gap for r in reports),
            "runs": [r.to_json() for r in reports],
        },
    )


def cmd_polo(args, run: Run):
    grid = _parse_grid(args.a_grid)
    run.params = {"a_grid": grid, "coefficient": args.coefficient}
    rep = polo_check(args.coefficient, grid)
    run.json("polo", "polo_report", rep.to_json())


# parser ----------------------------------------------------------------------


def _add_profile(p):
    p.add_argument("--profile", help="profile JSON file, inline JSON, or preset")
    p.add_argument("--preset", help="unbiased | mobius | alpha(a) | alpha-delta(a,rule) | alpha-k(a,k) | strong(c,b)")


def _add_seeds(p):
    p.add_argument("--seed", type=int, default=0, help="first seed")
    p.add_argument("--seeds", type=int, default=None, help="number of seeds (S .. S+K-1)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bmf", description="Biased random multiplicative function experiments.")
    parser.add_argument("--version", action="version", version=__version__)
    common = _Parser(add_help=False)
    common.add_argument("--out", help="output directory (default $BMF_OUT_DIR or .)")
    common.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("mertens", parents=[common], help="checkpointed Mertens function")
    p.add_argument("--limit", type=int, required=True)
    p.add_argument("--grid-ratio", type=float, default=DEFAULT_GRID_RATIO)
    p.set_defaults(func=cmd_mertens)

    p = sub.add_parser("msum", parents=[common], help="partial sums of sampled f")
    _add_profile(p)
    _add_seeds(p)
    p.add_argument("--limit", type=int, required=True)
    p.add_argument("--grid-ratio", type=float, default=DEFAULT_GRID_RATIO)
    p.set_defaults(func=cmd_msum)

    p = sub.add_parser("exponent", parents=[common], help="ensemble growth exponents")
    _add_profile(p)
    _add_seeds(p)
    p.add_argument("--limit", type=int, required=True)
    p.add_argument("--window", type=float, default=0.5)
    p.add_argument("--grid-ratio", type=float, default=DEFAULT_GRID_RATIO)
    p.set_defaults(func=cmd_exponent)

    p = sub.add_parser("distance", parents=[common], help="coupled distance and its trend")
    p.add_argument("--f", required=True, help="profile of f")
    p.add_argument("--g", required=True, help="profile of g")
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--pmax", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cutoff-start", type=int, default=1000)
    p.add_argument("--cutoff-ratio", type=float, default=2.0)
    p.set_defaults(func=cmd_distance)

    p = sub.add_parser("scan", parents=[common], help="vertical-line growth scan")
    _add_profile(p)
    _add_seeds(p)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--tmax", type=float, required=True)
    p.add_argument("--points", type=int, default=200)
    p.add_argument("--cutoff", type=int, required=True)
    p.add_argument("--mode", choices=["prime", "theta"], default="prime")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("critical", parents=[common], help="series convergence at 1 - alpha + it")
    _add_profile(p)
    _add_seeds(p)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--t", type=float, default=0.0)
    p.add_argument("--cutoffs", required=True, help="lo:hi[:ratio]")
    p.set_defaults(func=cmd_critical)

    p = sub.add_parser("identity", parents=[common], help="product identity check")
    _add_profile(p)
    _add_seeds(p)
    p.add_argument("--s", required=True, help="'sigma,t'")
    p.add_argument("--pmax", type=int, required=True)
    p.set_defaults(func=cmd_identity)

    p = sub.add_parser("polo", parents=[common], help="shift check near s = 1")
    p.add_argument("--a-grid", default="0.2,0.1,0.05,0.02,0.01")
    p.add_argument("--coefficient", type=float, default=1.0, help="constant coefficient c in [0, 1]")
    p.set_defaults(func=cmd_polo)
    return parser


def _fail(exc: BMFError) -> int:
    err = {"error": type(exc).__name__, "exit_code": exc.exit_code, "message": str(exc).replace("\n", " ")}
    print(json.dumps(err), file=sys.stderr)
    return exc.exit_code


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        if args.workers < 1:
            raise UsageError("--workers must be >= 1")
        run = Run(args.command, argv, _out_dir(args))
        args.func(args, run)
        run.finish()
    except BMFError as exc:
        return _fail(exc)
    except MemoryError as exc:
        return _fail(CapacityError(f"out of memory: {exc}"))
    return 0


if __name__ == "__main__":
    sys.exit(main())
