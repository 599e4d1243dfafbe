"""Command line driver.

    shiftnorm run <config> [--out DIR] [--suite NAME] [--plots] [-v]
    shiftnorm describe <config>

Exit codes: 0 all asserted checks pass, 1 a suite failed, 2 the
configuration could not be parsed (nothing is written), 3 output I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import SUITES, ConfigError, RunConfig
from .fields import FMT
from .suites import SUITE_FUNCTIONS, SuiteResult
from .svg import line_chart

EXIT_OK, EXIT_FAIL, EXIT_PARSE, EXIT_IO = 0, 1, 2, 3
SEED_RULE = "suite seed = SeedSequence([global_seed, suite_index]).generate_state(1)[0]"

log = logging.getLogger("shiftnorm")


def jsonable(x):
    """Plain JSON types with floats rounded to 12 significant digits."""
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [jsonable(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (complex, np.complexfloating)):
        return [jsonable(x.real), jsonable(x.imag)]
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return float(FMT % x) if math.isfinite(x) else str(x)
    return x


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return FMT % v
    return str(v)


def write_suite(result: SuiteResult, out: Path, plots: bool) -> list[Path]:
    written = []
    p = out / f"{result.name}.json"
    p.write_text(json.dumps(jsonable(result.to_dict()), indent=2, sort_keys=True) + "\n")
    written.append(p)
    for name, (header, rows) in sorted(result.tables.items()):
        p = out / f"{result.name}_{name}.csv"
        with p.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows([[_cell(v) for v in row] for row in rows])
        written.append(p)
    if plots:
        for name, (series, title, xl, yl) in sorted(result.plots.items()):
            p = out / f"{result.name}_{name}.svg"
            p.write_text(line_chart(series, title, xl, yl))
            written.append(p)
    return written


def run(cfg: RunConfig, plots: bool = False) -> int:
    try:
        cfg.output_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        log.error("cannot create output directory %s: %s", cfg.output_dir, exc)
        return EXIT_IO
    summary = {"suites": {}, "seed": cfg.seed, "seed_rule": SEED_RULE,
               "config": cfg.raw, "anchors": cfg.anchors.to_dict()}
    ok = True
    for name in cfg.suites:
        log.info("running suite %s", name)
        result = SUITE_FUNCTIONS[name](cfg)
        ok &= result.passed
        summary["suites"][name] = {
            "passed": result.passed, "seed": result.seed,
            "checks": {c.name: {"passed": c.passed, "asserted": c.asserted} for c in result.checks},
        }
        try:
            write_suite(result, cfg.output_dir, plots)
        except OSError as exc:
            log.error("cannot write %s outputs: %s", name, exc)
            return EXIT_IO
        print(f"{name}: {'pass' if result.passed else 'FAIL'}")
        for c in result.checks:
            mark = "pass" if c.passed else ("FAIL" if c.asserted else "note")
            print(f"  [{mark}] {c.name}")
    summary["passed"] = ok
    try:
        (cfg.output_dir / "summary.json").write_text(
            json.dumps(jsonable(summary), indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        log.error("cannot write summary: %s", exc)
        return EXIT_IO
    return EXIT_OK if ok else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="shiftnorm", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run verification suites")
    r.add_argument("config")
    r.add_argument("--out", help="output directory (overrides config and environment)")
    r.add_argument("--suite", action="append", choices=list(SUITES) + ["all"],
                   help="run only this suite; may be repeated")
    r.add_argument("--plots", action="store_true", help="also write SVG plots")
    r.add_argument("-v", "--verbose", action="count", default=0)
    d = sub.add_parser("describe", help="print the resolved run plan")
    d.add_argument("config")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(getattr(args, "verbose", 0), 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = RunConfig.load(args.config, getattr(args, "out", None))
        if getattr(args, "suite", None):
            cfg = cfg.with_suites(args.suite)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    if args.command == "describe":
        sys.stdout.write(cfg.describe())
        return EXIT_OK
    return run(cfg, plots=args.plots)


if __name__ == "__main__":
    sys.exit(main())
