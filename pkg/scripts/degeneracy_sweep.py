"""Lower equivalence constants as two anchors merge along the boundary.

    python scripts/degeneracy_sweep.py configs/unit_disk.json --angles 0.4 0.2 0.1 0.05 0

The second anchor is moved toward the first; at angle 0 they coincide and
the directional form loses rank.
"""

import argparse
import csv
import warnings
from pathlib import Path

import numpy as np

from shiftnorm import norms
from shiftnorm.config import RunConfig
from shiftnorm.fields import FMT, Grid
from shiftnorm.suites import DEGENERACY_ANGLES, degenerate_anchor_sweep


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config")
    ap.add_argument("--angles", type=float, nargs="+", default=list(DEGENERACY_ANGLES))
    ap.add_argument("--h", type=float, help="grid spacing (default: first of the schedule)")
    ap.add_argument("--out", default="degeneracy-sweep.csv")
    args = ap.parse_args(argv)
    cfg = RunConfig.load(args.config)
    grid = Grid.build(cfg.domain, args.h or cfg.schedule[0])

    header = ["angle", "delta", "vector_c0", "vector_c1", "scalar_c0", "scalar_c1"]
    rows = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for a, q in degenerate_anchor_sweep(cfg.domain, cfg.anchors.points, args.angles):
            v = norms.equivalence_constants_vector(grid, q, seed=cfg.seed)
            s = norms.equivalence_constants_scalar(grid, q, seed=cfg.seed)
            rows.append([a, float(np.linalg.det(q)), v.c0, v.c1, s.c0, s.c1])
    with Path(args.out).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows([[FMT % x for x in r] for r in rows])
    print("  ".join(f"{h:>11}" for h in header))
    for r in rows:
        print("  ".join(f"{x:>11.4g}" for x in r))
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
