"""Run configuration: one JSON file, validated into dataclasses.

Schema (all keys optional except ``domain``)::

    {
      "domain": {"kind": "box", "lo": [0, 0], "hi": [1, 1]},
      "schedule": [0.0625, 0.03125, 0.015625],
      "anchors": {"points": [[1, 0], [0, 1]]}        # or {"auto": true, "candidates": 64}
      "suites": ["all"],
      "coefficients": [{"kind": "identity"}, {"kind": "diagonal", "values": [1, 4]}],
      "output_dir": "out",
      "seed": 0,
      "tolerances": {"contraction_slope": 10.0}
    }
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .elliptic import CoefficientField
from .fields import Grid
from .geometry import AnchorSet, ConvexDomain, GeometryError, select_anchors

SUITES = ("geometry", "semigroup", "equivalence", "degeneracy", "elliptic")
OUTPUT_ENV = "SHIFTNORM_OUTPUT_DIR"
DEFAULT_OUTPUT = "shiftnorm-out"

DEFAULT_TOLERANCES = {
    "identity_rtol": 1e-10,
    "contraction_slope": 10.0,
    "continuity_rtol": 1e-9,
    "refinement_factor": 1.5,
    "accretivity": 1e-10,
    "resolvent_rtol": 1e-8,
    "upper_constant_slack": 0.01,
    "refinement_variation": 0.10,
    "degenerate_c0": 1e-3,
    "decomposition_1d": 0.05,
    "coercivity_fraction": 0.05,
    "sesquilinear_ratio": 1.05,
    "poincare_rtol": 0.02,
}


class ConfigError(ValueError):
    pass


def default_coefficients(dim: int) -> list[dict]:
    specs = [{"kind": "identity"}, {"kind": "identity", "scale": 2.0}]
    if dim >= 2:
        specs += [{"kind": "diagonal", "values": [1.0, 4.0] + [1.0] * (dim - 2)},
                  {"kind": "seeded-smooth", "seed": 0}]
    return specs


def suite_seed(global_seed: int, suite: str) -> int:
    """Per-suite seed: ``SeedSequence([global_seed, suite_index])``."""
    ss = np.random.SeedSequence([global_seed, SUITES.index(suite)])
    return int(ss.generate_state(1)[0])


@dataclass
class RunConfig:
    domain: ConvexDomain
    schedule: list
    anchors: AnchorSet
    anchors_auto: bool
    suites: list
    coefficients: list
    output_dir: Path
    seed: int = 0
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    raw: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: dict, output_override=None) -> RunConfig:
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object")
        unknown = set(data) - {"domain", "schedule", "anchors", "suites", "coefficients",
                               "output_dir", "seed", "tolerances"}
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        if "domain" not in data:
            raise ConfigError("configuration needs a 'domain'")
        try:
            domain = ConvexDomain.from_dict(data["domain"])
        except (GeometryError, KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad domain: {exc}") from exc

        seed = data.get("seed", 0)
        if not isinstance(seed, int) or seed < 0:
            raise ConfigError("seed must be a nonnegative integer")

        schedule = data.get("schedule", [1 / 16, 1 / 32, 1 / 64])
        if (not isinstance(schedule, list) or not schedule
                or not all(isinstance(h, (int, float)) and h > 0 for h in schedule)):
            raise ConfigError("schedule must be a nonempty list of positive spacings")
        schedule = [float(h) for h in schedule]
        if any(b >= a for a, b in zip(schedule, schedule[1:])):
            raise ConfigError("schedule must be strictly decreasing")
        for h in schedule:
            try:
                Grid.build(domain, h)
            except GeometryError as exc:
                raise ConfigError(f"spacing {h} is not valid for the domain: {exc}") from exc

        suites = data.get("suites", ["all"])
        if isinstance(suites, str):
            suites = [suites]
        if "all" in suites:
            suites = list(SUITES)
        bad = [s for s in suites if s not in SUITES]
        if bad:
            raise ConfigError(f"unknown suites {bad}; choose from {SUITES} or 'all'")
        suites = [s for s in SUITES if s in suites]

        aspec = data.get("anchors", {"auto": True})
        auto = bool(aspec.get("auto", False)) if isinstance(aspec, dict) else False
        try:
            if auto:
                anchors = select_anchors(domain, aspec.get("candidates", 64), seed)
            else:
                pts = aspec["points"] if isinstance(aspec, dict) else aspec
                anchors = AnchorSet.from_points(pts, domain, check_delta="degeneracy" not in suites)
        except (GeometryError, KeyError, TypeError) as exc:
            raise ConfigError(f"bad anchors: {exc}") from exc

        cspecs = data.get("coefficients", default_coefficients(domain.dim))
        try:
            coefficients = [CoefficientField.from_dict(c, domain.dim) for c in cspecs]
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad coefficients: {exc}") from exc
        if any(c.dim != domain.dim for c in coefficients):
            raise ConfigError("coefficient dimension does not match the domain")

        tol = dict(DEFAULT_TOLERANCES)
        over = data.get("tolerances", {})
        if not isinstance(over, dict) or set(over) - set(tol):
            raise ConfigError(f"unknown tolerance keys: {sorted(set(over) - set(tol))}")
        tol.update({k: float(v) for k, v in over.items()})

        out = (output_override or data.get("output_dir") or os.environ.get(OUTPUT_ENV)
               or DEFAULT_OUTPUT)
        return cls(domain=domain, schedule=schedule, anchors=anchors, anchors_auto=auto,
                   suites=suites, coefficients=coefficients, output_dir=Path(out), seed=seed,
                   tolerances=tol, raw=data)

    @classmethod
    def load(cls, path, output_override=None) -> RunConfig:
        try:
            data = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
        return cls.from_dict(data, output_override)

    def with_suites(self, suites) -> RunConfig:
        bad = [s for s in suites if s not in SUITES and s != "all"]
        if bad:
            raise ConfigError(f"unknown suite {bad[0]!r}")
        chosen = list(SUITES) if "all" in suites else [s for s in SUITES if s in suites]
        return RunConfig(**{**self.__dict__, "suites": chosen})

    def seeds(self) -> dict:
        return {s: suite_seed(self.seed, s) for s in self.suites}

    def describe(self) -> str:
        a = self.anchors
        lines = [
            f"domain: {json.dumps(self.domain.to_dict())}",
            f"dimension: {self.domain.dim}",
            f"anchors ({'auto-selected' if self.anchors_auto else 'explicit'}):",
            *[f"  P{i + 1} = {np.array2string(p, precision=6)}" for i, p in enumerate(a.points)],
            f"anchor determinant: {a.delta:.6g}  (|delta| {abs(a.delta):.6g}, "
            f"det_tolerance {a.tolerance:.3g}, {'ok' if a.well_conditioned else 'ILL-CONDITIONED'})",
            "grids:",
            *[f"  h = {h:.6g}: shape {Grid.build(self.domain, h).shape}, "
              f"{Grid.build(self.domain, h).size} interior nodes" for h in self.schedule],
            f"suites (in order): {', '.join(self.suites)}",
            f"global seed: {self.seed}",
            *[f"  {s} seed = SeedSequence([{self.seed}, {SUITES.index(s)}]) -> {v}"
              for s, v in self.seeds().items()],
            "coefficients: " + ", ".join(json.dumps(c.to_dict()) for c in self.coefficients),
            f"output directory: {self.output_dir}",
            "tolerances:",
            *[f"  {k} = {v:g}" for k, v in sorted(self.tolerances.items())],
        ]
        return "\n".join(lines) + "\n"
