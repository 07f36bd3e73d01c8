"""Report assembly and deterministic serialization.

Reports carry verdicts and evidence for every check in the canonical list,
plus the numeric tables mirrored into CSV files.  Serialization is fully
deterministic for a fixed scenario and seed: keys are sorted, floats use
shortest round-trip repr, and nothing time- or host-dependent is written
(wall time goes to stderr, not into the report).
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np
import scipy

from . import __version__

PASS = "pass"
FAIL = "fail"
NOT_APPLICABLE = "not-applicable"

# every report lists these names in this order; payload kinds that do not
# exercise a check record it as not-applicable
CHECK_NAMES = (
    "validate",
    "convexity",
    "mpc",
    "expanding",
    "subharmonicity",
    "gpsi_monotonicity",
    "det_sweep",
    "sdot_residual",
    "helmholtz_orthogonality",
    "helmholtz_pythagoras",
    "helmholtz_idempotence",
    "solenoidal_divergence",
    "polar_monotone",
)


class ReportError(Exception):
    pass


@dataclass(frozen=True)
class CheckResult:
    name: str
    verdict: str
    evidence: dict

    def __post_init__(self):
        if self.verdict not in (PASS, FAIL, NOT_APPLICABLE):
            raise ReportError(f"bad verdict {self.verdict!r}")


def jsonable(value):
    """Recursively convert numpy scalars/arrays and tuples to plain JSON."""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        return float(value)
    if value is None or isinstance(value, str):
        return value
    raise ReportError(f"cannot serialize {type(value).__name__}")


@dataclass(frozen=True)
class Table:
    columns: tuple
    rows: tuple  # tuples of numbers; None marks an empty CSV cell

    def as_json(self):
        return {"columns": list(self.columns), "rows": jsonable(self.rows)}

    def as_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, quoting=csv.QUOTE_MINIMAL, lineterminator="\r\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow(["" if v is None else repr(float(v))
                             if isinstance(v, (float, np.floating))
                             else v for v in row])
        return buf.getvalue()


def build_report(command: str, scenario_doc: dict, checks, tables: dict,
                 seed: int, threads: int) -> dict:
    names = [c.name for c in checks]
    missing = [n for n in CHECK_NAMES if n not in names]
    if missing or len(names) != len(CHECK_NAMES):
        raise ReportError(f"check list mismatch; missing {missing}")
    return {
        "schema_version": 1,
        "command": command,
        "scenario": jsonable(scenario_doc),
        "checks": [
            {"name": c.name, "verdict": c.verdict,
             "evidence": jsonable(c.evidence)}
            for c in checks
        ],
        "tables": {name: t.as_json() for name, t in tables.items()},
        "provenance": {
            "package_version": __version__,
            "numpy_version": np.__version__,
            "scipy_version": scipy.__version__,
            "seed": seed,
            "threads": threads,
        },
    }


def serialize_report(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2,
                      ensure_ascii=False) + "\n"


def failed_checks(checks) -> list:
    return [c.name for c in checks if c.verdict == FAIL]
