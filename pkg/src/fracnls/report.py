"""Tabular experiment reports with CSV / JSON manifest output."""

import csv
import hashlib
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

__all__ = ["ExperimentReport", "Row", "Table", "content_hash", "wilson_interval", "loglog_slope", "linear_fit", "fmt"]

ROW_FIELDS = ("observable", "estimate", "se", "target", "tolerance", "passed", "probe")


def fmt(x):
    """Locale-free float formatting with 17 significant digits."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    if x is None:
        return ""
    return str(x)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    return x


def content_hash(config):
    """Git-style blob sha1 of the canonical JSON encoding of ``config``."""
    data = json.dumps(_jsonable(config), sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


@dataclass
class Table:
    """A named-column table plus scalar summary values (slopes, fit quality, ...)."""

    header: tuple
    rows: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def column(self, name):
        i = list(self.header).index(name)
        return np.array([r[i] for r in self.rows])

    def __getitem__(self, key):
        return self.meta[key]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.header)
            for row in self.rows:
                w.writerow([fmt(v) for v in row])


@dataclass
class Row:
    observable: str
    estimate: float
    se: float = None
    target: float = None
    tolerance: float = None
    passed: bool = True
    probe: str = ""

    def as_list(self):
        return [fmt(getattr(self, k)) for k in ROW_FIELDS]


@dataclass
class ExperimentReport:
    name: str
    config: dict
    seed: int = 0
    rows: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)
    runtime: float = 0.0
    notes: dict = field(default_factory=dict)

    def add(self, observable, estimate, se=None, target=None, tolerance=None, passed=True, probe=""):
        self.rows.append(Row(observable, estimate, se, target, tolerance, bool(passed), probe))
        return self.rows[-1]

    @property
    def passed(self):
        return all(r.passed for r in self.rows)

    def row(self, observable):
        for r in self.rows:
            if r.observable == observable:
                return r
        raise KeyError(observable)

    def summary(self):
        lines = [f"{self.name}: {'PASS' if self.passed else 'FAIL'} (seed={self.seed}, {self.runtime:.2f}s)"]
        for r in self.rows:
            se = f" +/- {r.se:.3g}" if isinstance(r.se, float) else ""
            tgt = f" target {r.target:.4g}" if isinstance(r.target, float) else ""
            lines.append(f"  [{'ok' if r.passed else '!!'}] {r.observable} = {float(r.estimate):.6g}{se}{tgt}")
        return "\n".join(lines)

    def manifest(self):
        return {
            "name": self.name,
            "config": _jsonable(self.config),
            "seed": self.seed,
            "content_hash": content_hash({"name": self.name, "config": self.config, "seed": self.seed}),
            "passed": self.passed,
            "n_rows": len(self.rows),
            "failed": [r.observable for r in self.rows if not r.passed],
            "tables": sorted(self.tables),
            "notes": _jsonable(self.notes),
        }

    def write(self, outdir):
        """Write report.csv, one CSV per extra table, and manifest.json.

        Runtime is deliberately left out of all files so reruns are byte-identical.
        """
        os.makedirs(outdir, exist_ok=True)
        with open(os.path.join(outdir, "report.csv"), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(ROW_FIELDS)
            for r in self.rows:
                w.writerow(r.as_list())
        for tname, table in sorted(self.tables.items()):
            table.to_csv(os.path.join(outdir, f"{tname}.csv"))
        with open(os.path.join(outdir, "manifest.json"), "w") as fh:
            json.dump(self.manifest(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def wilson_interval(k, n, z=1.96):
    """Wilson score interval for a binomial proportion k/n."""
    if n <= 0:
        return 0.0, 1.0
    p = k / n
    den = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    return max(0.0, centre - half), min(1.0, centre + half)


def linear_fit(x, y):
    """Least-squares line y = a + b x; returns (slope, intercept, r2)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    b, a = np.polyfit(x, y, 1)
    resid = y - (a + b * x)
    ss = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss if ss > 0 else 1.0
    return float(b), float(a), float(r2)


def loglog_slope(x, y):
    return linear_fit(np.log(x), np.log(y))[0]
