"""Report rows, verdict rules and file output.

Every row carries the rule that produced its verdict, written so that the
verdict can be recomputed from the CSV row alone:

``abs<=x``     ``|estimate - predictor| <= x``
``rel<=x``     ``|estimate / predictor - 1| <= x``
``z<=x``       ``|estimate - predictor| <= x * stderr``
``ratio>=x``   ``estimate / predictor >= x``
``ratio<=x``   ``estimate / predictor <= x``
``le``         ``estimate <= predictor``
``gt``         ``estimate > predictor``
``interior``   ``0 < estimate < predictor`` (argmin position among ``predictor + 1`` grid values)
``info``       no verdict
"""
from __future__ import annotations

import csv
import io
import json
import math
import platform
from dataclasses import dataclass, field
from pathlib import Path

COLUMNS = ("quantity", "n", "L", "t", "eps", "estimate", "stderr", "predictor", "ratio", "verdict", "rule")
VERDICTS = ("pass", "fail", "info")


class RuleError(ValueError):
    pass


def _ratio(estimate: float, predictor: float) -> float:
    if predictor == 0 or math.isnan(predictor) or math.isnan(estimate):
        return math.nan
    return estimate / predictor


def judge(rule: str, estimate: float, stderr: float, predictor: float) -> str:
    """Verdict of ``rule`` on one row; NaN inputs fail any non-info rule."""
    if rule == "info":
        return "info"
    if rule in ("le", "gt", "interior"):
        ok = {"le": estimate <= predictor, "gt": estimate > predictor,
              "interior": 0 < estimate < predictor}[rule]
        return "pass" if ok else "fail"
    for op in ("<=", ">="):
        if op in rule:
            name, _, tol = rule.partition(op)
            break
    else:
        raise RuleError(f"unknown rule {rule!r}")
    try:
        tol = float(tol)
    except ValueError as exc:
        raise RuleError(f"bad tolerance in rule {rule!r}") from exc
    if name == "abs" and op == "<=":
        val = abs(estimate - predictor)
    elif name == "rel" and op == "<=":
        val = abs(_ratio(estimate, predictor) - 1.0)
    elif name == "z" and op == "<=":
        val = abs(estimate - predictor) / stderr if stderr > 0 else (0.0 if estimate == predictor else math.inf)
    elif name == "ratio":
        val = _ratio(estimate, predictor)
    else:
        raise RuleError(f"unknown rule {rule!r}")
    if math.isnan(val):
        return "fail"
    ok = val <= tol if op == "<=" else val >= tol
    return "pass" if ok else "fail"


@dataclass
class Row:
    quantity: str
    estimate: float
    predictor: float = math.nan
    stderr: float = math.nan
    rule: str = "info"
    n: int | None = None
    L: int | None = None
    t: float = math.nan
    eps: float = math.nan
    verdict: str = field(init=False)
    ratio: float = field(init=False)

    def __post_init__(self):
        self.estimate = float(self.estimate)
        self.predictor = float(self.predictor)
        self.stderr = float(self.stderr)
        self.ratio = _ratio(self.estimate, self.predictor)
        self.verdict = judge(self.rule, self.estimate, self.stderr, self.predictor)

    def cells(self) -> list[str]:
        return [self.quantity, _fmt_int(self.n), _fmt_int(self.L), _fmt(self.t), _fmt(self.eps),
                _fmt(self.estimate), _fmt(self.stderr), _fmt(self.predictor), _fmt(self.ratio),
                self.verdict, self.rule]

    def as_dict(self) -> dict:
        return dict(zip(COLUMNS, self.cells()))


def _fmt(x: float) -> str:
    return "" if x is None or (isinstance(x, float) and math.isnan(x)) else repr(float(x))


def _fmt_int(x) -> str:
    return "" if x is None else str(int(x))


@dataclass
class Report:
    kind: str
    config_text: str
    rows: list[Row] = field(default_factory=list)
    summaries: list[dict | None] = field(default_factory=list)
    fitted: dict[str, float] = field(default_factory=dict)
    seeds: dict[str, int] = field(default_factory=dict)
    runtime: float = 0.0

    def add(self, row: Row, summary=None) -> Row:
        self.rows.append(row)
        self.summaries.append(summary.as_dict() if summary is not None else None)
        return row

    @property
    def verdicts(self) -> list[str]:
        return [r.verdict for r in self.rows]

    @property
    def passed(self) -> bool:
        return "fail" not in self.verdicts

    def failures(self) -> list[Row]:
        return [r for r in self.rows if r.verdict == "fail"]


# ---------------------------------------------------------------------------
# output


def to_csv(report: Report) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in report.rows:
        w.writerow(r.cells())
    return buf.getvalue()


def _versions() -> dict:
    import numba
    import numpy
    import scipy

    from .. import __version__

    return {"slowbond": __version__, "python": platform.python_version(), "numpy": numpy.__version__,
            "scipy": scipy.__version__, "numba": numba.__version__}


def _clean(x):
    if isinstance(x, float):
        return None if math.isnan(x) or math.isinf(x) else x
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    return x


def to_json(report: Report) -> str:
    """Full manifest; wall-clock runtime is left out so reruns are byte-identical."""
    from .config import parse

    doc = {
        "kind": report.kind,
        "config": parse(report.config_text),
        "config_text": report.config_text,
        "seeds": report.seeds,
        "versions": _versions(),
        "fitted": report.fitted,
        "rows": [
            {**{k: getattr(r, k) for k in COLUMNS}, "summary": s}
            for r, s in zip(report.rows, report.summaries)
        ],
        "passed": report.passed,
    }
    return json.dumps(_clean(doc), indent=2, sort_keys=True) + "\n"


def emit_report(report: Report, fmt: str, out_dir, stem: str = "report") -> list[Path]:
    """Write ``<stem>.csv`` or ``<stem>.json`` into ``out_dir``; returns the written paths."""
    if fmt not in ("csv", "json"):
        raise ValueError("format must be csv or json")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{stem}.{fmt}"
    path.write_text(to_csv(report) if fmt == "csv" else to_json(report))
    return [path]


def read_csv(text: str) -> list[dict]:
    return list(csv.DictReader(io.StringIO(text)))


def _num(s: str) -> float:
    return float(s) if s else math.nan


def recompute_verdicts(text: str) -> list[tuple[str, str]]:
    """``(written, recomputed)`` verdict pairs for every row of a report CSV."""
    out = []
    for row in read_csv(text):
        v = judge(row["rule"], _num(row["estimate"]), _num(row["stderr"]), _num(row["predictor"]))
        out.append((row["verdict"], v))
    return out
