"""Optional PNG figures of a report (requires the ``figures`` extra)."""
from __future__ import annotations

import math
from collections import defaultdict
from pathlib import Path


def _pyplot():
    try:
        import matplotlib
    except ImportError as exc:
        raise ImportError("figures need matplotlib; install the 'figures' extra") from exc
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _axis(rows):
    """Grid variable that changes most along a quantity's rows."""
    for name in ("n", "L", "t", "eps"):
        vals = {getattr(r, name) for r in rows}
        vals = {v for v in vals if v is not None and not (isinstance(v, float) and math.isnan(v))}
        if len(vals) > 1:
            return name
    return None


def render(report, out_dir, stem: str = "report") -> list[Path]:
    """One PNG per quantity with more than one grid point: estimate (with 2 SE bars) and predictor."""
    plt = _pyplot()
    groups = defaultdict(list)
    for r in report.rows:
        groups[r.quantity].append(r)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for q, rows in groups.items():
        axis = _axis(rows)
        if axis is None:
            continue
        rows = sorted(rows, key=lambda r: getattr(r, axis))
        x = [getattr(r, axis) for r in rows]
        y = [r.estimate for r in rows]
        err = [2 * r.stderr if not math.isnan(r.stderr) else 0.0 for r in rows]
        fig, ax = plt.subplots(figsize=(4.5, 3.2))
        ax.errorbar(x, y, yerr=err, marker="o", capsize=3, label="estimate")
        pred = [r.predictor for r in rows]
        if not all(math.isnan(v) for v in pred):
            ax.plot(x, pred, "k--", label="predictor")
        if axis in ("n", "L"):
            ax.set_xscale("log", base=2)
        ax.set_xlabel(axis)
        ax.set_title(q, fontsize=9)
        ax.legend(fontsize=8)
        fig.tight_layout()
        safe = "".join(c if c.isalnum() or c in "-_" else "_" for c in q)
        path = out / f"{stem}_{safe}.png"
        fig.savefig(path, dpi=100)
        plt.close(fig)
        paths.append(path)
    return paths
