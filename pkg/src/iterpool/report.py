"""Result tables: one row per method, one column per resampling factor."""

from __future__ import annotations

import numpy as np

from .dataset import FACTORS

CSV_HEADER = "method,f0.6,f0.8,f1.0,f1.2,f1.4,avg"

# full-scale reference accuracies (percent) for side-by-side display
FULL_SCALE_REFERENCE = {
    "MPN": (78.3, 48.0, 93.7, 52.3, 91.1),
    "IPN": (98.6, 97.1, 98.4, 94.3, 94.8),
    "BN": (98.4, 99.0, 98.0, 98.8, 99.5),
}


def _sig4(v: float) -> str:
    return f"{float(v):.4g}"


def reference_rows() -> list[tuple[str, tuple[float, ...], float]]:
    out = []
    for method, accs in FULL_SCALE_REFERENCE.items():
        out.append((f"{method} (reference)", accs, float(np.mean(accs))))
    return out


def make_rows(results: dict[str, np.ndarray]) -> list[tuple[str, tuple[float, ...], float]]:
    """results maps method name -> per-class accuracies in [0, 1]."""
    rows = []
    expected = len(FACTORS)
    for method, per_class in results.items():
        per_class = np.asarray(per_class, dtype=np.float64)
        if per_class.shape != (expected,):
            raise ValueError(f"{method}: expected {expected} per-class accuracies")
        accs = tuple(100.0 * per_class)
        rows.append((method, accs, float(np.mean(accs))))
    return rows


def render_table(rows) -> str:
    header = ["Method"] + [f"{f:g}" for f in FACTORS] + ["Avg"]
    body = [[name] + [_sig4(a) for a in accs] + [_sig4(avg)] for name, accs, avg in rows]
    widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
    lines = []
    for r in [header] + body:
        lines.append("  ".join(c.rjust(w) for c, w in zip(r, widths)))
    lines.insert(1, "-" * len(lines[0]))
    return "\n".join(lines)


def render_csv(rows) -> str:
    lines = [CSV_HEADER]
    for name, accs, avg in rows:
        lines.append(",".join([name] + [_sig4(a) for a in accs] + [_sig4(avg)]))
    return "\n".join(lines) + "\n"


def render_trace_csv(trace) -> str:
    lines = ["iteration,holdout_acc"]
    for it, acc in trace:
        lines.append(f"{it},{acc:.6f}")
    return "\n".join(lines) + "\n"
