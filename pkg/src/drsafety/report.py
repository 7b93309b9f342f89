"""Report emission: human table, CSV, and machine-readable JSON.

Table and CSV cells are rounded half-even to 4 decimals; the JSON
report keeps full precision plus the multiplier diagnostics.  Identical
inputs produce byte-identical output.
"""
from __future__ import annotations

import hashlib
import json
from typing import Sequence

from .iteration import SafetyReport, largest_certified_delta

TOOL_NAME = "drsafety"


def _cell(value: float) -> str:
    return f"{value:.4f}"


def input_digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def render_csv(reports: Sequence[SafetyReport]) -> str:
    """One row per taboo state, one column per radius, verdict row last."""
    states = sorted(reports[0].J)
    lines = ["state," + ",".join(_cell(r.delta) for r in reports)]
    for x in states:
        lines.append(f"{x}," + ",".join(_cell(r.J[x]) for r in reports))
    lines.append(
        "verdict," + ",".join("safe" if r.mdp_verdict else "unsafe" for r in reports)
    )
    return "\n".join(lines) + "\n"


def render_table(reports: Sequence[SafetyReport]) -> str:
    states = sorted(reports[0].J)
    header = ["state"] + [_cell(r.delta) for r in reports]
    rows = [[str(x)] + [_cell(r.J[x]) for r in reports] for x in states]
    rows.append(["verdict"] + ["safe" if r.mdp_verdict else "unsafe" for r in reports])
    widths = [max(len(row[i]) for row in [header] + rows) for i in range(len(header))]
    out = ["  ".join(h.rjust(w) for h, w in zip(header, widths))]
    for row in rows:
        out.append("  ".join(c.rjust(w) for c, w in zip(row, widths)))
    p = reports[0].p
    best = largest_certified_delta(reports)
    if best is None:
        out.append(f"no swept radius certifies the MDP at p = {p}")
    else:
        out.append(f"largest certified radius at p = {p}: {best}")
    return "\n".join(out) + "\n"


def build_report_doc(
    reports: Sequence[SafetyReport],
    digest: str,
    version: str,
) -> dict:
    best = largest_certified_delta(reports)
    return {
        "tool": TOOL_NAME,
        "version": version,
        "input_digest": digest,
        "p": reports[0].p,
        "deltas": [r.delta for r in reports],
        "largest_certified_delta": best,
        "reports": [
            {
                "delta": r.delta,
                "J": {str(x): r.J[x] for x in sorted(r.J)},
                "state_verdicts": {
                    str(x): bool(r.state_verdicts[x]) for x in sorted(r.state_verdicts)
                },
                "mdp_safe": bool(r.mdp_verdict),
                "sweeps_used": r.sweeps_used,
                "final_residual": r.final_delta_residual,
                "lambda_star": {
                    f"{x},{a}": lam for (x, a), lam in sorted(r.lambda_star.items())
                },
            }
            for r in reports
        ],
    }


def render_json(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
