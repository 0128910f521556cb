"""Coefficient-sign diff between two fit artifacts (alternate-parser rerun).

Reads the consumer pipeline's fit_*.json artifacts (its external report
interface) and tabulates, per shared non-fixed-effect variable, the
coefficient sign and Holm significance under each parse source.
"""

from __future__ import annotations

import json
from pathlib import Path

SIGNIFICANCE_LEVEL = 0.05


def _load_fit(path) -> dict:
    body = json.loads(Path(path).read_text(encoding="utf-8"))
    body.pop("_meta", None)
    return body


def _variable_rows(fit: dict) -> dict:
    rows = {}
    names = fit["column_names"]
    for i, name in enumerate(names):
        if "=" in name:
            continue  # one-hot fixed-effect column
        corrected = fit["corrected_pvalues"][i] if fit["corrected_pvalues"] else None
        rows[name] = {
            "estimate": fit["coefficients"][i],
            "significant": (corrected is not None and corrected == corrected
                            and corrected < SIGNIFICANCE_LEVEL),
        }
    return rows


def sign_of(value: float) -> str:
    if value > 0:
        return "+"
    if value < 0:
        return "-"
    return "0"


def diff_fit_reports(fit_a_path, fit_b_path, output_path,
                     label_a: str = "a", label_b: str = "b") -> dict:
    """Write the sign/significance diff table; returns summary counts."""
    rows_a = _variable_rows(_load_fit(fit_a_path))
    rows_b = _variable_rows(_load_fit(fit_b_path))
    shared = sorted(set(rows_a) & set(rows_b))
    only_a = sorted(set(rows_a) - set(rows_b))
    only_b = sorted(set(rows_b) - set(rows_a))

    lines = [f"variable\tsign_{label_a}\tsign_{label_b}\tsig_{label_a}"
             f"\tsig_{label_b}\tagree"]
    agreements = 0
    for name in shared:
        a, b = rows_a[name], rows_b[name]
        agree = (sign_of(a["estimate"]) == sign_of(b["estimate"])
                 and a["significant"] == b["significant"])
        agreements += agree
        lines.append("\t".join([
            name, sign_of(a["estimate"]), sign_of(b["estimate"]),
            "*" if a["significant"] else "", "*" if b["significant"] else "",
            "yes" if agree else "NO",
        ]))
    for name in only_a:
        lines.append(f"{name}\t{sign_of(rows_a[name]['estimate'])}\t\t"
                     f"{'*' if rows_a[name]['significant'] else ''}\t\tonly_{label_a}")
    for name in only_b:
        lines.append(f"{name}\t\t{sign_of(rows_b[name]['estimate'])}\t\t"
                     f"{'*' if rows_b[name]['significant'] else ''}\tonly_{label_b}")
    output_path = Path(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    output_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return {"shared": len(shared), "agreements": agreements,
            "only_a": only_a, "only_b": only_b}
