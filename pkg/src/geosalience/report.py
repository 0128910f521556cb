"""Columnar fit reports: factor, variable, estimate, S.E., significance star,
with deviance and class-balanced accuracy in the footer."""

from __future__ import annotations

from typing import Optional

from .features import DesignMatrix
from .glm import FitResult

FACTOR_OF = {
    "intercept": "",
    "prior_location_mentions": "Importance",
    "author_group_posts": "Author",
    "author_event_posts": "Author",
    "author_event_location_posts": "Author",
    "is_organization": "Author",
    "is_organization_unknown": "Author",
    "is_local": "Author",
    "is_local_unknown": "Author",
    "location_local_to_group": "Audience",
    "group_size": "Audience",
    "prior_engagement": "Audience",
    "delta_prior_engagement": "Audience",
    "prior_engagement_missing": "Audience",
    "has_url": "Information",
    "has_media": "Information",
    "days_since_start": "Time",
    "during_peak": "Time",
    "post_peak": "Time",
}

SIGNIFICANCE_LEVEL = 0.05


def variable_rows(result: FitResult, dm: DesignMatrix) -> list[dict]:
    """Non-fixed-effect coefficient rows in design order."""
    rows = []
    for i, col in enumerate(dm.columns):
        if col.kind == "onehot":
            continue
        corrected = (result.corrected_pvalues[i]
                     if result.corrected_pvalues is not None else None)
        rows.append({
            "factor": FACTOR_OF.get(col.name, ""),
            "variable": col.name,
            "estimate": float(result.coefficients[i]),
            "se": (float(result.standard_errors[i])
                   if result.standard_errors is not None else None),
            "z": float(result.zvalues[i]) if result.zvalues is not None else None,
            "p_raw": float(result.pvalues[i]) if result.pvalues is not None else None,
            "p_corrected": None if corrected is None else float(corrected),
            "significant": bool(corrected is not None and corrected == corrected
                                and corrected < SIGNIFICANCE_LEVEL),
        })
    return rows


def _fmt(value, digits=6) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "*" if value else ""
    if isinstance(value, float):
        if value != value:
            return ""
        return f"{value:.{digits}g}"
    return str(value)


def render_report(result: FitResult, dm: DesignMatrix, *,
                  variant: str, deviance: dict,
                  accuracy: Optional[tuple] = None) -> str:
    """Render the report body (without the artifact meta header)."""
    lines = ["factor\tvariable\testimate\tse\tsignificant\tz\tp_raw\tp_corrected"]
    for row in variable_rows(result, dm):
        lines.append("\t".join([
            row["factor"], row["variable"], _fmt(row["estimate"]),
            _fmt(row["se"]), _fmt(row["significant"]), _fmt(row["z"]),
            _fmt(row["p_raw"]), _fmt(row["p_corrected"]),
        ]))
    fe_groups = sorted({c.group for c in dm.columns if c.kind == "onehot"})
    n_fe = sum(1 for c in dm.columns if c.kind == "onehot")
    lines.append("")
    lines.append(f"# analysis\t{variant}")
    lines.append(f"# fixed_effects\t{','.join(fe_groups) if fe_groups else 'none'}\t{n_fe} columns")
    lines.append(f"# model_deviance\t{_fmt(deviance['model_deviance'])}")
    lines.append(f"# null_deviance\t{_fmt(deviance['null_deviance'])}")
    lines.append(f"# lr_statistic\t{_fmt(deviance['lr_statistic'])}\tdf={deviance['lr_df']}"
                 f"\tp={_fmt(deviance['lr_pvalue'])}")
    if accuracy is not None:
        lines.append(f"# balanced_accuracy\t{_fmt(accuracy[0])}\t+/-\t{_fmt(accuracy[1])}")
    lines.append(f"# se_method\t{result.se_method or 'none'}")
    lines.append(f"# correction\t{result.correction_method}")
    lines.append(f"# converged\t{result.converged}\titerations={result.iterations}")
    lines.append(f"# penalty\tl2={_fmt(result.penalty.l2_weight)}\tl1={_fmt(result.penalty.l1_weight)}")
    return "\n".join(lines) + "\n"
