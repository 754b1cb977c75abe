"""Soft comparisons of a built cohort against published reference figures.

These checks never raise; a miss is reported as a :class:`ReferenceDivergence`
warning with the size of the gap so a run on a different extract of the data
is still usable.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .ingest import CohortTable
from .select import FeatureImportanceReport

REFERENCE_COHORT_ROWS = 69_984
REFERENCE_PREVALENCE = 0.092
REFERENCE_STAY_MEAN = 4.3
CONSENSUS_FEATURES = ("number_inpatient", "number_outpatient", "number_emergency",
                      "number_diagnoses", "num_medications", "num_procedures")


class ReferenceDivergence(UserWarning):
    pass


@dataclass(frozen=True)
class SoftCheck:
    name: str
    observed: object
    target: object
    tolerance: str
    passed: bool
    divergence: str

    def line(self) -> str:
        status = "ok" if self.passed else "DIVERGES"
        return f"{self.name}: {status} (observed {self.observed}, target {self.target} {self.tolerance}; {self.divergence})"


def check_cohort(table: CohortTable, stay_column: str = "time_in_hospital") -> list[SoftCheck]:
    n = table.n_rows
    rel = (n - REFERENCE_COHORT_ROWS) / REFERENCE_COHORT_ROWS
    out = [SoftCheck("cohort_rows", n, REFERENCE_COHORT_ROWS, "+/-3%", abs(rel) <= 0.03,
                     f"{rel:+.2%} relative")]
    prev = float(table.y.mean()) if n else float("nan")
    gap = (prev - REFERENCE_PREVALENCE) * 100
    out.append(SoftCheck("prevalence", round(prev, 4), REFERENCE_PREVALENCE, "+/-1.0pp",
                         abs(gap) <= 1.0, f"{gap:+.2f} pp"))
    if stay_column in table.names:
        stay = table.X[:, table.names.index(stay_column)]
        mean = float(np.nanmean(stay)) if n else float("nan")
        d = mean - REFERENCE_STAY_MEAN
        out.append(SoftCheck("stay_mean", round(mean, 3), REFERENCE_STAY_MEAN, "+/-0.2 days",
                             abs(d) <= 0.2, f"{d:+.3f} days"))
    else:
        out.append(SoftCheck("stay_mean", None, REFERENCE_STAY_MEAN, "+/-0.2 days", False,
                             f"column {stay_column} absent"))
    return out


def check_boruta(confirmed) -> SoftCheck:
    """``confirmed`` is a :class:`FeatureImportanceReport` or an iterable of confirmed names."""
    if isinstance(confirmed, FeatureImportanceReport):
        confirmed = confirmed.confirmed
    confirmed = set(confirmed)
    missing = [f for f in CONSENSUS_FEATURES if f not in confirmed]
    return SoftCheck("consensus_in_boruta", len(CONSENSUS_FEATURES) - len(missing),
                     len(CONSENSUS_FEATURES), "all confirmed", not missing,
                     "missing: " + (", ".join(missing) if missing else "none"))


def soft_checks(table: CohortTable, confirmed=None, warn: bool = True) -> list[SoftCheck]:
    """Run every reference comparison; divergent ones are also emitted as warnings."""
    checks = check_cohort(table)
    if confirmed is not None:
        checks.append(check_boruta(confirmed))
    if warn:
        for c in checks:
            if not c.passed:
                warnings.warn(c.line(), ReferenceDivergence, stacklevel=2)
    return checks
