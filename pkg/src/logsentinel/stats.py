"""Two-sample discriminant tests and alpha-threshold feature selection.

Numeric features are compared across the two label classes with the
Mann-Whitney U test; boolean features with a 2x2 chi-square test of
independence whose effect size is the phi coefficient.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import SingleClass, ZeroMargin

logger = logging.getLogger(__name__)

EXACT_MAX_N = 16
# Floating slack when comparing U deviations against the observed one.
_P_EPS = 1e-9


@dataclass(frozen=True)
class MannWhitneyResult:
    u: float
    p: float
    method: str
    degenerate: bool = False


@dataclass(frozen=True)
class ChiSquareResult:
    chi2: float
    phi: float
    p: float
    dof: int = 1


@dataclass(frozen=True)
class FeatureTest:
    name: str
    kind: str
    statistic: float
    p: float
    significant: bool
    test: str


@dataclass
class SelectionReport:
    alpha: float
    features: list = field(default_factory=list)

    @property
    def selected(self):
        return [f.name for f in self.features if f.significant]


def rank_with_ties(values) -> np.ndarray:
    """1-based ranks; tied values share the mean of the ranks they occupy."""
    x = np.asarray(values, dtype=float)
    n = x.size
    order = np.argsort(x, kind="mergesort")
    sorted_x = x[order]
    ranks = np.empty(n, dtype=float)
    i = 0
    while i < n:
        j = i + 1
        while j < n and sorted_x[j] == sorted_x[i]:
            j += 1
        ranks[order[i:j]] = (i + j + 1) / 2.0
        i = j
    return ranks


def _u_statistic(a: np.ndarray, b: np.ndarray, ranks: np.ndarray) -> float:
    n1 = a.size
    return float(ranks[:n1].sum() - n1 * (n1 + 1) / 2.0)


def _exact_p(ranks: np.ndarray, n1: int, u_obs: float) -> float:
    """Two-sided p from the permutation distribution of the rank sum.

    Midranks are doubled to integers and the number of size-n1 subsets per
    rank-sum is counted by dynamic programming, so ties are handled exactly.
    """
    n = ranks.size
    doubled = np.rint(ranks * 2).astype(int)
    max_sum = int(doubled.sum())
    # counts[k][s]: subsets of size k with doubled rank sum s
    counts = np.zeros((n1 + 1, max_sum + 1), dtype=float)
    counts[0, 0] = 1.0
    for r in doubled:
        counts[1:, r:] += counts[:-1, :max_sum + 1 - r].copy()
    dist = counts[n1]
    total = dist.sum()
    offset = n1 * (n1 + 1)  # 2 * n1(n1+1)/2
    sums = np.arange(max_sum + 1)
    u_vals = (sums - offset) / 2.0
    mean_u = n1 * (n - n1) / 2.0
    dev_obs = abs(u_obs - mean_u)
    mask = np.abs(u_vals - mean_u) >= dev_obs - _P_EPS
    return float(min(1.0, dist[mask].sum() / total))


def _normal_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def _approx_p(ranks: np.ndarray, n1: int, n2: int, u_obs: float) -> float:
    n = n1 + n2
    _, tie_counts = np.unique(ranks, return_counts=True)
    tie_term = float(((tie_counts ** 3) - tie_counts).sum())
    var = n1 * n2 / 12.0 * ((n + 1) - tie_term / (n * (n - 1)))
    if var <= 0:
        return 1.0
    mean_u = n1 * n2 / 2.0
    u_big = max(u_obs, n1 * n2 - u_obs)
    z = (u_big - mean_u - 0.5) / math.sqrt(var)
    return float(min(1.0, max(0.0, 2.0 * _normal_sf(z))))


def mann_whitney_u(a, b, mode: str = "auto") -> MannWhitneyResult:
    """Two-sided Mann-Whitney U test; U is reported for the first sample.

    ``mode`` is ``"exact"``, ``"approx"`` or ``"auto"`` (exact when the
    pooled size is at most 16).  The approximation uses tie-corrected
    variance with a continuity correction.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be non-empty")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("samples must be finite")
    if mode not in ("auto", "exact", "approx"):
        raise ValueError(f"unknown mode {mode!r}")

    n1, n2 = a.size, b.size
    pooled = np.concatenate([a, b])
    ranks = rank_with_ties(pooled)
    u = _u_statistic(a, b, ranks)
    exact = mode == "exact" or (mode == "auto" and n1 + n2 <= EXACT_MAX_N)
    method = "exact" if exact else "normal-approximation"
    if np.all(pooled == pooled[0]):
        logger.warning("degenerate Mann-Whitney sample: all values identical")
        return MannWhitneyResult(u, 1.0, method, degenerate=True)
    p = _exact_p(ranks, n1, u) if exact else _approx_p(ranks, n1, n2, u)
    return MannWhitneyResult(u, p, method)


def chi_square_sf(x: float, dof: int = 1) -> float:
    """Upper tail of the chi-square distribution (one degree of freedom)."""
    if dof != 1:
        raise ValueError("only dof=1 is supported")
    if x < 0:
        raise ValueError("x must be non-negative")
    return math.erfc(math.sqrt(x / 2.0))


def chi_square_2x2(table, yates: bool = False) -> ChiSquareResult:
    (a, b), (c, d) = [[int(v) for v in row] for row in table]
    if min(a, b, c, d) < 0:
        raise ValueError("counts must be non-negative")
    n = a + b + c + d
    margins = (a + b, c + d, a + c, b + d)
    if min(margins) == 0:
        raise ZeroMargin(f"contingency table {table!r} has an empty row or column")
    denom = margins[0] * margins[1] * margins[2] * margins[3]
    diff = abs(a * d - b * c)
    phi = diff / math.sqrt(denom)
    if yates:
        corrected = max(0.0, diff - n / 2.0)
        chi2 = n * corrected * corrected / denom
    else:
        chi2 = n * diff * diff / denom
    return ChiSquareResult(float(chi2), float(min(1.0, phi)), chi_square_sf(chi2), 1)


def contingency(flag, label) -> list:
    """2x2 counts: rows are flag 1/0, columns label 1/0."""
    flag = np.asarray(flag).astype(int)
    label = np.asarray(label).astype(int)
    return [
        [int(np.sum((flag == 1) & (label == 1))), int(np.sum((flag == 1) & (label == 0)))],
        [int(np.sum((flag == 0) & (label == 1))), int(np.sum((flag == 0) & (label == 0)))],
    ]


def test_feature(name, kind, values, labels, yates=False, alpha=0.01) -> FeatureTest:
    values = np.asarray(values, dtype=float)
    labels = np.asarray(labels).astype(int)
    if kind == "numeric":
        res = mann_whitney_u(values[labels == 1], values[labels == 0])
        return FeatureTest(name, kind, res.u, res.p, res.p < alpha, "mann-whitney")
    try:
        res = chi_square_2x2(contingency(values, labels), yates=yates)
    except ZeroMargin:
        # constant flag: no association can be measured
        return FeatureTest(name, kind, 0.0, 1.0, False, "chi-square")
    return FeatureTest(name, kind, res.phi, res.p, res.p < alpha, "chi-square")


test_feature.__test__ = False  # not a pytest test


def select_features(ds, alpha: float = 0.01, yates: bool = False):
    """Test every numeric/boolean column against the label.

    Returns ``(report, reduced)`` where ``reduced`` keeps the label plus the
    features with ``p < alpha``.
    """
    labels = np.asarray(ds.label_values(), dtype=int)
    if len(set(labels.tolist())) < 2:
        raise SingleClass("feature selection needs both classes present")
    report = SelectionReport(alpha=alpha)
    for col in ds.columns:
        if col.kind not in ("numeric", "boolean"):
            continue
        report.features.append(
            test_feature(col.name, col.kind, ds.column(col.name), labels, yates, alpha)
        )
    keep = [f.name for f in report.features if f.significant]
    return report, ds.select(keep + [ds.label_name])


def format_report(report: SelectionReport, fmt: str = "markdown") -> str:
    header = ["Variable", "Kind", "Test", "Statistic", "P-Value",
              f"Significant at {report.alpha:g}"]
    rows = [
        [f.name, f.kind, f.test, repr(float(f.statistic)), repr(float(f.p)), str(f.significant)]
        for f in report.features
    ]
    if fmt == "csv":
        import csv
        import io
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        return buf.getvalue()
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    for row in rows:
        lines.append("| " + " | ".join(c.replace("|", "\\|") for c in row) + " |")
    return "\n".join(lines) + "\n"
