"""Agreement and diagnostic statistics."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats as sps

UNDEFINED = float("nan")


@dataclass
class AgreementReport:
    pcc: float
    slope: float
    intercept: float
    md: float
    loa_low: float
    loa_high: float
    mae: float
    n: int

    def to_dict(self) -> dict:
        return asdict(self)


def pcc(a, b) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    da, db = a - a.mean(), b - b.mean()
    den = np.sqrt(np.sum(da * da) * np.sum(db * db))
    if den == 0:
        return UNDEFINED
    return float(np.clip(np.sum(da * db) / den, -1.0, 1.0))


def linreg(a, b) -> tuple[float, float]:
    """Least-squares ``b ~ slope * a + intercept``."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    da = a - a.mean()
    sxx = np.sum(da * da)
    if sxx == 0:
        return UNDEFINED, UNDEFINED
    slope = np.sum(da * (b - b.mean())) / sxx
    return float(slope), float(b.mean() - slope * a.mean())


def bland_altman(a, b) -> tuple[float, float, float]:
    """Mean difference ``b - a`` and 95% limits of agreement."""
    d = np.asarray(b, dtype=float) - np.asarray(a, dtype=float)
    md = float(d.mean())
    sd = float(d.std(ddof=1))
    return md, md - 1.96 * sd, md + 1.96 * sd


def mae(a, b) -> float:
    return float(np.mean(np.abs(np.asarray(b, dtype=float) - np.asarray(a, dtype=float))))


def agreement_stats(a, b) -> AgreementReport:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("agreement needs two equal-length vectors")
    if a.size < 3:
        raise ValueError(f"agreement needs n >= 3, got {a.size}")
    slope, intercept = linreg(a, b)
    md, lo, hi = bland_altman(a, b)
    return AgreementReport(pcc(a, b), slope, intercept, md, lo, hi, mae(a, b), int(a.size))


# -------------------------------------------------------------------- AUC
def auc(scores_pos, scores_neg) -> float:
    """Mann-Whitney AUC with ties counted as one half (midranks)."""
    pos = np.asarray(scores_pos, dtype=float).ravel()
    neg = np.asarray(scores_neg, dtype=float).ravel()
    if pos.size == 0 or neg.size == 0:
        raise ValueError("AUC needs both positive and negative cases")
    ranks = sps.rankdata(np.concatenate([pos, neg]))
    u = ranks[:pos.size].sum() - pos.size * (pos.size + 1) / 2
    return float(u / (pos.size * neg.size))


def auc_labels(scores, labels) -> float:
    scores, labels = np.asarray(scores, dtype=float), np.asarray(labels).astype(bool)
    return auc(scores[labels], scores[~labels])


def bootstrap_auc_diff(scores_a, scores_b, labels, n_boot: int = 2000, seed: int = 0
                       ) -> tuple[float, float]:
    """Paired bootstrap of ``AUC(a) - AUC(b)``; returns ``(observed_diff, p)``.

    Cases are resampled with replacement; resamples with a single class are
    redrawn. The two-sided p is twice the smaller tail mass of the bootstrap
    differences around zero, capped at 1.
    """
    a, b = np.asarray(scores_a, dtype=float), np.asarray(scores_b, dtype=float)
    y = np.asarray(labels).astype(bool)
    if y.all() or not y.any():
        raise ValueError("bootstrap AUC needs both classes")
    observed = auc_labels(a, y) - auc_labels(b, y)
    rng = np.random.default_rng(seed)
    n = y.size
    diffs = np.empty(n_boot)
    k = 0
    while k < n_boot:
        idx = rng.integers(0, n, n)
        yy = y[idx]
        if yy.all() or not yy.any():
            continue
        diffs[k] = auc_labels(a[idx], yy) - auc_labels(b[idx], yy)
        k += 1
    p = 2 * min(np.mean(diffs <= 0), np.mean(diffs >= 0))
    return float(observed), float(min(p, 1.0))


# ----------------------------------------------------------- paired tests
@dataclass
class PairedTests:
    t_statistic: float
    t_p: float
    wilcoxon_p: float
    n: int


def paired_t(a, b) -> tuple[float, float]:
    """Two-sided paired t-test on ``a - b`` with ``n - 1`` degrees of freedom."""
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    n = d.size
    sd = d.std(ddof=1)
    if sd == 0:
        if np.all(d == 0):
            return 0.0, 1.0
        return float(np.sign(d.mean()) * np.inf), 0.0
    t = d.mean() / (sd / np.sqrt(n))
    return float(t), float(2 * sps.t.sf(abs(t), n - 1))


def paired_tests(a, b) -> PairedTests:
    """Paired t and Wilcoxon signed-rank (normal approximation, zeros dropped)."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if a.shape != b.shape or a.size < 5:
        raise ValueError("paired tests need two equal-length vectors with n >= 5")
    d = a - b
    if np.all(d == 0):
        return PairedTests(0.0, 1.0, 1.0, int(a.size))
    t, tp = paired_t(a, b)
    w = sps.wilcoxon(d, zero_method="wilcox", correction=False, method="approx")
    return PairedTests(t, tp, float(w.pvalue), int(a.size))
