"""Cohort-level inference: imputation, normality gating, omnibus tests,
false-discovery-rate correction, pairwise tests, and effect-size labels.

Per feature, the three condition samples are gated by Shapiro-Wilk
(parametric only when all three pass at alpha = 0.05): parametric features
run a one-way repeated-measures ANOVA, the rest a Friedman test with
mid-rank tie correction.  Omnibus p-values are Benjamini-Hochberg adjusted
across the 31 features; significant features get all three pairwise
comparisons (paired t with Cohen's d_z, or Wilcoxon signed-rank with
Cliff's delta), adjusted within the feature's three-test family.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
from scipy import stats as sps

from .model import CONDITION_ORDER, Condition

ALPHA = 0.05
MIN_PAIRS = 5
WILCOXON_EXACT_MAX_N = 25

# |value| < threshold -> band label; the last label catches everything else.
CLIFFS_DELTA_THRESHOLDS = (0.147, 0.33, 0.474, 0.714)
CLIFFS_DELTA_LABELS = ("negligible", "small", "medium", "large", "very_large")
COHENS_D_THRESHOLDS = (0.2, 0.5, 0.8, 1.2, 2.0)
COHENS_D_LABELS = ("negligible", "small", "medium", "large", "very_large", "huge")


class StatsError(Exception):
    pass


class AllMissingFeature(StatsError):
    pass


class SampleTooSmall(StatsError):
    pass


class SampleTooLarge(StatsError):
    pass


class ZeroVariance(StatsError):
    pass


class UnequalN(StatsError):
    pass


class AllZeroDifferences(StatsError):
    pass


class LengthMismatch(StatsError):
    pass


class OutOfRange(StatsError):
    pass


class EffectKind(Enum):
    COHENS_D = "cohens_d"
    CLIFFS_DELTA = "cliffs_delta"


class TestKind(Enum):
    PAIRED_T = "paired_t"
    WILCOXON = "wilcoxon"


class EffectLabel(Enum):
    NEGLIGIBLE = "negligible"
    SMALL = "small"
    MEDIUM = "medium"
    LARGE = "large"
    VERY_LARGE = "very_large"
    HUGE = "huge"


def impute_median(matrix: np.ndarray) -> np.ndarray:
    """Replace NaN cells with the column median of one condition's matrix."""
    matrix = np.asarray(matrix, dtype=float)
    out = matrix.copy()
    for j in range(matrix.shape[1]):
        col = out[:, j]
        missing = np.isnan(col)
        if missing.all():
            raise AllMissingFeature(f"feature column {j} is entirely missing")
        if missing.any():
            col[missing] = np.median(col[~missing])
    return out


def shapiro_wilk(sample: np.ndarray) -> tuple[float, float]:
    """Shapiro-Wilk W and p (Royston's approximation, 3 <= n <= 5000)."""
    sample = np.asarray(sample, dtype=float)
    n = len(sample)
    if n < 3:
        raise SampleTooSmall(f"need n >= 3, got {n}")
    if n > 5000:
        raise SampleTooLarge(f"approximation valid up to n = 5000, got {n}")
    if np.ptp(sample) == 0:
        raise ZeroVariance("all values identical")
    w, p = sps.shapiro(sample)
    return float(w), float(p)


def rm_anova(samples: list[np.ndarray]) -> tuple[float, float]:
    """One-way repeated-measures ANOVA F and p for k paired condition samples."""
    data = np.column_stack(samples)  # subjects x conditions
    n, k = data.shape
    grand = data.mean()
    ss_cond = n * float(((data.mean(axis=0) - grand) ** 2).sum())
    ss_subj = k * float(((data.mean(axis=1) - grand) ** 2).sum())
    ss_tot = float(((data - grand) ** 2).sum())
    ss_err = max(ss_tot - ss_cond - ss_subj, 0.0)
    df_cond = k - 1
    df_err = (k - 1) * (n - 1)
    if ss_cond == 0.0:
        return 0.0, 1.0
    if ss_err == 0.0:
        return math.inf, 0.0
    f = (ss_cond / df_cond) / (ss_err / df_err)
    return float(f), float(sps.f.sf(f, df_cond, df_err))


def friedman(samples: list[np.ndarray]) -> tuple[float, float]:
    """Friedman chi-square with mid-rank tie correction; fully tied data -> (0, 1)."""
    data = np.column_stack(samples)
    n, k = data.shape
    ranks = np.apply_along_axis(sps.rankdata, 1, data)
    col_sums = ranks.sum(axis=0)
    s = 12.0 / (n * k * (k + 1)) * float((col_sums ** 2).sum()) - 3.0 * n * (k + 1)

    ties = 0.0
    for row in data:
        _, counts = np.unique(row, return_counts=True)
        ties += float((counts ** 3 - counts).sum())
    correction = 1.0 - ties / (n * k * (k * k - 1))
    if correction <= 0.0:
        return 0.0, 1.0
    stat = s / correction
    return float(stat), float(sps.chi2.sf(stat, k - 1))


def omnibus(samples: list[np.ndarray], parametric: bool) -> tuple[str, float, float]:
    """(test name, statistic, p) across k paired condition samples."""
    lengths = {len(s) for s in samples}
    if len(lengths) != 1:
        raise UnequalN(f"paired samples differ in length: {sorted(lengths)}")
    if parametric:
        stat, p = rm_anova(samples)
        return "rm_anova", stat, p
    stat, p = friedman(samples)
    return "friedman", stat, p


def bh_fdr(p_values) -> np.ndarray:
    """Benjamini-Hochberg step-up adjustment, back in input order."""
    p = np.asarray(p_values, dtype=float)
    m = len(p)
    order = np.argsort(p, kind="stable")
    adjusted = np.empty(m)
    running = 1.0
    for rank in range(m, 0, -1):
        idx = order[rank - 1]
        running = min(running, p[idx] * m / rank)
        adjusted[idx] = running
    return adjusted


def cohens_dz(a: np.ndarray, b: np.ndarray) -> float:
    """Paired-samples effect size: mean difference over SD of differences."""
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    sd = float(np.std(d, ddof=1))
    mean = float(np.mean(d))
    if sd == 0.0:
        if mean == 0.0:
            raise AllZeroDifferences("no variation in paired differences")
        return math.copysign(math.inf, mean)
    return mean / sd


def cliffs_delta(a: np.ndarray, b: np.ndarray) -> float:
    """Dominance statistic over all cross pairs, in [-1, 1]."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.mean(np.sign(a[:, None] - b[None, :])))


def paired_t(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    """Two-sided paired t-test on the differences."""
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    n = len(d)
    sd = float(np.std(d, ddof=1))
    mean = float(np.mean(d))
    if sd == 0.0:
        if mean == 0.0:
            raise AllZeroDifferences("all paired differences are zero")
        return math.copysign(math.inf, mean), 0.0
    t = mean / (sd / math.sqrt(n))
    return float(t), float(2.0 * sps.t.sf(abs(t), n - 1))


def _wilcoxon_exact_p(doubled_ranks: np.ndarray, doubled_w_plus: int) -> float:
    """Exact two-sided p by enumerating the signed-rank sum distribution.

    Ranks are doubled so mid-ranks become integers; the distribution of the
    positive rank sum is built by dynamic programming over sign assignments.
    """
    total = int(doubled_ranks.sum())
    counts = np.zeros(total + 1)
    counts[0] = 1.0
    for r in doubled_ranks:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[: len(counts) - r]
        counts = counts + shifted
    n_assignments = 2.0 ** len(doubled_ranks)
    cdf = counts[: doubled_w_plus + 1].sum() / n_assignments
    sf = counts[doubled_w_plus:].sum() / n_assignments
    return min(1.0, 2.0 * min(cdf, sf))


def wilcoxon_signed_rank(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    """Two-sided Wilcoxon signed-rank test on paired samples.

    Zero differences are dropped (error if nothing remains).  Up to 25
    effective pairs the p-value is exact (all 2^n sign assignments);
    above that a normal approximation with tie correction and continuity
    correction is used.  The statistic is min(W+, W-).
    """
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    d = d[d != 0.0]
    n = len(d)
    if n == 0:
        raise AllZeroDifferences("all paired differences are zero")
    ranks = sps.rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    w = min(w_plus, w_minus)

    if n <= WILCOXON_EXACT_MAX_N:
        doubled = np.rint(2.0 * ranks).astype(int)
        p = _wilcoxon_exact_p(doubled, int(round(2.0 * w_plus)))
        return w, p

    mu = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    var -= float((tie_counts ** 3 - tie_counts).sum()) / 48.0
    if var <= 0:
        raise AllZeroDifferences("all differences tie to one rank")
    z = (w - mu + 0.5) / math.sqrt(var)
    return w, float(min(1.0, 2.0 * sps.norm.cdf(z)))


def label_effect(kind: EffectKind, value: float,
                 d_thresholds: tuple[float, ...] = COHENS_D_THRESHOLDS,
                 ) -> EffectLabel:
    """Magnitude band of an effect value.

    Cliff's delta uses the Romano bands (0.147/0.33/0.474/0.714); Cohen's d
    uses the Cohen-Sawilowsky bands by default, overridable via
    ``d_thresholds`` (5 ascending cut points for the 6 standard labels).
    """
    size = abs(value)
    if kind is EffectKind.CLIFFS_DELTA:
        if size > 1.0 + 1e-12:
            raise OutOfRange(f"|delta| = {size} exceeds 1")
        names = CLIFFS_DELTA_LABELS
        idx = bisect_right(CLIFFS_DELTA_THRESHOLDS, size)
    else:
        if len(d_thresholds) != len(COHENS_D_LABELS) - 1:
            raise OutOfRange(f"need {len(COHENS_D_LABELS) - 1} cut points, "
                             f"got {len(d_thresholds)}")
        names = COHENS_D_LABELS
        idx = bisect_right(d_thresholds, size)
    return EffectLabel(names[idx])


@dataclass(frozen=True)
class PairwiseResult:
    feature: str
    pair: tuple[Condition, Condition]
    test: TestKind
    statistic: float
    p_raw: float
    p_adj: float
    effect: EffectKind
    effect_value: float
    label: EffectLabel


@dataclass(frozen=True)
class FeatureResult:
    name: str
    normality_p: dict[Condition, float | None]
    parametric: bool
    omnibus_test: str
    statistic: float
    p_raw: float
    p_adj: float
    pairwise: list[PairwiseResult] = field(default_factory=list)


@dataclass(frozen=True)
class StatReport:
    n_subjects: int
    conditions: tuple[Condition, ...]
    features: list[FeatureResult]


def pairwise(a: np.ndarray, b: np.ndarray, parametric: bool,
             pair: tuple[Condition, Condition] = (Condition.BASELINE, Condition.RIDE),
             feature: str = "",
             d_thresholds: tuple[float, ...] = COHENS_D_THRESHOLDS,
             ) -> PairwiseResult:
    """One pairwise comparison with its effect size and label (p_adj = NaN)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if len(a) != len(b):
        raise LengthMismatch(f"paired samples of length {len(a)} vs {len(b)}")
    if len(a) < MIN_PAIRS:
        raise SampleTooSmall(f"need >= {MIN_PAIRS} pairs, got {len(a)}")
    if parametric:
        stat, p = paired_t(a, b)
        effect_kind, effect_value = EffectKind.COHENS_D, cohens_dz(a, b)
    else:
        stat, p = wilcoxon_signed_rank(a, b)
        effect_kind, effect_value = EffectKind.CLIFFS_DELTA, cliffs_delta(a, b)
    return PairwiseResult(
        feature=feature, pair=pair, test=TestKind.PAIRED_T if parametric else TestKind.WILCOXON,
        statistic=stat, p_raw=p, p_adj=math.nan, effect=effect_kind,
        effect_value=effect_value,
        label=label_effect(effect_kind, effect_value, d_thresholds))


def _gate_parametric(samples: list[np.ndarray],
                     ) -> tuple[dict[Condition, float | None], bool]:
    """Shapiro-Wilk per condition; parametric iff every p exceeds alpha."""
    normality: dict[Condition, float | None] = {}
    parametric = True
    for condition, sample in zip(CONDITION_ORDER, samples):
        try:
            _, p = shapiro_wilk(sample)
            normality[condition] = p
            parametric &= p > ALPHA
        except (ZeroVariance, SampleTooSmall):
            normality[condition] = None
            parametric = False
    return normality, parametric


def _null_pairwise(feature: str, pair: tuple[Condition, Condition],
                   parametric: bool) -> PairwiseResult:
    """Stand-in for a pair with no variation: p = 1, zero effect."""
    kind = EffectKind.COHENS_D if parametric else EffectKind.CLIFFS_DELTA
    return PairwiseResult(
        feature=feature, pair=pair,
        test=TestKind.PAIRED_T if parametric else TestKind.WILCOXON,
        statistic=0.0, p_raw=1.0, p_adj=math.nan, effect=kind, effect_value=0.0,
        label=EffectLabel.NEGLIGIBLE)


def run_report(cohort: dict[Condition, np.ndarray], feature_names: list[str],
               alpha: float = ALPHA,
               d_thresholds: tuple[float, ...] = COHENS_D_THRESHOLDS,
               ) -> StatReport:
    """Full inferential pipeline over a cohort of feature matrices.

    ``cohort`` maps each condition to a subjects x features matrix (NaN =
    missing) with identical subject ordering.  Post-hoc sections appear only
    for features whose FDR-adjusted omnibus p-value is below ``alpha``.
    """
    matrices = {cond: impute_median(cohort[cond]) for cond in CONDITION_ORDER}
    n_subjects = matrices[CONDITION_ORDER[0]].shape[0]
    if any(m.shape[0] != n_subjects for m in matrices.values()):
        raise UnequalN("conditions carry different subject counts")

    gated = []
    for j, name in enumerate(feature_names):
        samples = [matrices[cond][:, j] for cond in CONDITION_ORDER]
        normality, parametric = _gate_parametric(samples)
        test_name, stat, p_raw = omnibus(samples, parametric)
        gated.append((name, samples, normality, parametric, test_name, stat, p_raw))

    adjusted = bh_fdr([g[6] for g in gated])
    features: list[FeatureResult] = []
    pairs = [(CONDITION_ORDER[0], CONDITION_ORDER[1]),
             (CONDITION_ORDER[0], CONDITION_ORDER[2]),
             (CONDITION_ORDER[1], CONDITION_ORDER[2])]
    for (name, samples, normality, parametric, test_name, stat, p_raw), p_adj in zip(
            gated, adjusted):
        posthoc: list[PairwiseResult] = []
        if p_adj < alpha:
            by_cond = dict(zip(CONDITION_ORDER, samples))
            for pair_conds in pairs:
                a, b = by_cond[pair_conds[0]], by_cond[pair_conds[1]]
                try:
                    posthoc.append(pairwise(a, b, parametric, pair_conds, name,
                                            d_thresholds))
                except AllZeroDifferences:
                    posthoc.append(_null_pairwise(name, pair_conds, parametric))
            pair_adj = bh_fdr([r.p_raw for r in posthoc])
            posthoc = [replace(r, p_adj=float(q)) for r, q in zip(posthoc, pair_adj)]
        features.append(FeatureResult(
            name=name, normality_p=normality, parametric=parametric,
            omnibus_test=test_name, statistic=stat, p_raw=p_raw,
            p_adj=float(p_adj), pairwise=posthoc))
    return StatReport(n_subjects=n_subjects, conditions=CONDITION_ORDER,
                      features=features)
