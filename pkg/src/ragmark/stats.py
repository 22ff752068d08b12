"""Descriptive stats, one-way ANOVA, and Tukey-Kramer comparisons.

The F-distribution tail comes from the regularized incomplete beta
function (continued fraction, Lentz's method). The studentized range
distribution is integrated directly with composite Gauss-Legendre
quadrature, so any residual degrees of freedom (e.g. 292) are handled
without table lookup; published tables are used only as test oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

import numpy as np

from ragmark.errors import DegenerateData, EmptyInput, InvalidConfig
from ragmark import _kernels

_FPMIN = 1e-300
_CF_EPS = 1e-15
_CF_MAX_ITER = 300

# quadrature layout: inner integral over z, outer over the scale s
_INNER_SPAN = 8.5
_INNER_PANELS = 17
_INNER_POINTS = 20
_OUTER_SIGMAS = 12.0
_OUTER_PANELS = 24
_OUTER_POINTS = 16


@dataclass(frozen=True)
class DescriptiveSummary:
    count: int
    mean: float
    std: float
    min: float
    max: float
    histogram: tuple[tuple[float, float, int], ...]


@dataclass(frozen=True)
class GroupedScores:
    groups: tuple[tuple[str, tuple[float, ...]], ...]

    @classmethod
    def from_pairs(cls, pairs) -> "GroupedScores":
        return cls(
            groups=tuple((str(label), tuple(float(v) for v in values))
                         for label, values in pairs)
        )


@dataclass(frozen=True)
class AnovaResult:
    ss_between: float
    ss_within: float
    df_between: int
    df_within: int
    f_value: float
    p_value: float


@dataclass(frozen=True)
class TukeyRow:
    group1: str
    group2: str
    mean_diff: float
    p_adj: float
    lower: float
    upper: float
    reject: bool


def describe(values, bins: int = 10) -> DescriptiveSummary:
    """Count, mean, sample std (n-1), extrema, and an equal-width histogram.

    Bins are right-open except the last, which is closed; if all values
    are equal a single degenerate bin is returned. The sample std of a
    single value is defined as 0.
    """
    data = [float(v) for v in values]
    if not data:
        raise EmptyInput("describe needs at least one value")
    if bins < 1:
        raise InvalidConfig(f"bins must be >= 1, got {bins}")
    n = len(data)
    mean = math.fsum(data) / n
    if n > 1:
        std = math.sqrt(math.fsum((v - mean) ** 2 for v in data) / (n - 1))
    else:
        std = 0.0
    lo = min(data)
    hi = max(data)
    if lo == hi:
        histogram = ((lo, hi, n),)
    else:
        width = (hi - lo) / bins
        counts = [0] * bins
        for v in data:
            idx = int((v - lo) / width)
            counts[min(idx, bins - 1)] += 1
        edges = [lo + i * width for i in range(bins)] + [hi]
        histogram = tuple(
            (edges[i], edges[i + 1], counts[i]) for i in range(bins)
        )
    return DescriptiveSummary(
        count=n, mean=mean, std=std, min=lo, max=hi, histogram=histogram
    )


def f_ratio(ss_between: float, df_between: int,
            ss_within: float, df_within: int) -> float:
    """The F statistic from sums of squares and degrees of freedom."""
    return (ss_between / df_between) / (ss_within / df_within)


def _validate_groups(data: GroupedScores) -> None:
    if len(data.groups) < 2:
        raise DegenerateData("ANOVA needs at least two groups")
    for label, values in data.groups:
        if not values:
            raise DegenerateData(f"group {label!r} is empty")
        if any(not math.isfinite(v) for v in values):
            raise DegenerateData(f"group {label!r} contains non-finite values")
    total = sum(len(values) for _, values in data.groups)
    if total <= len(data.groups):
        raise DegenerateData(
            f"need more observations ({total}) than groups ({len(data.groups)})"
        )


def one_way_anova(data: GroupedScores) -> AnovaResult:
    """Partition variance between and within groups; F and its p-value."""
    _validate_groups(data)
    k = len(data.groups)
    n_total = sum(len(values) for _, values in data.groups)
    grand_mean = math.fsum(
        v for _, values in data.groups for v in values
    ) / n_total
    ss_between = math.fsum(
        len(values) * (math.fsum(values) / len(values) - grand_mean) ** 2
        for _, values in data.groups
    )
    ss_within = math.fsum(
        (v - math.fsum(values) / len(values)) ** 2
        for _, values in data.groups
        for v in values
    )
    df_between = k - 1
    df_within = n_total - k
    if ss_within == 0.0 and ss_between == 0.0:
        raise DegenerateData("all observations are identical")
    if ss_within == 0.0:
        # groups are internally constant but differ: infinitely strong effect
        return AnovaResult(
            ss_between=ss_between, ss_within=0.0,
            df_between=df_between, df_within=df_within,
            f_value=math.inf, p_value=0.0,
        )
    f_value = f_ratio(ss_between, df_between, ss_within, df_within)
    return AnovaResult(
        ss_between=ss_between,
        ss_within=ss_within,
        df_between=df_between,
        df_within=df_within,
        f_value=f_value,
        p_value=f_survival(f_value, df_between, df_within),
    )


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (Lentz)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    return h


def _betainc_reg(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_bt = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    bt = math.exp(ln_bt)
    if x < (a + 1.0) / (a + b + 2.0):
        return bt * _betacf(a, b, x) / a
    return 1.0 - bt * _betacf(b, a, 1.0 - x) / b


def f_survival(f: float, d1: int, d2: int) -> float:
    """Upper-tail probability of the F distribution."""
    if d1 < 1 or d2 < 1:
        raise InvalidConfig(f"degrees of freedom must be >= 1, got ({d1}, {d2})")
    if not math.isfinite(f):
        return 0.0 if f > 0 else 1.0
    if f <= 0.0:
        return 1.0
    x = d2 / (d2 + d1 * f)
    return min(1.0, max(0.0, _betainc_reg(d2 / 2.0, d1 / 2.0, x)))


def _panel_nodes(lo: float, hi: float, panels: int, points: int):
    """Composite Gauss-Legendre nodes and weights over [lo, hi]."""
    base_x, base_w = np.polynomial.legendre.leggauss(points)
    nodes = []
    weights = []
    step = (hi - lo) / panels
    for p in range(panels):
        a = lo + p * step
        mid = a + step / 2.0
        half = step / 2.0
        nodes.extend(mid + half * base_x)
        weights.extend(half * base_w)
    return np.asarray(nodes), np.asarray(weights)


@lru_cache(maxsize=1)
def _inner_grid():
    z, w = _panel_nodes(-_INNER_SPAN, _INNER_SPAN, _INNER_PANELS, _INNER_POINTS)
    phi = np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    big_phi = np.array([0.5 * math.erfc(-v / math.sqrt(2.0)) for v in z])
    return (
        _kernels.as_grid(z),
        _kernels.as_grid(w * phi),
        _kernels.as_grid(big_phi),
    )


@lru_cache(maxsize=64)
def _outer_grid(nu: int):
    """Nodes and density-weighted weights for the scale integral.

    The scale s follows the chi_nu / sqrt(nu) distribution, which
    concentrates near 1 with spread ~1/sqrt(2 nu); the integration
    window covers 12 of those spreads, clipped at 0.
    """
    sigma = 1.0 / math.sqrt(2.0 * nu)
    lo = max(0.0, 1.0 - _OUTER_SIGMAS * sigma)
    hi = 1.0 + _OUTER_SIGMAS * sigma
    s, w = _panel_nodes(lo, hi, _OUTER_PANELS, _OUTER_POINTS)
    half_nu = nu / 2.0
    ln_norm = math.log(2.0) + half_nu * math.log(half_nu) - math.lgamma(half_nu)
    log_density = ln_norm + (nu - 1.0) * np.log(s) - half_nu * s * s
    return [float(v) for v in s], _kernels.as_grid(w * np.exp(log_density))


def _range_cdf(w: float, k: int) -> float:
    """P(range of k independent standard normals <= w)."""
    if w <= 0.0:
        return 0.0
    z, wphi, big_phi = _inner_grid()
    return k * _kernels.range_cdf_inner(w, k - 1, z, wphi, big_phi)


def q_survival(q: float, k: int, nu: int) -> float:
    """Upper-tail probability of the studentized range distribution."""
    if k < 2:
        raise InvalidConfig(f"q_survival needs k >= 2, got {k}")
    if nu < 1:
        raise InvalidConfig(f"q_survival needs nu >= 1, got {nu}")
    if q <= 0.0:
        return 1.0
    s_nodes, weighted = _outer_grid(nu)
    cdf = math.fsum(
        weighted[j] * _range_cdf(q * s_nodes[j], k)
        for j in range(len(s_nodes))
    )
    return min(1.0, max(0.0, 1.0 - cdf))


def q_critical(alpha: float, k: int, nu: int) -> float:
    """Inverse of q_survival in q, by bisection to 1e-6."""
    if not 0.0 < alpha < 1.0:
        raise InvalidConfig(f"alpha must lie in (0,1), got {alpha}")
    return _q_critical_cached(float(alpha), int(k), int(nu))


@lru_cache(maxsize=256)
def _q_critical_cached(alpha: float, k: int, nu: int) -> float:
    lo = 0.0
    hi = 8.0
    while q_survival(hi, k, nu) > alpha:
        hi *= 2.0
        if hi > 1024.0:
            raise DegenerateData(
                f"q_critical failed to bracket alpha={alpha} (k={k}, nu={nu})"
            )
    while hi - lo > 1e-6:
        mid = (lo + hi) / 2.0
        if q_survival(mid, k, nu) > alpha:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2.0


def tukey_hsd(data: GroupedScores, alpha: float = 0.05) -> list[TukeyRow]:
    """All-pairs Tukey-Kramer comparisons at family-wise level alpha.

    Groups are ordered lexicographically by label; for a pair
    (group1, group2) in that order, mean_diff = mean(group2) -
    mean(group1). The Kramer standard error
    sqrt(MSE * (1/n_i + 1/n_j) / 2) handles unequal group sizes.
    """
    _validate_groups(data)
    if not 0.0 < alpha < 1.0:
        raise InvalidConfig(f"alpha must lie in (0,1), got {alpha}")
    anova = one_way_anova(data)
    if anova.ss_within == 0.0:
        raise DegenerateData("zero within-group variance; Tukey undefined")
    mse = anova.ss_within / anova.df_within
    k = len(data.groups)
    by_label = {label: values for label, values in data.groups}
    if len(by_label) != k:
        raise DegenerateData("group labels must be unique")
    labels = sorted(by_label)
    crit = q_critical(alpha, k, anova.df_within)
    rows: list[TukeyRow] = []
    for g1, g2 in combinations(labels, 2):
        v1 = by_label[g1]
        v2 = by_label[g2]
        mean1 = math.fsum(v1) / len(v1)
        mean2 = math.fsum(v2) / len(v2)
        diff = mean2 - mean1
        se = math.sqrt(mse * (1.0 / len(v1) + 1.0 / len(v2)) / 2.0)
        q_stat = abs(diff) / se
        p_adj = q_survival(q_stat, k, anova.df_within)
        half_width = crit * se
        rows.append(
            TukeyRow(
                group1=g1,
                group2=g2,
                mean_diff=diff,
                p_adj=p_adj,
                lower=diff - half_width,
                upper=diff + half_width,
                reject=p_adj < alpha,
            )
        )
    return rows
