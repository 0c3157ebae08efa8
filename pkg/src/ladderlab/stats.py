"""Shared statistics conventions.

All moments are population (biased) moments, kurtosis is excess kurtosis
(normal -> 0), and percentiles use linear interpolation.  Zero-variance
series get skewness/kurtosis of 0 so constant inputs stay finite.
"""

import numpy as np

_VAR_EPS = 1e-12


def pop_std(x):
    return float(np.std(np.asarray(x, dtype=np.float64)))


def skewness(x):
    x = np.asarray(x, dtype=np.float64)
    m = x.mean()
    m2 = np.mean((x - m) ** 2)
    if m2 <= _VAR_EPS:
        return 0.0
    m3 = np.mean((x - m) ** 3)
    return float(m3 / m2**1.5)


def excess_kurtosis(x):
    x = np.asarray(x, dtype=np.float64)
    m = x.mean()
    m2 = np.mean((x - m) ** 2)
    if m2 <= _VAR_EPS:
        return 0.0
    m4 = np.mean((x - m) ** 4)
    return float(m4 / m2**2 - 3.0)


def histogram_entropy(x, bins, value_range):
    """Shannon entropy (base 2) of a fixed-bin histogram of x."""
    counts, _ = np.histogram(np.asarray(x, dtype=np.float64), bins=bins, range=value_range)
    p = counts / counts.sum()
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p)))


def ten_stats(x):
    """(mean, std, min, max, p25, p50, p75, iqr, skw, kur) of a series."""
    x = np.asarray(x, dtype=np.float64)
    p25, p50, p75 = np.percentile(x, [25, 50, 75])
    return (
        float(x.mean()),
        pop_std(x),
        float(x.min()),
        float(x.max()),
        float(p25),
        float(p50),
        float(p75),
        float(p75 - p25),
        skewness(x),
        excess_kurtosis(x),
    )


def pearson(a, b):
    """Pearson correlation; raises on zero variance (callers guard)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    da = a - a.mean()
    db = b - b.mean()
    denom = np.sqrt(np.sum(da * da) * np.sum(db * db))
    return float(np.sum(da * db) / denom)
