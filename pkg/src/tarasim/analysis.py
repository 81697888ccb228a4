"""Throughput statistics: CCDFs, CCDF percentiles, 99% CIs and per-seed gains."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats


@dataclass(frozen=True)
class Ccdf:
    """Empirical CCDF: ``values[i]`` is exceeded by a fraction ``probs[i]`` of samples."""

    samples: np.ndarray  # sorted
    values: np.ndarray  # distinct sorted values
    probs: np.ndarray

    def __call__(self, x):
        """Fraction of samples strictly greater than ``x``."""
        n = self.samples.size
        return (n - np.searchsorted(self.samples, x, side="right")) / n

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["value", "ccdf"])
        for v, p in zip(self.values, self.probs):
            w.writerow([f"{v:.9g}", f"{p:.9g}"])
        return buf.getvalue()


def ccdf(samples):
    x = np.sort(np.asarray(samples, dtype=np.float64).ravel())
    if x.size == 0:
        raise ValueError("ccdf of empty input")
    values = np.unique(x)
    probs = (x.size - np.searchsorted(x, values, side="right")) / x.size
    return Ccdf(x, values, probs)


def ccdf_percentile(c, q):
    """Throughput value exceeded ``q`` percent of the time.

    The step CCDF is interpolated linearly between sorted samples, with the
    smallest sample at 1 and the largest at 0. This is the classical
    linearly interpolated quantile at level ``1 - q/100``.
    """
    if not 0 < q < 100:
        raise ValueError("q must lie strictly between 0 and 100")
    if c.samples.size == 1:
        return float(c.samples[0])
    return float(np.quantile(c.samples, 1.0 - q / 100.0))


def mean_ci99(per_seed_means):
    """Sample mean and Student-t 99% half-width."""
    x = np.asarray(per_seed_means, dtype=np.float64)
    n = x.size
    if n < 2:
        raise ValueError("need at least two values for a confidence interval")
    mean = float(x.mean())
    sd = float(x.std(ddof=1))
    half = float(stats.t.ppf(0.995, n - 1)) * sd / math.sqrt(n)
    return mean, half


@dataclass(frozen=True)
class GainRecord:
    seed: int
    link: str
    gain_vs_baseline: float  # percent


@dataclass(frozen=True)
class GainSummary:
    records: tuple
    excluded: int  # baseline mean of zero

    @property
    def values(self):
        return np.array([r.gain_vs_baseline for r in self.records])

    @property
    def positive_fraction(self):
        v = self.values
        return float((v > 0).mean()) if v.size else float("nan")

    @property
    def mean_gain(self):
        v = self.values
        return float(v.mean()) if v.size else float("nan")

    def ccdf(self):
        return ccdf(self.values)


def percent_gain(value, baseline):
    return 100.0 * (value - baseline) / baseline


def gains(tara, baseline):
    """Per-(seed, link) percentage gain of ``tara`` over ``baseline``.

    Both arguments map ``(seed, link)`` to a mean throughput.
    """
    if set(tara) != set(baseline):
        raise ValueError("gains need identical (seed, link) keys on both sides")
    records, excluded = [], 0
    for key in sorted(tara):
        base = baseline[key]
        if base <= 0:
            excluded += 1
            continue
        seed, link = key
        records.append(GainRecord(seed, link, percent_gain(tara[key], base)))
    return GainSummary(tuple(records), excluded)


def percentile_table(pooled, qs=(30, 50, 70)):
    """``{algorithm: {q: value}}`` from pooled per-second samples."""
    return {a: {q: ccdf_percentile(ccdf(x), q) for q in qs} for a, x in pooled.items()}


def throughput_distance_bins(throughput, distance, width=50.0, min_count=1):
    """Mean throughput per distance bin; returns ``(bin_lo, mean, count)`` arrays."""
    t = np.asarray(throughput, dtype=np.float64).ravel()
    d = np.asarray(distance, dtype=np.float64).ravel()
    idx = np.floor(d / width).astype(int)
    lo, means, counts = [], [], []
    for b in np.unique(idx):
        m = idx == b
        if m.sum() >= min_count:
            lo.append(b * width)
            means.append(t[m].mean())
            counts.append(int(m.sum()))
    return np.array(lo), np.array(means), np.array(counts)
