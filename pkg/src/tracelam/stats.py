"""Empirical distributions and the goodness-of-fit tests used by the acceptance suite."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Hashable, Iterable, Mapping

import numpy as np
from scipy import stats as _sps

__all__ = [
    "DomainMismatch",
    "KindMismatch",
    "TAIL",
    "EmpiricalDist",
    "chi_square_discrete",
    "chi_square_homogeneity",
    "ks_two_sample",
    "tv_binned",
    "effective_sample_size",
    "mc_standard_error",
    "summary",
]


class DomainMismatch(ValueError):
    pass


class KindMismatch(TypeError):
    pass


class _Tail:
    """Key for the expected mass of every value not listed explicitly."""

    def __repr__(self) -> str:
        return "TAIL"


TAIL = _Tail()


@dataclass(frozen=True)
class EmpiricalDist:
    kind: str  # "discrete" or "continuous"
    n: int
    counts: Mapping[Hashable, int] | None = None
    samples: np.ndarray | None = None

    @classmethod
    def discrete(cls, values: Iterable[Hashable]) -> "EmpiricalDist":
        c = Counter(values)
        return cls("discrete", sum(c.values()), counts=dict(c))

    @classmethod
    def continuous(cls, values: Iterable[float]) -> "EmpiricalDist":
        arr = np.sort(np.asarray(list(values), dtype=float))
        if arr.size and not np.all(np.isfinite(arr)):
            raise ValueError("continuous samples must be finite")
        arr.setflags(write=False)
        return cls("continuous", int(arr.size), samples=arr)

    def probabilities(self) -> dict:
        if self.kind != "discrete":
            raise KindMismatch("probabilities() needs a discrete distribution")
        return {k: v / self.n for k, v in self.counts.items()}


def _as_discrete(x) -> EmpiricalDist:
    if isinstance(x, EmpiricalDist):
        if x.kind != "discrete":
            raise KindMismatch("expected a discrete distribution")
        return x
    return EmpiricalDist.discrete(x)


def _as_continuous(x) -> EmpiricalDist:
    if isinstance(x, EmpiricalDist):
        if x.kind != "continuous":
            raise KindMismatch("expected a continuous distribution")
        return x
    return EmpiricalDist.continuous(x)


def chi_square_discrete(observed, expected: Mapping, ess: float | None = None, min_expected: float = 5.0):
    """Pearson goodness of fit of ``observed`` against the probabilities ``expected``.

    Categories whose expected count is below ``min_expected`` are pooled into
    one bucket together with the ``TAIL`` key, if present. Observed values with
    no expected mass raise :class:`DomainMismatch` unless a ``TAIL`` is given.
    When ``ess`` is given (autocorrelated samples) the statistic is scaled by
    ``ess / n`` before computing the p-value.

    Returns ``(statistic, p_value)``.
    """
    obs = _as_discrete(observed)
    total = math.fsum(expected.values())
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"expected probabilities sum to {total}, not 1")
    n = obs.n
    if n == 0:
        raise ValueError("no observations")
    has_tail = TAIL in expected
    named = {k: p for k, p in expected.items() if k is not TAIL}
    o_tail = 0
    for k, c in obs.counts.items():
        if k not in named or named[k] <= 0.0:
            if not has_tail:
                raise DomainMismatch(f"observed value {k!r} has no expected probability")
            o_tail += c
    cells = []  # (expected count, observed count)
    pool_e = n * expected.get(TAIL, 0.0)
    pool_o = o_tail
    for k, p in named.items():
        if p <= 0.0:
            continue
        e, o = n * p, obs.counts.get(k, 0)
        if e < min_expected:
            pool_e += e
            pool_o += o
        else:
            cells.append((e, o))
    if pool_e > 0.0 or pool_o > 0:
        cells.sort()
        while pool_e < min_expected and cells:
            e, o = cells.pop(0)
            pool_e += e
            pool_o += o
        cells.append((pool_e, pool_o))
    if len(cells) < 2:
        return 0.0, 1.0
    e = np.array([c[0] for c in cells])
    o = np.array([c[1] for c in cells], dtype=float)
    if np.any(e == 0.0):
        raise DomainMismatch("observations in a category with zero expected mass")
    stat = float(np.sum((o - e) ** 2 / e))
    if ess is not None:
        stat *= min(1.0, float(ess) / n)
    return stat, float(_sps.chi2.sf(stat, len(cells) - 1))


def chi_square_homogeneity(a, b, min_expected: float = 5.0):
    """Two-sample chi-square test that two discrete samples share one law.

    Categories with pooled expected count below ``min_expected`` in either
    row are merged. Returns ``(statistic, p_value)``.
    """
    da, db = _as_discrete(a), _as_discrete(b)
    keys = sorted(set(da.counts) | set(db.counts), key=lambda k: -(da.counts.get(k, 0) + db.counts.get(k, 0)))
    frac = min(da.n, db.n) / (da.n + db.n)
    rows: list[list[int]] = []
    pool = [0, 0]
    for k in keys:
        ca, cb = da.counts.get(k, 0), db.counts.get(k, 0)
        if (ca + cb) * frac < min_expected:
            pool[0] += ca
            pool[1] += cb
        else:
            rows.append([ca, cb])
    if pool[0] + pool[1]:
        rows.append(pool)
    if len(rows) < 2:
        return 0.0, 1.0
    stat, p, _, _ = _sps.chi2_contingency(np.array(rows).T, correction=False)
    return float(stat), float(p)


def ks_two_sample(a, b):
    """Two-sample Kolmogorov-Smirnov test with the asymptotic p-value."""
    da, db = _as_continuous(a), _as_continuous(b)
    if da.n < 30 or db.n < 30:
        raise ValueError("the asymptotic KS test needs at least 30 samples on each side")
    res = _sps.ks_2samp(da.samples, db.samples, method="asymp")
    return float(res.statistic), float(res.pvalue)


def tv_binned(a, b, bins=50) -> float:
    """Half the L1 distance between binned empirical laws.

    Discrete inputs use their categories. Continuous inputs use ``bins``
    equal-count bins of the pooled sample (or explicit interior edges if
    ``bins`` is a sequence).
    """
    if isinstance(a, EmpiricalDist) and a.kind == "discrete" or isinstance(b, EmpiricalDist) and b.kind == "discrete":
        da, db = _as_discrete(a), _as_discrete(b)
        keys = set(da.counts) | set(db.counts)
        return 0.5 * math.fsum(abs(da.counts.get(k, 0) / da.n - db.counts.get(k, 0) / db.n) for k in keys)
    da, db = _as_continuous(a), _as_continuous(b)
    if np.ndim(bins) == 0:
        pooled = np.sort(np.concatenate([da.samples, db.samples]))
        m = len(pooled)
        idx = [round(i * m / int(bins)) for i in range(1, int(bins))]
        edges = np.unique(pooled[[i for i in idx if 0 < i < m]])
    else:
        edges = np.asarray(bins, dtype=float)
    k = len(edges) + 1
    ha = np.bincount(np.searchsorted(edges, da.samples, side="right"), minlength=k) / da.n
    hb = np.bincount(np.searchsorted(edges, db.samples, side="right"), minlength=k) / db.n
    return float(min(1.0, 0.5 * np.abs(ha - hb).sum()))


def effective_sample_size(x) -> float:
    """Effective sample size via Geyer's initial positive sequence estimator."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 4:
        return float(n)
    x = x - x.mean()
    var = float(np.dot(x, x)) / n
    if var == 0.0:
        return float(n)
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, size)
    acov = np.fft.irfft(f * np.conjugate(f), size)[:n] / n
    rho = acov / var
    tau = -1.0
    for t in range(0, n - 1, 2):
        pair = rho[t] + rho[t + 1]
        if pair <= 0.0:
            break
        tau += 2.0 * pair
    tau = max(tau, 1.0 / n)
    return float(min(n, n / tau))


def mc_standard_error(x) -> float:
    """Standard error of the sample mean, accounting for autocorrelation."""
    x = np.asarray(x, dtype=float)
    return float(np.std(x, ddof=1) / math.sqrt(effective_sample_size(x)))


def summary(values, bins: int = 20) -> dict:
    """Summary of numeric samples: moments, quantiles and a histogram."""
    arr = np.asarray([v for v in values if isinstance(v, (int, float))], dtype=float)
    arr = arr[np.isfinite(arr)]
    out: dict = {"n": int(arr.size)}
    if arr.size == 0:
        return out
    qs = [0.025, 0.25, 0.5, 0.75, 0.975]
    out["mean"] = float(arr.mean())
    out["variance"] = float(arr.var(ddof=1)) if arr.size > 1 else 0.0
    out["quantiles"] = {str(q): float(v) for q, v in zip(qs, np.quantile(arr, qs))}
    if np.all(arr == np.round(arr)) and len(np.unique(arr)) <= 100:
        vals, counts = np.unique(arr, return_counts=True)
        out["histogram"] = {"values": [float(v) for v in vals], "counts": [int(c) for c in counts]}
    else:
        counts, edges = np.histogram(arr, bins=bins)
        out["histogram"] = {"edges": [float(e) for e in edges], "counts": [int(c) for c in counts]}
    out["ess"] = effective_sample_size(arr)
    return out
