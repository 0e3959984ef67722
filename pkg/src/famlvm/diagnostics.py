"""MCMC output diagnostics: autocorrelation, effective sample size,
highest-density intervals, batch-means standard errors, and replicate-level
frequentist summaries (bias, RMSE, coverage)."""

import numpy as np

from .exceptions import ConstantSeries, SeriesTooShort


def acf(x, max_lag=None):
    """Sample autocorrelation function via FFT.

    Returns lags 0..max_lag (default n - 1). Denominator is the lag-0
    autocovariance, so acf(x)[0] == 1.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    if n < 2:
        raise SeriesTooShort("need at least 2 draws")
    x = x - x.mean()
    var = x @ x / n
    if var == 0:
        raise ConstantSeries("series is constant; autocorrelation undefined")
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, nfft)
    autocov = np.fft.irfft(f * np.conj(f), nfft)[:n] / n
    rho = autocov / autocov[0]
    if max_lag is not None:
        rho = rho[:max_lag + 1]
    return rho


def ess(x):
    """Effective sample size with the initial-positive-sequence truncation.

    Sums consecutive pairs of autocorrelations rho[2k-1] + rho[2k] while the
    pair sums stay positive, then ESS = n / (1 + 2 * sum of included lags).
    Clipped to [1, n].
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    rho = acf(x)
    s = 0.0
    k = 1
    while k + 1 < n:
        pair = rho[k] + rho[k + 1]
        if pair <= 0:
            break
        s += pair
        k += 2
    out = n / (1.0 + 2.0 * s)
    return float(min(max(out, 1.0), n))


def hpdi(x, level=0.95):
    """Shortest interval containing a ``level`` fraction of the draws.

    Scans every contiguous window of ceil(level * n) order statistics and
    returns the narrowest as (low, high).
    """
    x = np.sort(np.asarray(x, dtype=float))
    n = len(x)
    if n < 2:
        raise SeriesTooShort("need at least 2 draws")
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    m = int(np.ceil(level * n))
    m = min(max(m, 1), n)
    if m == n:
        return float(x[0]), float(x[-1])
    widths = x[m:] - x[:n - m]
    k = int(np.argmin(widths))
    return float(x[k]), float(x[k + m])


def batch_means_se(x, n_batches=30):
    """Monte Carlo standard error of the mean by non-overlapping batch means."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    if n < 2 * n_batches:
        n_batches = max(n // 2, 2)
    if n < 4:
        raise SeriesTooShort("need at least 4 draws for a batch-means SE")
    size = n // n_batches
    trimmed = x[: size * n_batches].reshape(n_batches, size)
    means = trimmed.mean(axis=1)
    return float(means.std(ddof=1) / np.sqrt(n_batches))


def summarize_replicates(estimates, truth, intervals=None):
    """Frequentist summaries across simulation replicates.

    ``estimates``: (R,) point estimates of one scalar parameter;
    ``truth``: its generating value; ``intervals``: optional (R, 2) array of
    credible intervals for coverage. Returns a dict with mean, bias, sd,
    rmse and (when intervals are given) coverage.
    """
    est = np.asarray(estimates, dtype=float)
    if est.ndim != 1 or len(est) == 0:
        raise SeriesTooShort("estimates must be a non-empty 1-D array")
    out = {
        "mean": float(est.mean()),
        "bias": float(est.mean() - truth),
        "sd": float(est.std(ddof=1)) if len(est) > 1 else 0.0,
        "rmse": float(np.sqrt(np.mean((est - truth) ** 2))),
        "n": int(len(est)),
    }
    if intervals is not None:
        iv = np.asarray(intervals, dtype=float)
        if iv.shape != (len(est), 2):
            raise ValueError("intervals must be (R, 2)")
        hit = (iv[:, 0] <= truth) & (truth <= iv[:, 1])
        out["coverage"] = float(hit.mean())
    return out
