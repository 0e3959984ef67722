"""Random variate generation and density utilities used by the samplers.

Only the families the Gibbs sweeps need are provided. All samplers are pure
functions of their parameters and the supplied random stream; replaying a
stream reproduces draws bit-exactly.
"""

import numpy as np
from scipy.special import ndtr, ndtri

from .exceptions import DfTooSmall, NotPositiveDefinite
from .rng import as_generator

_CHOL_TOL = 1e-10


def _cholesky(cov):
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise NotPositiveDefinite("covariance must be a square matrix")
    if np.any(np.diag(cov) <= _CHOL_TOL):
        raise NotPositiveDefinite("covariance diagonal not positive")
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from exc


def sample_mvn(mean, cov, rng):
    """Draw from MVN(mean, cov). Raises NotPositiveDefinite for bad cov."""
    gen = as_generator(rng)
    mean = np.asarray(mean, dtype=float)
    chol = _cholesky(cov)
    return mean + chol @ gen.standard_normal(mean.shape[0])


def sample_truncated_normal(mu, sigma, side, rng, size=None):
    """Draw from N(mu, sigma^2) truncated to a half line.

    side = "positive" keeps (0, inf), "negative" keeps (-inf, 0], "none"
    applies no truncation. Uses the inverse-CDF in the survival/tail
    parameterization, which stays finite and in-support even when |mu/sigma|
    is far beyond 8 (the tail mass is multiplied, never subtracted, so no
    catastrophic cancellation occurs).

    mu may be an array; sigma broadcasts against it.
    """
    gen = as_generator(rng)
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma <= 0):
        raise ValueError("sigma must be positive")
    if size is None:
        size = np.broadcast(mu, sigma).shape
    u = gen.random(size)
    if side == "none":
        return mu + sigma * ndtri(u) if size else float(mu + sigma * ndtri(u))
    # standardized truncation point: keep t > a (positive) or t <= a (negative)
    if side == "positive":
        a = np.asarray(-mu / sigma, dtype=float)
        # P(T > a) = ndtr(-a); solve S(t) = u * S(a) for t
        tail = np.maximum(ndtr(-a), 5e-324)
        t = -ndtri(u * tail)
        # past a ~ 37 the tail mass underflows double precision entirely;
        # there the conditional law is an exponential boundary layer,
        # t ~= a + Exp(1)/a, with O(1/a^2) relative error
        far = a >= 36.0
        if np.any(far):
            e = -np.log1p(-u)
            t = np.where(far, a + e / np.maximum(a, 1.0), t)
        out = mu + sigma * t
        # guard against u rounding to 0/1 in extreme tails
        return np.maximum(out, np.finfo(float).tiny)
    if side == "negative":
        a = np.asarray(-mu / sigma, dtype=float)
        tail = np.maximum(ndtr(a), 5e-324)
        t = ndtri(u * tail)
        far = a <= -36.0
        if np.any(far):
            e = -np.log1p(-u)
            t = np.where(far, a - e / np.maximum(-a, 1.0), t)
        out = mu + sigma * t
        return np.minimum(out, 0.0)
    raise ValueError(f"unknown truncation side {side!r}")


def sample_inv_gamma(shape, rate, rng, size=None):
    """Inverse-gamma draw: reciprocal of Gamma(shape, rate)."""
    gen = as_generator(rng)
    if np.any(np.asarray(shape) <= 0) or np.any(np.asarray(rate) <= 0):
        raise ValueError("shape and rate must be positive")
    return np.asarray(rate) / gen.standard_gamma(shape, size=size)


def sample_inv_wishart(df, scale, rng):
    """Inverse-Wishart draw with scale-matrix parameterization.

    Mean is scale / (df - dim - 1) when df > dim + 1. Uses the Bartlett
    decomposition of the associated Wishart on the inverted scale.
    """
    gen = as_generator(rng)
    scale = np.atleast_2d(np.asarray(scale, dtype=float))
    dim = scale.shape[0]
    df = float(df)
    if df <= dim - 1:
        raise DfTooSmall(f"df={df} must exceed dim-1={dim - 1}")
    chol_scale = _cholesky(scale)
    # W ~ Wishart(df, scale^-1)  =>  W^-1 ~ Inv-Wishart(df, scale)
    inv_chol = np.linalg.inv(chol_scale)  # chol(scale^-1) is inv_chol.T up to form
    a = np.zeros((dim, dim))
    idx = np.tril_indices(dim, -1)
    a[idx] = gen.standard_normal(len(idx[0]))
    a[np.diag_indices(dim)] = np.sqrt(
        2.0 * gen.standard_gamma((df - np.arange(dim)) / 2.0)
    )
    # chol of scale^-1: solve from chol_scale
    l_inv = inv_chol.T @ a  # lower-triangular-ish factor of the Wishart draw
    w = l_inv @ l_inv.T
    draw = np.linalg.inv(w)
    return 0.5 * (draw + draw.T)


def sample_beta(a, b, rng, size=None):
    """Beta(a, b) draw."""
    gen = as_generator(rng)
    if np.any(np.asarray(a) <= 0) or np.any(np.asarray(b) <= 0):
        raise ValueError("a and b must be positive")
    return gen.beta(a, b, size=size)


def normal_cdf(x):
    """Standard normal CDF."""
    return ndtr(x)
