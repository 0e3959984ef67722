"""Phenotype selection and path-sampling Bayes factors.

Selection uses the spike-and-slab inclusion indicators: the posterior
inclusion probability (PIP) of phenotype j is the retained-draw frequency of
a nonzero loading. Phenotypes are flagged either by thresholding PIPs or by
the Bayesian false-discovery-rate rule (select the largest set whose average
exclusion probability stays below the target rate).

Bayes factors compare the full model (M1) against a restriction (M0) that
zeroes one loading or a group of latent-equation coefficients. A path of
models indexed by g in [0, 1] connects M0 (g = 0) to M1 (g = 1) by scaling
the targeted quantity; the log Bayes factor is the path integral of the
expected derivative of the complete-data log likelihood in g, estimated on
an uneven grid (dense near both endpoints) by the trapezoid rule. Chains at
adjacent grid points are warm-started from each other, from g = 1 downward.
"""

from dataclasses import dataclass, replace

import numpy as np

from .diagnostics import batch_means_se
from .rng import RngHandle, as_generator
from .sampler import SamplerConfig, run_chain


# ---------------------------------------------------------------------------
# spike-and-slab selection
# ---------------------------------------------------------------------------

def posterior_inclusion_probability(chain):
    """PIP per phenotype: mean of the inclusion-indicator columns."""
    cols = [n for n in chain.names if n.startswith("omega_")]
    cols.sort(key=lambda n: int(n.split("_")[1]))
    return np.array([chain.column(n).mean() for n in cols])


def select_phenotypes(pip, threshold=0.5):
    """Flag phenotypes whose PIP exceeds a fixed threshold."""
    pip = np.asarray(pip, dtype=float)
    if np.any((pip < 0) | (pip > 1)):
        raise ValueError("PIPs must lie in [0, 1]")
    return pip > threshold


def fdr_select(pip, rate=0.05):
    """Bayesian false-discovery-rate selection.

    Sort PIPs descending and take the largest prefix whose mean exclusion
    probability (1 - PIP) is at most ``rate``. Returns (mask, realized)
    where ``realized`` is the achieved average exclusion probability of the
    selected set (0.0 when nothing is selected).
    """
    pip = np.asarray(pip, dtype=float)
    if np.any((pip < 0) | (pip > 1)):
        raise ValueError("PIPs must lie in [0, 1]")
    order = np.argsort(-pip, kind="stable")
    excl = 1.0 - pip[order]
    running = np.cumsum(excl) / np.arange(1, len(pip) + 1)
    keep = np.flatnonzero(running <= rate)
    mask = np.zeros(len(pip), dtype=bool)
    if len(keep) == 0:
        return mask, 0.0
    k = keep.max() + 1
    mask[order[:k]] = True
    return mask, float(running[k - 1])


# ---------------------------------------------------------------------------
# path-sampling Bayes factors
# ---------------------------------------------------------------------------

def build_grid(n_low=15, n_mid=20, n_high=15):
    """Uneven grid on [0, 1], dense within [0, 0.1] and [0.9, 1].

    The integrand changes fastest near the endpoints, so a third of the
    points sit in each 10%-wide end band.
    """
    low = np.linspace(0.0, 0.1, n_low, endpoint=False)
    mid = np.linspace(0.1, 0.9, n_mid, endpoint=False)
    high = np.linspace(0.9, 1.0, n_high)
    return np.concatenate([low, mid, high])


@dataclass
class PathPlan:
    """Per-grid-point MCMC budget for a Bayes factor run."""

    grid: np.ndarray = None
    burn_in: int = 200
    keep: int = 300
    thin: int = 1

    def __post_init__(self):
        if self.grid is None:
            self.grid = build_grid()
        self.grid = np.asarray(self.grid, dtype=float)
        if len(self.grid) < 2 or np.any(np.diff(self.grid) <= 0):
            raise ValueError("grid must be strictly increasing, length >= 2")
        if not (np.isclose(self.grid[0], 0.0) and np.isclose(self.grid[-1], 1.0)):
            raise ValueError("grid must span [0, 1]")
        if self.burn_in < 1 or self.keep < 1 or self.thin < 1:
            raise ValueError("burn_in, keep and thin must be positive")


@dataclass
class BfResult:
    log_bf: float
    se: float
    grid: np.ndarray
    ubar: np.ndarray            # mean integrand per grid point
    ubar_se: np.ndarray
    target: tuple
    scheme: str

    def supports_alternative(self, cutoff=1.0):
        """True when the evidence clears the reporting cutoff for M1."""
        return self.log_bf > cutoff


def path_integral(grid, ubar):
    """Trapezoid-rule path integral and the per-point quadrature weights.

    Returns (integral, weights) with integral = sum(weights * ubar); linear
    integrands are integrated exactly on any grid.
    """
    grid = np.asarray(grid, dtype=float)
    ubar = np.asarray(ubar, dtype=float)
    steps = np.diff(grid)
    w = np.empty(len(grid))
    w[0] = steps[0] / 2.0
    w[-1] = steps[-1] / 2.0
    w[1:-1] = (grid[2:] - grid[:-2]) / 2.0
    return float(w @ ubar), w


def _grid_rng(rng, s):
    if isinstance(rng, RngHandle):
        return rng.spawn(rng.stream + s)
    return as_generator(rng)


def log_bayes_factor(d, priors, target, rng, scheme="PX_HC", plan=None):
    """Path-sampling log Bayes factor for one loading or covariate group.

    ``target`` is ("loading", j) with a zero-based phenotype index, or
    ("covariate", indices) with zero-based latent-equation covariate columns.
    Spike-and-slab is always disabled here: the mixture prior would make the
    g = 1 endpoint a different model than the one under test.
    """
    plan = plan or PathPlan()
    kind, what = target
    if kind == "loading":
        key = "loading_target"
        tgt = lambda g: (int(what), g)
    elif kind == "covariate":
        idx = tuple(np.atleast_1d(what).astype(int))
        key = "covariate_target"
        tgt = lambda g: (idx, g)
    else:
        raise ValueError(f"unknown target kind {kind!r}")
    priors = replace(priors, spike_slab_enabled=False)

    grid = plan.grid
    ubar = np.empty(len(grid))
    ubar_se = np.empty(len(grid))
    state = None
    # walk g = 1 down to 0, warm-starting each chain from its neighbor
    for s in range(len(grid) - 1, -1, -1):
        cfg = SamplerConfig(
            scheme=scheme, burn_in=plan.burn_in,
            iterations=plan.burn_in + plan.keep * plan.thin, thin=plan.thin,
            init_state=state, **{key: tgt(grid[s])})
        out = run_chain(d, priors, cfg, _grid_rng(rng, s))
        state = out.final_state
        ubar[s] = out.u_stats.mean()
        ubar_se[s] = batch_means_se(out.u_stats)

    log_bf, w = path_integral(grid, ubar)
    se = float(np.sqrt(w ** 2 @ ubar_se ** 2))
    return BfResult(log_bf=log_bf, se=se, grid=grid, ubar=ubar,
                    ubar_se=ubar_se, target=target, scheme=scheme)


def df_sensitivity(d, priors, target, rng, dfs=(3, 10, 40, 90),
                   scheme="PX_HC", plan=None):
    """Recompute a Bayes factor under several folded-t prior degrees of
    freedom for the targeted scale parameters. Returns {df: BfResult}."""
    out = {}
    for k, df in enumerate(dfs):
        p = replace(priors, v1=float(df), v2=float(df))
        r = (rng.spawn(rng.stream + (k + 1) * 1000)
             if isinstance(rng, RngHandle) else rng)
        out[df] = log_bayes_factor(d, p, target, r, scheme=scheme, plan=plan)
    return out
