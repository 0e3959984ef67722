"""Scikit-learn style estimator facade over the Gibbs samplers.

These wrappers give the model a familiar ``fit`` / ``get_params`` surface
(useful in pipelines and grid searches); the underlying chain objects stay
available for everything the facade does not expose. The ``X`` argument of
``fit`` is a :class:`~famlvm.dataset.LongitudinalFamilyDataset`.
"""

import numpy as np
from sklearn.base import BaseEstimator

from .dataset import impute_missing
from .diagnostics import ess, hpdi
from .params import ParameterSet, PriorConfig
from .rng import RngHandle
from .sampler import SamplerConfig, run_chain
from .selection import (fdr_select, posterior_inclusion_probability,
                        select_phenotypes)


class LatentVariableGibbs(BaseEstimator):
    """Posterior sampler for the two-part latent variable model.

    Parameters mirror :class:`~famlvm.sampler.SamplerConfig` plus the prior
    degrees of freedom. After ``fit``:

    * ``chain_`` -- the raw :class:`~famlvm.sampler.ChainOutput`,
    * ``params_`` -- posterior-mean :class:`~famlvm.params.ParameterSet`,
    * ``summary_`` -- per-quantity dict of mean, sd, 95% HPD interval, ESS.
    """

    def __init__(self, scheme="PX2_HC", iterations=25000, burn_in=5000,
                 thin=1, seed=0, stream=0, independence_mode=False,
                 spike_slab=False, v1=10.0, v2=10.0):
        self.scheme = scheme
        self.iterations = iterations
        self.burn_in = burn_in
        self.thin = thin
        self.seed = seed
        self.stream = stream
        self.independence_mode = independence_mode
        self.spike_slab = spike_slab
        self.v1 = v1
        self.v2 = v2

    def _priors(self):
        return PriorConfig(v1=self.v1, v2=self.v2,
                           spike_slab_enabled=self.spike_slab)

    def fit(self, X, y=None):
        d = impute_missing(X)
        cfg = SamplerConfig(scheme=self.scheme, iterations=self.iterations,
                            burn_in=self.burn_in, thin=self.thin,
                            independence_mode=self.independence_mode)
        rng = RngHandle(self.seed, self.stream)
        self.chain_ = run_chain(d, self._priors(), cfg, rng)
        self.params_ = self._posterior_mean_params(d)
        self.summary_ = self._summaries()
        return self

    def _posterior_mean_params(self, d):
        mean = self.chain_.posterior_mean()
        j, j1 = d.n_phenotypes, d.n_continuous
        p1, p2 = d.p1, d.p2
        q1 = 0 if self.independence_mode else d.q1
        q2 = d.q2

        def sym(prefix, k):
            m = np.zeros((k, k))
            for r in range(k):
                for c in range(r, k):
                    m[r, c] = m[c, r] = mean[f"{prefix}_{r + 1}_{c + 1}"]
            return m

        return ParameterSet(
            beta0=np.array([mean[f"beta0_{i + 1}"] for i in range(j)]),
            beta=np.array([[mean[f"beta_{i + 1}_{k + 1}"] for k in range(p1)]
                           for i in range(j)]).reshape(j, p1),
            alpha=np.array([mean[f"alpha_{k + 1}"] for k in range(p2)]),
            lam=np.array([mean[f"lambda_{i + 1}"] for i in range(j)]),
            tau2=np.array([mean[f"tau2_{i + 1}"] for i in range(j)]),
            sigma2=np.array([mean[f"sigma2_{i + 1}"] for i in range(j1)]),
            sigma_a=sym("SigmaA", q1), sigma_d=sym("SigmaD", q2))

    def _summaries(self):
        out = {}
        for k, name in enumerate(self.chain_.names):
            col = self.chain_.draws[:, k]
            entry = {"mean": float(col.mean()),
                     "sd": float(col.std(ddof=1)) if len(col) > 1 else 0.0}
            if np.ptp(col) > 0:
                entry["hpdi95"] = hpdi(col, 0.95)
                entry["ess"] = ess(col)
            out[name] = entry
        return out


class PhenotypeSelector(BaseEstimator):
    """Spike-and-slab phenotype selection with a sklearn-style interface.

    After ``fit``: ``probabilities_`` holds the posterior inclusion
    probability per phenotype and ``support_`` the selected mask (PIP
    threshold, or the Bayesian FDR rule when ``fdr`` is set).
    ``transform`` keeps only the selected phenotype columns of a phenotype
    matrix with one column per phenotype.
    """

    def __init__(self, threshold=0.5, fdr=None, scheme="PX2_HC",
                 iterations=25000, burn_in=5000, thin=1, seed=0, stream=0,
                 slab_a=1.0, slab_b=1.0):
        self.threshold = threshold
        self.fdr = fdr
        self.scheme = scheme
        self.iterations = iterations
        self.burn_in = burn_in
        self.thin = thin
        self.seed = seed
        self.stream = stream
        self.slab_a = slab_a
        self.slab_b = slab_b

    def fit(self, X, y=None):
        d = impute_missing(X)
        priors = PriorConfig(spike_slab_enabled=True,
                             spike_slab_a=self.slab_a,
                             spike_slab_b=self.slab_b)
        cfg = SamplerConfig(scheme=self.scheme, iterations=self.iterations,
                            burn_in=self.burn_in, thin=self.thin)
        self.chain_ = run_chain(d, priors, cfg,
                                RngHandle(self.seed, self.stream))
        self.probabilities_ = posterior_inclusion_probability(self.chain_)
        if self.fdr is not None:
            self.support_, self.realized_fdr_ = fdr_select(
                self.probabilities_, self.fdr)
        else:
            self.support_ = select_phenotypes(self.probabilities_,
                                              self.threshold)
        return self

    def transform(self, Y):
        Y = np.asarray(Y)
        if Y.ndim != 2 or Y.shape[1] != len(self.support_):
            raise ValueError("expected one column per phenotype")
        return Y[:, self.support_]
