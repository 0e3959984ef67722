"""Forward simulation of longitudinal family data.

Families are nuclear sibships: two unobserved parents in Hardy-Weinberg
equilibrium transmit alleles to 1-5 observed siblings by Mendelian
segregation, so the simulated genotypes carry realistic within-family
correlation. Continuous covariates have standard normal margins with a
configurable within-family correlation and first-order autoregressive
correlation across time points. Phenotypes are drawn from the two-part
latent variable model given a :class:`~famlvm.params.ParameterSet`.

Ready-made scenario builders reproduce the designs used by the acceptance
suite; ``simulate_scenario`` is the one-call entry point.
"""

from dataclasses import dataclass, field

import numpy as np

from .dataset import LongitudinalFamilyDataset
from .distributions import sample_mvn
from .exceptions import DimensionMismatch
from .params import ParameterSet
from .rng import as_generator

SIBSHIP_PROBS = (0.3, 0.4, 0.2, 0.07, 0.03)


@dataclass
class SimDesign:
    """Population-level knobs of the simulator."""

    n_families: int = 500
    t_points: int = 5
    sibship_probs: tuple = SIBSHIP_PROBS
    maf: float = 0.1
    family_corr: float = 0.3
    ar_corr: float = 0.3

    def validate(self):
        if self.n_families < 1 or self.t_points < 1:
            raise ValueError("need n_families >= 1 and t_points >= 1")
        probs = np.asarray(self.sibship_probs, dtype=float)
        if probs.ndim != 1 or np.any(probs < 0) or not np.isclose(probs.sum(), 1.0):
            raise ValueError("sibship_probs must be a probability vector")
        if not 0 < self.maf < 1:
            raise ValueError("maf must lie in (0, 1)")
        for r in (self.family_corr, self.ar_corr):
            if not 0 <= r < 1:
                raise ValueError("correlations must lie in [0, 1)")
        return self


@dataclass
class ScenarioSpec:
    """Blueprint of one simulation scenario: covariate blocks plus truth."""

    name: str
    binary: np.ndarray
    truth: ParameterSet
    w_kinds: tuple = ()             # each: "normal"
    x_kinds: tuple = ()             # each: "normal" | "genotype"
    z_kinds: tuple = ()             # each: "one" | "normal"
    q_kinds: tuple = ()             # each: "one" | "normal"


def simulate_pedigree(n_families, rng, sibship_probs=SIBSHIP_PROBS):
    """Sibship sizes and family membership.

    Returns (fam_of_ind, sib_index): zero-based family code and within-family
    sibling number for each simulated individual.
    """
    gen = as_generator(rng)
    probs = np.asarray(sibship_probs, dtype=float)
    sizes = gen.choice(np.arange(1, len(probs) + 1), size=n_families, p=probs)
    fam_of_ind = np.repeat(np.arange(n_families), sizes)
    sib_index = np.concatenate([np.arange(1, s + 1) for s in sizes])
    return fam_of_ind, sib_index


def simulate_genotypes(fam_of_ind, rng, maf=0.1):
    """Minor-allele counts (0/1/2) per individual with familial transmission.

    Each family gets two parents with genotypes drawn under Hardy-Weinberg
    equilibrium at the given minor-allele frequency; every sibling receives
    one allele from each parent (a heterozygous parent transmits the minor
    allele with probability 1/2). Parents are discarded.
    """
    gen = as_generator(rng)
    fam_of_ind = np.asarray(fam_of_ind)
    n_fam = int(fam_of_ind.max()) + 1 if len(fam_of_ind) else 0
    parents = gen.binomial(2, maf, size=(n_fam, 2))
    p = parents[fam_of_ind] / 2.0                 # transmission probabilities
    alleles = gen.random(p.shape) < p
    return alleles.sum(axis=1).astype(float)


def simulate_covariate_panel(fam_of_ind, t_points, rng, family_corr=0.3,
                             ar_corr=0.3):
    """One covariate as an (n_ind, T) panel.

    Margins are N(0, 1); siblings correlate at ``family_corr`` at every time
    point (the shared family factor also drives the autoregressive
    innovations) and the lag-k autocorrelation is ``ar_corr**k``.
    """
    gen = as_generator(rng)
    fam_of_ind = np.asarray(fam_of_ind)
    n_ind = len(fam_of_ind)
    n_fam = int(fam_of_ind.max()) + 1 if n_ind else 0
    fc, rho = family_corr, ar_corr
    sf, se = np.sqrt(fc), np.sqrt(1.0 - fc)
    out = np.empty((n_ind, t_points))
    fam_draw = gen.standard_normal(n_fam)
    out[:, 0] = sf * fam_draw[fam_of_ind] + se * gen.standard_normal(n_ind)
    scale = np.sqrt(1.0 - rho ** 2)
    for t in range(1, t_points):
        fam_draw = gen.standard_normal(n_fam)
        innov = sf * fam_draw[fam_of_ind] + se * gen.standard_normal(n_ind)
        out[:, t] = rho * out[:, t - 1] + scale * innov
    return out


def _covariate_block(kinds, fam_of_ind, design, gen):
    """Stack covariates of the given kinds into an (n_rows, k) matrix."""
    n_ind, t = len(fam_of_ind), design.t_points
    cols = []
    for kind in kinds:
        if kind == "one":
            cols.append(np.ones((n_ind, t)))
        elif kind == "normal":
            cols.append(simulate_covariate_panel(
                fam_of_ind, t, gen, design.family_corr, design.ar_corr))
        elif kind == "genotype":
            g = simulate_genotypes(fam_of_ind, gen, design.maf)
            cols.append(np.repeat(g[:, None], t, axis=1))
        else:
            raise ValueError(f"unknown covariate kind {kind!r}")
    if not cols:
        return np.zeros((n_ind * t, 0))
    return np.stack([c.ravel() for c in cols], axis=1)


def _standardized_normal(gen, n):
    """Standard normal draws rescaled to zero sample mean, unit sample SD.

    Used for the innovations whose variance the model pins at 1 (the latent
    equation residual, and the probit residual of binary phenotypes).
    Without this, the realized scale of these draws leaks into every factor
    loading estimate (the loadings are identified only relative to the
    unit innovation variance) and replicate-to-replicate scale luck of
    order 1/sqrt(2n) dominates the loading RMSE instead of the model
    structure under study.
    """
    e = gen.standard_normal(n)
    if n > 1:
        e = (e - e.mean()) / e.std()
    return e


def simulate_phenotypes(truth, binary, w, x, z, q, fam, ind, rng):
    """Forward-sample phenotypes given designs and row/family/individual maps.

    Rows must be in canonical order with ``fam``/``ind`` zero-based codes.
    Returns (y, u): the phenotype matrix and the latent severity values.
    """
    gen = as_generator(rng)
    truth.validate()
    n = len(fam)
    j = len(binary)
    n_fam = int(fam.max()) + 1 if n else 0
    n_ind = int(ind.max()) + 1 if n else 0
    q1 = truth.sigma_a.shape[0] if truth.sigma_a.size else 0
    q2 = truth.sigma_d.shape[0] if truth.sigma_d.size else 0
    if z.shape[1] != q1 or q.shape[1] != q2:
        raise DimensionMismatch("random-effect design width != covariance dim")

    a = (np.stack([sample_mvn(np.zeros(q1), truth.sigma_a, gen)
                   for _ in range(n_fam)]) if q1 else np.zeros((n_fam, 0)))
    d = (np.stack([sample_mvn(np.zeros(q2), truth.sigma_d, gen)
                   for _ in range(n_ind)]) if q2 else np.zeros((n_ind, 0)))
    za = (z * a[fam]).sum(axis=1) if q1 else 0.0
    qd = (q * d[ind]).sum(axis=1) if q2 else 0.0
    xa = x @ truth.alpha if x.shape[1] else 0.0
    u = xa + za + qd + _standardized_normal(gen, n)

    b = gen.standard_normal((n_ind, j)) * np.sqrt(truth.tau2)[None, :]
    wb = w @ truth.beta.T if w.shape[1] else np.zeros((n, j))
    mean = truth.beta0[None, :] + wb + np.outer(u, truth.lam) + b[ind]
    y = np.empty((n, j))
    for k in range(j):
        if binary[k]:
            y[:, k] = (mean[:, k] + _standardized_normal(gen, n)
                       > 0).astype(float)
        else:
            y[:, k] = mean[:, k] + gen.standard_normal(n) * np.sqrt(
                truth.sigma2[k])
    return y, u


def simulate_from_spec(spec, design, rng):
    """Simulate one dataset from a scenario blueprint.

    Returns (dataset, truth).
    """
    design.validate()
    gen = as_generator(rng)
    fam_of_ind, sib = simulate_pedigree(design.n_families, gen,
                                        design.sibship_probs)
    n_ind, t = len(fam_of_ind), design.t_points
    fam = np.repeat(fam_of_ind, t)
    ind = np.repeat(np.arange(n_ind), t)
    time = np.tile(np.arange(1, t + 1), n_ind)

    w = _covariate_block(spec.w_kinds, fam_of_ind, design, gen)
    x = _covariate_block(spec.x_kinds, fam_of_ind, design, gen)
    z = _covariate_block(spec.z_kinds, fam_of_ind, design, gen)
    q = _covariate_block(spec.q_kinds, fam_of_ind, design, gen)

    y, _u = simulate_phenotypes(spec.truth, spec.binary, w, x, z, q,
                                fam, ind, gen)
    geno = tuple(f"X{k + 1}" for k, kind in enumerate(spec.x_kinds)
                 if kind == "genotype")
    d = LongitudinalFamilyDataset.build(
        family=fam, individual=np.repeat(sib, t), time=time,
        y=y, binary=spec.binary, w=w, x=x, z=z, q=q,
        y_names=tuple(f"Y{k + 1}" for k in range(len(spec.binary))),
        w_names=tuple(f"W{k + 1}" for k in range(w.shape[1])),
        x_names=tuple(f"X{k + 1}" for k in range(x.shape[1])),
        z_names=tuple(f"Z{k + 1}" for k in range(z.shape[1])),
        q_names=tuple(f"Q{k + 1}" for k in range(q.shape[1])),
        genotype_cols=geno)
    return d, spec.truth


# ---------------------------------------------------------------------------
# ready-made scenarios
# ---------------------------------------------------------------------------

def scenario_mixed(n_continuous=3, n_binary=2):
    """Mixed continuous/binary phenotypes, one pleiotropic marker.

    All loadings 1; one direct covariate (effect 1); latent equation has one
    normal covariate and one genotype (effects 1, 1); scalar family and
    subject random intercepts with variances 0.5 and 0.3.
    """
    j = n_continuous + n_binary
    truth = ParameterSet(
        beta0=np.zeros(j), beta=np.ones((j, 1)), alpha=np.array([1.0, 1.0]),
        lam=np.ones(j), tau2=np.full(j, 0.2),
        sigma2=np.full(n_continuous, 0.1),
        sigma_a=np.array([[0.5]]), sigma_d=np.array([[0.3]]))
    binary = np.r_[np.zeros(n_continuous, bool), np.ones(n_binary, bool)]
    return ScenarioSpec("mixed", binary, truth,
                        w_kinds=("normal",), x_kinds=("normal", "genotype"),
                        z_kinds=("one",), q_kinds=("one",))


def scenario_random_slopes():
    """Continuous phenotypes with bivariate family/subject random effects
    (random intercept plus random slope at both levels)."""
    j = 3
    truth = ParameterSet(
        beta0=np.zeros(j), beta=np.ones((j, 1)), alpha=np.array([1.0, 1.0]),
        lam=np.ones(j), tau2=np.full(j, 0.2), sigma2=np.full(j, 0.1),
        sigma_a=np.diag([1.0, 1.0]), sigma_d=np.diag([0.1, 0.1]))
    binary = np.zeros(j, dtype=bool)
    return ScenarioSpec("random_slopes", binary, truth,
                        w_kinds=("normal",), x_kinds=("normal", "genotype"),
                        z_kinds=("one", "normal"), q_kinds=("one", "normal"))


def scenario_sparse_loadings():
    """Loadings ranging from strong to null, for selection operating
    characteristics: continuous (0.5, 0.05, 0.02, 0), binary (0.2, 0.01, 0)."""
    lam = np.array([0.5, 0.05, 0.02, 0.0, 0.2, 0.01, 0.0])
    j = len(lam)
    truth = ParameterSet(
        beta0=np.zeros(j), beta=np.ones((j, 1)), alpha=np.array([1.0, 1.0]),
        lam=lam, tau2=np.full(j, 0.2), sigma2=np.full(4, 0.1),
        sigma_a=np.array([[0.5]]), sigma_d=np.array([[0.3]]))
    binary = np.r_[np.zeros(4, bool), np.ones(3, bool)]
    return ScenarioSpec("sparse_loadings", binary, truth,
                        w_kinds=("normal",), x_kinds=("normal", "genotype"),
                        z_kinds=("one",), q_kinds=("one",))


def scenario_null_covariates():
    """Five latent-equation covariates, two of them null, genotype third."""
    j = 5
    truth = ParameterSet(
        beta0=np.zeros(j), beta=np.tile([0.5, 0.3], (j, 1)),
        alpha=np.array([1.0, -0.5, 0.2, 0.0, 0.0]),
        lam=np.ones(j), tau2=np.full(j, 0.2), sigma2=np.full(3, 0.1),
        sigma_a=np.array([[0.5]]), sigma_d=np.array([[0.3]]))
    binary = np.r_[np.zeros(3, bool), np.ones(2, bool)]
    return ScenarioSpec("null_covariates", binary, truth,
                        w_kinds=("normal", "normal"),
                        x_kinds=("normal", "normal", "genotype",
                                 "normal", "normal"),
                        z_kinds=("one",), q_kinds=("one",))


def scenario_no_repeat(sigma_a2=0.5):
    """Single-visit continuous design used to exhibit the inflation of the
    loadings when the family random effect is wrongly omitted: with a random
    intercept of variance ``sigma_a2``, the misspecified model converges to
    loadings scaled by sqrt(sigma_a2 + 1) and latent-equation coefficients
    scaled by 1/sqrt(sigma_a2 + 1)."""
    j = 2
    truth = ParameterSet(
        beta0=np.zeros(j), beta=np.zeros((j, 0)), alpha=np.array([1.0, 1.0]),
        lam=np.ones(j), tau2=np.full(j, 0.05), sigma2=np.full(j, 0.1),
        sigma_a=np.array([[sigma_a2]]), sigma_d=np.zeros((0, 0)))
    binary = np.zeros(j, dtype=bool)
    return ScenarioSpec("no_repeat", binary, truth,
                        w_kinds=(), x_kinds=("normal", "genotype"),
                        z_kinds=("one",), q_kinds=())


SCENARIOS = {
    "mixed": scenario_mixed,
    "random_slopes": scenario_random_slopes,
    "sparse_loadings": scenario_sparse_loadings,
    "null_covariates": scenario_null_covariates,
    "no_repeat": scenario_no_repeat,
}


def simulate_scenario(name, rng, n_families=500, t_points=5, **design_kwargs):
    """Simulate a named scenario; returns (dataset, truth)."""
    try:
        builder = SCENARIOS[name]
    except KeyError as exc:
        raise ValueError(
            f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}"
        ) from exc
    spec = builder()
    if name == "no_repeat":
        t_points = 1
    design = SimDesign(n_families=n_families, t_points=t_points,
                       **design_kwargs)
    return simulate_from_spec(spec, design, rng)
