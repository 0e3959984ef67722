"""Gibbs samplers for the two-part latent variable model.

Three schemes are provided:

* ``SG`` -- standard Gibbs on the original parameterization (non-centered,
  non-expanded). Binary phenotypes are handled with the classic underlying-
  Gaussian augmentation. Kept as the mixing baseline.
* ``PX_HC`` -- hierarchically centered, parameter-expanded sampler with
  auxiliaries (psi, xi). On mixed data this is the augmented-variable PX-HC
  scheme without the extra working parameter.
* ``PX2_HC`` -- PX_HC plus a per-binary-phenotype scale group move (working
  parameter gamma_j) that jointly rescales the underlying Gaussian responses
  and the phenotype's coefficient block, breaking their posterior coupling.

Every block update is a standard conjugate draw; each was cross-checked
against independent closed-form or quadrature oracles (see the test suite).
All randomness flows through a single ``RngHandle``.
"""

import time as _time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import log_ndtr

from .dataset import validate_dataset
from .distributions import sample_inv_wishart, sample_truncated_normal
from .exceptions import (DimensionMismatch, NumericalBreakdown,
                         ValidationFailure)
from .params import ParameterSet
from .rng import as_generator

_JITTER = 1e-10


# ---------------------------------------------------------------------------
# state containers
# ---------------------------------------------------------------------------

@dataclass
class ExpandedState:
    """Parameter-expanded sampler state (starred scale)."""

    beta0_star: np.ndarray      # (J,)
    beta: np.ndarray            # (J, p1)
    alpha_star: np.ndarray      # (p2,)
    lam_star: np.ndarray        # (J,) >= 0; exactly 0 only via omega_j = 0
    eta2: np.ndarray            # (J,) > 0
    sigma2: np.ndarray          # (J,) > 0; fixed 1.0 entries for binary j
    sigma_a_star: np.ndarray    # (q1, q1)
    sigma_d_star: np.ndarray    # (q2, q2)
    psi2: float
    xi: np.ndarray              # (J,)
    gamma2: np.ndarray          # (J - J1,) last working-parameter draws
    omega: np.ndarray           # (J,) 0/1 inclusion indicators
    pi: np.ndarray              # (J,) slab probabilities


@dataclass
class LatentState:
    """Latent data: U, b, a, d and the underlying Gaussians for binary y."""

    u: np.ndarray               # (n,) one per (c, i, t)
    b: np.ndarray               # (n_ind, J)
    a: np.ndarray               # (C, q1)
    d: np.ndarray               # (n_ind, q2)
    y_tilde: np.ndarray         # (n, J); binary columns hold the Gaussians


@dataclass
class SamplerConfig:
    scheme: str = "PX2_HC"          # SG | PX_HC | PX2_HC
    iterations: int = 25000
    burn_in: int = 5000
    thin: int = 1
    independence_mode: bool = False
    fixed: dict = field(default_factory=dict)
    loading_target: tuple | None = None     # (j0 zero-based, g)
    covariate_target: tuple | None = None   # (x column indices, g)
    record_expanded: bool = False
    init_state: object = None               # warm start: (state, latent)

    def validate(self):
        if self.scheme not in ("SG", "PX_HC", "PX2_HC"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("need 0 <= burn_in < iterations")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if self.loading_target is not None and self.covariate_target is not None:
            raise ValueError("at most one path-sampling target")
        return self


@dataclass
class ChainOutput:
    """Retained posterior draws on the original parameter scale."""

    names: list
    draws: np.ndarray           # (rows, len(names))
    scheme: str
    seed: int
    stream: int
    iterations: int
    burn_in: int
    thin: int
    independence_mode: bool
    binary: np.ndarray
    wall_time: float = 0.0
    u_stats: np.ndarray | None = None
    expanded_trace: list | None = None
    final_state: tuple | None = None

    def column(self, name):
        try:
            k = self.names.index(name)
        except ValueError as exc:
            raise KeyError(name) from exc
        return self.draws[:, k]

    def posterior_mean(self):
        return dict(zip(self.names, self.draws.mean(axis=0)))


def transform_expanded_to_original(s, n_continuous=None):
    """Map the expanded state to the identified parameters.

    alpha = alpha*/psi, SigmaA = SigmaA*/psi^2, SigmaD = SigmaD*/psi^2,
    lambda_j = lambda*_j psi, beta0_j = beta0*_j xi_j, tau2_j = xi_j^2 eta2_j.
    The state carries a unit placeholder variance for each binary phenotype;
    ``n_continuous`` trims sigma2 to the continuous block (default: all).
    """
    if s.psi2 <= 0:
        raise ValueError("psi2 must be positive")
    psi = np.sqrt(s.psi2)
    j1 = s.sigma2.shape[0] if n_continuous is None else int(n_continuous)
    return ParameterSet(
        beta0=s.beta0_star * s.xi,
        beta=np.array(s.beta),
        alpha=s.alpha_star / psi,
        lam=s.lam_star * psi,
        tau2=s.xi ** 2 * s.eta2,
        sigma2=np.array(s.sigma2[:j1]),
        sigma_a=s.sigma_a_star / s.psi2,
        sigma_d=s.sigma_d_star / s.psi2,
    )


# ---------------------------------------------------------------------------
# flattened model data
# ---------------------------------------------------------------------------

class _ModelData:
    """Vectorized view of a dataset, with the design precomputations the
    sweeps need. Rows are sorted (family, individual, time) so per-family
    and per-individual reductions are contiguous."""

    def __init__(self, d, independence_mode=False, covariate_target=None):
        rep = validate_dataset(d)
        if not rep.ok:
            raise ValidationFailure("; ".join(rep.violations))
        if np.isnan(d.y).any():
            raise ValidationFailure("dataset has missing cells; impute first")
        self.y = np.array(d.y)
        self.binary = np.array(d.binary)
        self.n, self.J = self.y.shape
        self.J1 = int(np.sum(~self.binary))
        self.W = np.array(d.w)
        self.X = np.array(d.x)
        self.x_raw = np.array(d.x)
        if covariate_target is not None:
            idx, g = covariate_target
            idx = np.asarray(idx, dtype=int)
            if len(idx) and (idx.min() < 0 or idx.max() >= self.X.shape[1]):
                raise DimensionMismatch("covariate target index out of range")
            self.X[:, idx] *= g
            self.cov_idx = idx
        else:
            self.cov_idx = None
        self.Z = np.zeros((self.n, 0)) if independence_mode else np.array(d.z)
        self.Q = np.array(d.q)
        self.p1 = self.W.shape[1]
        self.p2 = self.X.shape[1]
        self.q1 = self.Z.shape[1]
        self.q2 = self.Q.shape[1]

        self.fam, _ = d.family_codes()
        self.ind, _ = d.individual_codes()
        self.C = int(self.fam.max()) + 1 if self.n else 0
        self.n_ind = int(self.ind.max()) + 1 if self.n else 0
        self.T_counts = np.bincount(self.ind, minlength=self.n_ind)
        self.fam_of_ind = np.zeros(self.n_ind, dtype=int)
        self.fam_of_ind[self.ind] = self.fam
        # contiguous segment starts for reduceat
        self.ind_starts = np.flatnonzero(np.r_[True, np.diff(self.ind) != 0])
        self.fam_starts = np.flatnonzero(np.r_[True, np.diff(self.fam) != 0])

        self.WtW = self.W.T @ self.W
        self.XtX = self.X.T @ self.X
        # per-family Z'Z and per-individual Q'Q stacks
        self.ZtZ_fam = self._segment_outer(self.Z, self.fam, self.C)
        self.QtQ_ind = self._segment_outer(self.Q, self.ind, self.n_ind)

    @staticmethod
    def _segment_outer(mat, codes, n_groups):
        k = mat.shape[1]
        out = np.zeros((n_groups, k, k))
        for r in range(k):
            for c in range(r, k):
                s = np.bincount(codes, weights=mat[:, r] * mat[:, c],
                                minlength=n_groups)
                out[:, r, c] = s
                out[:, c, r] = s
        return out

    def ind_sum(self, values):
        """Per-individual sums of a (n,) or (n, k) array."""
        return np.add.reduceat(values, self.ind_starts, axis=0)

    def fam_sum(self, values):
        return np.add.reduceat(values, self.fam_starts, axis=0)


def _safe_cholesky(mat, what, state_dump=None):
    try:
        return np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        pass
    try:
        return np.linalg.cholesky(mat + _JITTER * np.eye(mat.shape[-1]))
    except np.linalg.LinAlgError as exc:
        raise NumericalBreakdown(f"non-PD conditional covariance in {what}",
                                 state_dump=state_dump) from exc


def _draw_gaussian_block(prec, rhs, gen, what):
    """Draw from N(prec^-1 rhs, prec^-1) for a small dense precision."""
    chol = _safe_cholesky(prec, what)
    tmp = np.linalg.solve(chol, rhs)
    mean_t = np.linalg.solve(chol.T, tmp)
    noise = np.linalg.solve(chol.T, gen.standard_normal(len(rhs)))
    return mean_t + noise


def _draw_batch_gaussian(prec, rhs, gen, what):
    """Batched version: prec (m,k,k), rhs (m,k)."""
    m, k = rhs.shape
    if k == 1:
        p = prec[:, 0, 0]
        if np.any(p <= 0):
            raise NumericalBreakdown(f"nonpositive precision in {what}")
        mean = rhs[:, 0] / p
        return (mean + gen.standard_normal(m) / np.sqrt(p))[:, None]
    chol = _safe_cholesky(prec, what)
    mean = np.linalg.solve(prec, rhs[..., None])[..., 0]
    noise = np.linalg.solve(np.swapaxes(chol, -1, -2),
                            gen.standard_normal((m, k, 1)))[..., 0]
    return mean + noise


def _inv_gamma(gen, shape, rate):
    return rate / gen.standard_gamma(shape)


def _trunc(mu, sigma, side, gen):
    return sample_truncated_normal(mu, sigma, side, gen)


def _draw_loading(resid, design, s_j, slab_on, pi_j, prior_a, prior_b, gen):
    """Spike-and-slab (or plain truncated-normal) draw of one loading.

    Returns (lam_star, omega, pi). The slab is TN+(0,1); the marginal
    likelihood ratio slab/spike integrates the Gaussian likelihood against
    that prior in closed form.
    """
    su2 = design @ design
    sur = design @ resid
    prec = su2 / s_j + 1.0
    mean = sur / s_j / prec
    sd = 1.0 / np.sqrt(prec)
    if not slab_on:
        lam = float(_trunc(np.array(mean), np.array(sd), "positive", gen))
        return lam, 1, pi_j
    zscore = mean / sd
    log_ratio = (np.log(2.0) - 0.5 * np.log(prec)
                 + 0.5 * zscore ** 2 + log_ndtr(zscore))
    log_odds = np.log(pi_j) - np.log1p(-pi_j) + log_ratio
    p_include = 1.0 / (1.0 + np.exp(-log_odds))
    omega = 1 if gen.random() < p_include else 0
    if omega:
        lam = float(_trunc(np.array(mean), np.array(sd), "positive", gen))
    else:
        lam = 0.0
    pi_new = gen.beta(prior_a + omega, prior_b + 1 - omega)
    return lam, omega, pi_new


# ---------------------------------------------------------------------------
# parameter-expanded sweeps (PX_HC / PX2_HC)
# ---------------------------------------------------------------------------

def _px_sweep(md, st, lt, priors, gen, *, use_gamma, lam_mult, fixed,
              slab_flags):
    """One full PX-HC / PX2-HC sweep, updating every block in place."""
    n, J, J1 = md.n, md.J, md.J1
    v0 = priors.fixed_effect_var
    fix_tau = "tau2" in fixed
    fix_sig = "sigma2" in fixed

    V = lt.y_tilde
    bin_idx = np.flatnonzero(md.binary)

    # ---- Step 1: underlying Gaussians for binary phenotypes --------------
    if len(bin_idx):
        WB = md.W @ st.beta.T if md.p1 else np.zeros((n, J))
        for j in bin_idx:
            mu = (WB[:, j] + lam_mult[j] * st.lam_star[j] * lt.u
                  + st.xi[j] * lt.b[md.ind, j])
            yj = md.y[:, j]
            draw = np.empty(n)
            pos = yj > 0.5
            draw[pos] = _trunc(mu[pos], 1.0, "positive", gen)
            draw[~pos] = _trunc(mu[~pos], 1.0, "negative", gen)
            V[:, j] = draw
            if use_gamma:
                # scale group move: jointly rescale (y~, beta_j, lam*_j, xi_j)
                # by g = 1/gamma_j; exact conjugate draw of g^2.
                resid = draw - mu
                quad = resid @ resid + st.xi[j] ** 2
                dim = n + md.p1 + 1
                if md.p1:
                    quad += st.beta[j] @ st.beta[j] / v0
                if st.omega[j] and st.lam_star[j] > 0 and not fix_tau:
                    quad += st.lam_star[j] ** 2
                    dim += 1
                g2 = 2.0 * gen.standard_gamma(dim / 2.0) / quad
                g = np.sqrt(g2)
                st.gamma2[j - J1] = 1.0 / g2
                V[:, j] *= g
                st.beta[j] *= g
                st.lam_star[j] *= g
                st.xi[j] *= g

    # ---- Step 2: Theta* | Omega* ------------------------------------------
    b_rows = lt.b[md.ind, :]                     # (n, J)
    for j in range(J):
        s_j = st.sigma2[j] if j < J1 else 1.0
        u_eff = lam_mult[j] * lt.u
        xib = st.xi[j] * b_rows[:, j]
        vj = V[:, j]
        # beta_j
        if md.p1 and "beta" not in fixed:
            r = vj - st.lam_star[j] * u_eff - xib
            prec = md.WtW / s_j + np.eye(md.p1) / v0
            st.beta[j] = _draw_gaussian_block(prec, md.W.T @ r / s_j, gen,
                                              "beta")
        wb = md.W @ st.beta[j] if md.p1 else 0.0
        # lambda*_j (with spike-and-slab when enabled)
        if "lambda" not in fixed:
            r = vj - wb - xib
            lam, om, pi = _draw_loading(
                r, u_eff, s_j, slab_flags[j], st.pi[j],
                priors.spike_slab_a, priors.spike_slab_b, gen)
            st.lam_star[j], st.omega[j], st.pi[j] = lam, om, pi
        lamu = st.lam_star[j] * u_eff
        # xi_j (prior N(0,1)); pinned at 1 when tau2 is clamped
        if not fix_tau:
            r = vj - wb - lamu
            bj = b_rows[:, j]
            prec = bj @ bj / s_j + 1.0
            mean = bj @ r / s_j / prec
            st.xi[j] = mean + gen.standard_normal() / np.sqrt(prec)
        # beta0*_j: mean of the centered random effects
        prec = md.n_ind / st.eta2[j] + 1.0 / v0
        mean = lt.b[:, j].sum() / st.eta2[j] / prec
        st.beta0_star[j] = mean + gen.standard_normal() / np.sqrt(prec)
        # eta2_j
        if not fix_tau:
            dev = lt.b[:, j] - st.beta0_star[j]
            st.eta2[j] = _inv_gamma(gen, (priors.v2 + md.n_ind) / 2.0,
                                    (priors.v2 + dev @ dev) / 2.0)
        # sigma2_j for continuous phenotypes
        if j < J1 and not fix_sig:
            resid = vj - wb - lamu - st.xi[j] * b_rows[:, j]
            st.sigma2[j] = _inv_gamma(
                gen, priors.sigma2_shape + 0.5 * n,
                priors.sigma2_rate + 0.5 * resid @ resid)

    # latent-equation fixed effects and scales
    za = (md.Z * lt.a[md.fam]).sum(axis=1) if md.q1 else 0.0
    qd = (md.Q * lt.d[md.ind]).sum(axis=1) if md.q2 else 0.0
    if md.p2 and "alpha" not in fixed:
        r = lt.u - za - qd
        prec = md.XtX / st.psi2 + np.eye(md.p2) / priors.alpha_var()
        st.alpha_star = _draw_gaussian_block(prec, md.X.T @ r / st.psi2, gen,
                                             "alpha")
    xa = md.X @ st.alpha_star if md.p2 else 0.0
    if "psi2" not in fixed:
        eps = lt.u - xa - za - qd
        st.psi2 = _inv_gamma(gen, (priors.v1 + n) / 2.0,
                             (priors.v1 + eps @ eps) / 2.0)
    if md.q1 and "SigmaA" not in fixed:
        scatter = lt.a.T @ lt.a
        st.sigma_a_star = sample_inv_wishart(
            priors.df_a(md.q1) + md.C,
            priors.wishart_scale * np.eye(md.q1) + scatter, gen)
    if md.q2 and "SigmaD" not in fixed:
        scatter = lt.d.T @ lt.d
        st.sigma_d_star = sample_inv_wishart(
            priors.df_d(md.q2) + md.n_ind,
            priors.wishart_scale * np.eye(md.q2) + scatter, gen)

    # ---- Step 3: Omega* | Theta* ------------------------------------------
    WB = md.W @ st.beta.T if md.p1 else np.zeros((n, J))
    lam_eff = lam_mult * st.lam_star
    s_all = np.where(md.binary, 1.0, np.concatenate(
        [st.sigma2[:J1], np.ones(J - J1)]))
    # U*
    b_rows = lt.b[md.ind, :]
    E = V - WB - b_rows * st.xi
    prec_u = float(lam_eff ** 2 @ (1.0 / s_all)) + 1.0 / st.psi2
    mu_u = xa + za + qd
    num = E @ (lam_eff / s_all) + mu_u / st.psi2
    lt.u = num / prec_u + gen.standard_normal(n) / np.sqrt(prec_u)
    # b*
    R = V - WB - np.outer(lt.u, lam_eff)
    sums = md.ind_sum(R)                                  # (n_ind, J)
    prec_b = (md.T_counts[:, None] * (st.xi ** 2 / s_all)[None, :]
              + 1.0 / st.eta2[None, :])
    mean_b = ((st.xi / s_all)[None, :] * sums
              + st.beta0_star[None, :] / st.eta2[None, :]) / prec_b
    lt.b = mean_b + gen.standard_normal(mean_b.shape) / np.sqrt(prec_b)
    # a*_c
    if md.q1:
        r = lt.u - xa - qd
        rhs = md.fam_sum(md.Z * r[:, None]) / st.psi2
        sa_inv = np.linalg.inv(st.sigma_a_star)
        prec = md.ZtZ_fam / st.psi2 + sa_inv[None, :, :]
        lt.a = _draw_batch_gaussian(prec, rhs, gen, "a")
        za = (md.Z * lt.a[md.fam]).sum(axis=1)
    # d*_ci
    if md.q2:
        r = lt.u - xa - za
        rhs = md.ind_sum(md.Q * r[:, None]) / st.psi2
        sd_inv = np.linalg.inv(st.sigma_d_star)
        prec = md.QtQ_ind / st.psi2 + sd_inv[None, :, :]
        lt.d = _draw_batch_gaussian(prec, rhs, gen, "d")


# ---------------------------------------------------------------------------
# standard Gibbs sweep (original parameterization)
# ---------------------------------------------------------------------------

def _sg_sweep(md, st, lt, priors, gen, *, lam_mult, fixed, slab_flags):
    """Non-centered, non-expanded Gibbs sweep on the original scale.

    State reuses ExpandedState fields with psi2 = 1, xi = 1 throughout, so
    ``transform_expanded_to_original`` is the identity on it (eta2 plays the
    role of tau2, lam_star of lambda, beta0_star of beta0).
    """
    n, J, J1 = md.n, md.J, md.J1
    v0 = priors.fixed_effect_var
    V = lt.y_tilde
    bin_idx = np.flatnonzero(md.binary)

    if len(bin_idx):
        WB = md.W @ st.beta.T if md.p1 else np.zeros((n, J))
        for j in bin_idx:
            mu = (st.beta0_star[j] + WB[:, j]
                  + lam_mult[j] * st.lam_star[j] * lt.u + lt.b[md.ind, j])
            yj = md.y[:, j]
            draw = np.empty(n)
            pos = yj > 0.5
            draw[pos] = _trunc(mu[pos], 1.0, "positive", gen)
            draw[~pos] = _trunc(mu[~pos], 1.0, "negative", gen)
            V[:, j] = draw

    b_rows = lt.b[md.ind, :]
    for j in range(J):
        s_j = st.sigma2[j] if j < J1 else 1.0
        u_eff = lam_mult[j] * lt.u
        vj = V[:, j]
        # beta0_j
        r = vj - (md.W @ st.beta[j] if md.p1 else 0.0) \
            - st.lam_star[j] * u_eff - b_rows[:, j]
        prec = n / s_j + 1.0 / v0
        st.beta0_star[j] = (r.sum() / s_j / prec
                            + gen.standard_normal() / np.sqrt(prec))
        # beta_j
        if md.p1 and "beta" not in fixed:
            r = vj - st.beta0_star[j] - st.lam_star[j] * u_eff - b_rows[:, j]
            prec = md.WtW / s_j + np.eye(md.p1) / v0
            st.beta[j] = _draw_gaussian_block(prec, md.W.T @ r / s_j, gen,
                                              "beta")
        wb = md.W @ st.beta[j] if md.p1 else 0.0
        # lambda_j, prior TN+(0,1) (or spike-and-slab)
        if "lambda" not in fixed:
            r = vj - st.beta0_star[j] - wb - b_rows[:, j]
            lam, om, pi = _draw_loading(
                r, u_eff, s_j, slab_flags[j], st.pi[j],
                priors.spike_slab_a, priors.spike_slab_b, gen)
            st.lam_star[j], st.omega[j], st.pi[j] = lam, om, pi
        # tau2_j
        if "tau2" not in fixed:
            st.eta2[j] = _inv_gamma(gen, (priors.v2 + md.n_ind) / 2.0,
                                    (priors.v2 + lt.b[:, j] @ lt.b[:, j]) / 2.0)
        # sigma2_j
        if j < J1 and "sigma2" not in fixed:
            resid = (vj - st.beta0_star[j] - wb
                     - st.lam_star[j] * u_eff - b_rows[:, j])
            st.sigma2[j] = _inv_gamma(
                gen, priors.sigma2_shape + 0.5 * n,
                priors.sigma2_rate + 0.5 * resid @ resid)

    za = (md.Z * lt.a[md.fam]).sum(axis=1) if md.q1 else 0.0
    qd = (md.Q * lt.d[md.ind]).sum(axis=1) if md.q2 else 0.0
    if md.p2 and "alpha" not in fixed:
        r = lt.u - za - qd
        prec = md.XtX + np.eye(md.p2) / priors.alpha_var()
        st.alpha_star = _draw_gaussian_block(prec, md.X.T @ r, gen, "alpha")
    xa = md.X @ st.alpha_star if md.p2 else 0.0
    if md.q1 and "SigmaA" not in fixed:
        st.sigma_a_star = sample_inv_wishart(
            priors.df_a(md.q1) + md.C,
            priors.wishart_scale * np.eye(md.q1) + lt.a.T @ lt.a, gen)
    if md.q2 and "SigmaD" not in fixed:
        st.sigma_d_star = sample_inv_wishart(
            priors.df_d(md.q2) + md.n_ind,
            priors.wishart_scale * np.eye(md.q2) + lt.d.T @ lt.d, gen)

    WB = md.W @ st.beta.T if md.p1 else np.zeros((n, J))
    lam_eff = lam_mult * st.lam_star
    s_all = np.where(md.binary, 1.0, np.concatenate(
        [st.sigma2[:J1], np.ones(J - J1)]))
    b_rows = lt.b[md.ind, :]
    E = V - st.beta0_star[None, :] - WB - b_rows
    prec_u = float(lam_eff ** 2 @ (1.0 / s_all)) + 1.0
    mu_u = xa + za + qd
    num = E @ (lam_eff / s_all) + mu_u
    lt.u = num / prec_u + gen.standard_normal(n) / np.sqrt(prec_u)

    R = V - st.beta0_star[None, :] - WB - np.outer(lt.u, lam_eff)
    sums = md.ind_sum(R)
    prec_b = (md.T_counts[:, None] / s_all[None, :] + 1.0 / st.eta2[None, :])
    mean_b = (sums / s_all[None, :]) / prec_b
    lt.b = mean_b + gen.standard_normal(mean_b.shape) / np.sqrt(prec_b)
    if md.q1:
        r = lt.u - xa - qd
        rhs = md.fam_sum(md.Z * r[:, None])
        prec = md.ZtZ_fam + np.linalg.inv(st.sigma_a_star)[None, :, :]
        lt.a = _draw_batch_gaussian(prec, rhs, gen, "a")
        za = (md.Z * lt.a[md.fam]).sum(axis=1)
    if md.q2:
        r = lt.u - xa - za
        rhs = md.ind_sum(md.Q * r[:, None])
        prec = md.QtQ_ind + np.linalg.inv(st.sigma_d_star)[None, :, :]
        lt.d = _draw_batch_gaussian(prec, rhs, gen, "d")


# ---------------------------------------------------------------------------
# public sweep wrappers (single-sweep contracts used by tests)
# ---------------------------------------------------------------------------

def gibbs_sweep_continuous(state, latent, d, priors, rng, config=None):
    """One PX-HC sweep; requires all phenotypes continuous."""
    if np.asarray(d.binary).any():
        raise ValidationFailure("gibbs_sweep_continuous needs J1 == J")
    return _single_sweep("PX_HC", state, latent, d, priors, rng, config)


def gibbs_sweep_general(state, latent, d, priors, rng, config=None):
    """One PX2-HC sweep (mixed continuous/binary phenotypes)."""
    if not np.asarray(d.binary).any():
        raise ValidationFailure("gibbs_sweep_general needs a binary phenotype")
    return _single_sweep("PX2_HC", state, latent, d, priors, rng, config)


def standard_gibbs_sweep(state, latent, d, priors, rng, config=None):
    """One standard (non-expanded, non-centered) Gibbs sweep."""
    return _single_sweep("SG", state, latent, d, priors, rng, config)


def _single_sweep(scheme, state, latent, d, priors, rng, config):
    cfg = config or SamplerConfig(scheme=scheme, iterations=2, burn_in=0)
    md = _ModelData(d, independence_mode=cfg.independence_mode,
                    covariate_target=cfg.covariate_target)
    gen = as_generator(rng)
    lam_mult = _lam_mult(md, cfg)
    slab = priors.slab_flags(md.J)
    if scheme == "SG":
        _sg_sweep(md, state, latent, priors, gen,
                  lam_mult=lam_mult, fixed=cfg.fixed, slab_flags=slab)
    else:
        _px_sweep(md, state, latent, priors, gen,
                  use_gamma=(scheme == "PX2_HC"), lam_mult=lam_mult,
                  fixed=cfg.fixed, slab_flags=slab)
    return state, latent


def update_spike_slab_loading(j, state, latent, d, priors, rng,
                              scheme="PX2_HC"):
    """Redraw (lambda*_j, omega_j, pi_j) from the spike-and-slab conditional."""
    md = _ModelData(d)
    gen = as_generator(rng)
    j1 = md.J1
    s_j = state.sigma2[j] if j < j1 else 1.0
    v = latent.y_tilde[:, j]
    wb = md.W @ state.beta[j] if md.p1 else 0.0
    if scheme == "SG":
        resid = v - state.beta0_star[j] - wb - latent.b[md.ind, j]
    else:
        resid = v - wb - state.xi[j] * latent.b[md.ind, j]
    lam, om, pi = _draw_loading(resid, latent.u, s_j, True, state.pi[j],
                                priors.spike_slab_a, priors.spike_slab_b, gen)
    state.lam_star[j], state.omega[j], state.pi[j] = lam, om, pi
    return state


# ---------------------------------------------------------------------------
# initialization
# ---------------------------------------------------------------------------

def _init_state(md, priors, cfg, gen):
    J, J1 = md.J, md.J1
    eta2_0 = priors.v2 / (priors.v2 - 2.0) if priors.v2 > 2 else 1.0
    psi2_0 = priors.v1 / (priors.v1 - 2.0) if priors.v1 > 2 else 1.0
    slab = priors.slab_flags(J)
    sigma2 = np.ones(J)
    st = ExpandedState(
        beta0_star=np.zeros(J),
        beta=np.zeros((J, md.p1)),
        alpha_star=np.zeros(md.p2),
        lam_star=np.full(J, 0.5),
        eta2=np.full(J, eta2_0),
        sigma2=sigma2,
        sigma_a_star=np.eye(md.q1),
        sigma_d_star=np.eye(md.q2),
        psi2=psi2_0 if cfg.scheme != "SG" else 1.0,
        xi=np.ones(J),
        gamma2=np.ones(J - J1),
        omega=np.ones(J, dtype=int),
        pi=np.full(J, priors.spike_slab_a /
                   (priors.spike_slab_a + priors.spike_slab_b)),
    )
    if not np.any(slab):
        st.pi[:] = 0.5
    fixed = cfg.fixed
    if "sigma2" in fixed:
        st.sigma2[:J1] = np.asarray(fixed["sigma2"], dtype=float)
    if "tau2" in fixed:
        st.eta2 = np.asarray(fixed["tau2"], dtype=float).copy()
        st.xi = np.ones(J)
    if "psi2" in fixed:
        st.psi2 = float(fixed["psi2"])
    if "lambda" in fixed:
        st.lam_star = np.asarray(fixed["lambda"], dtype=float).copy()
    if "beta" in fixed:
        st.beta = np.atleast_2d(np.asarray(fixed["beta"], dtype=float)).copy()
    if "alpha" in fixed:
        st.alpha_star = np.asarray(fixed["alpha"], dtype=float).copy()
    if "SigmaA" in fixed:
        st.sigma_a_star = np.atleast_2d(np.asarray(fixed["SigmaA"],
                                                   dtype=float)).copy()
    if "SigmaD" in fixed:
        st.sigma_d_star = np.atleast_2d(np.asarray(fixed["SigmaD"],
                                                   dtype=float)).copy()

    y_tilde = np.array(md.y)
    for j in np.flatnonzero(md.binary):
        yj = md.y[:, j]
        pos = yj > 0.5
        draw = np.empty(md.n)
        draw[pos] = _trunc(np.zeros(pos.sum()), 1.0, "positive", gen)
        draw[~pos] = _trunc(np.zeros((~pos).sum()), 1.0, "negative", gen)
        y_tilde[:, j] = draw
    lt = LatentState(
        u=gen.standard_normal(md.n),
        b=gen.standard_normal((md.n_ind, J)),
        a=gen.standard_normal((md.C, md.q1)),
        d=gen.standard_normal((md.n_ind, md.q2)),
        y_tilde=y_tilde,
    )
    return st, lt


def _lam_mult(md, cfg):
    lam_mult = np.ones(md.J)
    if cfg.loading_target is not None:
        j0, g = cfg.loading_target
        if not 0 <= j0 < md.J:
            raise DimensionMismatch("loading target out of range")
        lam_mult[j0] = g
    return lam_mult


# ---------------------------------------------------------------------------
# chain driver
# ---------------------------------------------------------------------------

def _column_names(md):
    names = []
    names += [f"beta0_{j + 1}" for j in range(md.J)]
    names += [f"beta_{j + 1}_{k + 1}" for j in range(md.J)
              for k in range(md.p1)]
    names += [f"alpha_{k + 1}" for k in range(md.p2)]
    names += [f"lambda_{j + 1}" for j in range(md.J)]
    names += [f"tau2_{j + 1}" for j in range(md.J)]
    names += [f"sigma2_{j + 1}" for j in range(md.J1)]
    names += [f"SigmaA_{r + 1}_{c + 1}" for r in range(md.q1)
              for c in range(r, md.q1)]
    names += [f"SigmaD_{r + 1}_{c + 1}" for r in range(md.q2)
              for c in range(r, md.q2)]
    names += [f"omega_{j + 1}" for j in range(md.J)]
    return names


def _state_row(md, theta, st, out):
    k = 0
    J, J1, p1, p2, q1, q2 = md.J, md.J1, md.p1, md.p2, md.q1, md.q2
    out[k:k + J] = theta.beta0; k += J
    if p1:
        out[k:k + J * p1] = theta.beta.ravel(); k += J * p1
    out[k:k + p2] = theta.alpha; k += p2
    out[k:k + J] = theta.lam; k += J
    out[k:k + J] = theta.tau2; k += J
    out[k:k + J1] = theta.sigma2; k += J1
    for r in range(q1):
        out[k:k + q1 - r] = theta.sigma_a[r, r:]; k += q1 - r
    for r in range(q2):
        out[k:k + q2 - r] = theta.sigma_d[r, r:]; k += q2 - r
    out[k:k + J] = st.omega; k += J
    return k


def _u_stat(md, st, lt, cfg, scheme):
    """Path-sampling integrand at the current state (original scale)."""
    if cfg.loading_target is not None:
        j0, _g = cfg.loading_target
        s_j = st.sigma2[j0] if j0 < md.J1 else 1.0
        lam_mult = _lam_mult(md, cfg)
        lamu = st.lam_star[j0] * lt.u
        wb = md.W @ st.beta[j0] if md.p1 else 0.0
        if scheme == "SG":
            mu = st.beta0_star[j0] + wb + lam_mult[j0] * lamu + lt.b[md.ind, j0]
        else:
            mu = wb + lam_mult[j0] * lamu + st.xi[j0] * lt.b[md.ind, j0]
        resid = lt.y_tilde[:, j0] - mu
        return float(resid @ lamu / s_j)
    idx, _g = cfg.covariate_target
    idx = np.asarray(idx, dtype=int)
    xa = md.X @ st.alpha_star if md.p2 else 0.0
    za = (md.Z * lt.a[md.fam]).sum(axis=1) if md.q1 else 0.0
    qd = (md.Q * lt.d[md.ind]).sum(axis=1) if md.q2 else 0.0
    resid = lt.u - xa - za - qd
    x2a = md.x_raw[:, idx] @ st.alpha_star[idx]
    psi2 = st.psi2 if scheme != "SG" else 1.0
    return float(resid @ x2a / psi2)


def run_chain(d, priors, cfg, rng):
    """Run one MCMC chain and return retained original-scale draws."""
    cfg.validate()
    start = _time.perf_counter()
    md = _ModelData(d, independence_mode=cfg.independence_mode,
                    covariate_target=cfg.covariate_target)
    if cfg.scheme == "PX_HC" and md.J1 < md.J and cfg.loading_target is None \
            and cfg.covariate_target is None:
        # allowed: acts as the augmented-variable PX-HC scheme on mixed data
        pass
    gen = as_generator(rng)
    lam_mult = _lam_mult(md, cfg)
    slab = priors.slab_flags(md.J)
    if cfg.init_state is not None:
        st, lt = cfg.init_state
        st = replace(st, beta=np.array(st.beta),
                     beta0_star=np.array(st.beta0_star),
                     alpha_star=np.array(st.alpha_star),
                     lam_star=np.array(st.lam_star), eta2=np.array(st.eta2),
                     sigma2=np.array(st.sigma2),
                     sigma_a_star=np.array(st.sigma_a_star),
                     sigma_d_star=np.array(st.sigma_d_star),
                     xi=np.array(st.xi), gamma2=np.array(st.gamma2),
                     omega=np.array(st.omega), pi=np.array(st.pi))
        lt = LatentState(u=np.array(lt.u), b=np.array(lt.b),
                         a=np.array(lt.a), d=np.array(lt.d),
                         y_tilde=np.array(lt.y_tilde))
    else:
        st, lt = _init_state(md, priors, cfg, gen)

    names = _column_names(md)
    rows = (cfg.iterations - cfg.burn_in + cfg.thin - 1) // cfg.thin
    draws = np.empty((rows, len(names)))
    u_stats = (np.empty(rows)
               if (cfg.loading_target or cfg.covariate_target) else None)
    expanded_trace = [] if cfg.record_expanded else None

    sweep_args = dict(lam_mult=lam_mult, fixed=cfg.fixed, slab_flags=slab)
    # With selection enabled, hold every loading in the slab for the first
    # stretch of burn-in.  The latent variable is initialized as noise, and
    # if all indicators drop out before it aligns with the data the chain
    # enters a near-absorbing state (no phenotype feedback on the latent
    # variable, so nothing ever re-enters); warming up with the indicators
    # frozen only changes initialization, not the stationary distribution.
    warm = min(200, cfg.burn_in // 2) if np.any(slab) else 0
    no_slab = np.zeros_like(slab)
    row = 0
    for it in range(cfg.iterations):
        sweep_args["slab_flags"] = slab if it >= warm else no_slab
        try:
            if cfg.scheme == "SG":
                _sg_sweep(md, st, lt, priors, gen, **sweep_args)
            else:
                _px_sweep(md, st, lt, priors, gen,
                          use_gamma=(cfg.scheme == "PX2_HC"
                                     and "tau2" not in cfg.fixed),
                          **sweep_args)
        except NumericalBreakdown as exc:
            exc.iteration = it
            exc.state_dump = (st, lt)
            raise
        if it >= cfg.burn_in and (it - cfg.burn_in) % cfg.thin == 0:
            theta = (transform_expanded_to_original(st, md.J1)
                     if cfg.scheme != "SG" else _sg_theta(md, st))
            _state_row(md, theta, st, draws[row])
            if u_stats is not None:
                u_stats[row] = _u_stat(md, st, lt, cfg, cfg.scheme)
            if expanded_trace is not None:
                expanded_trace.append(replace(
                    st, beta=np.array(st.beta),
                    beta0_star=np.array(st.beta0_star),
                    alpha_star=np.array(st.alpha_star),
                    lam_star=np.array(st.lam_star), eta2=np.array(st.eta2),
                    sigma2=np.array(st.sigma2),
                    sigma_a_star=np.array(st.sigma_a_star),
                    sigma_d_star=np.array(st.sigma_d_star),
                    xi=np.array(st.xi), gamma2=np.array(st.gamma2),
                    omega=np.array(st.omega), pi=np.array(st.pi)))
            row += 1

    seed = rng.seed if hasattr(rng, "seed") else -1
    stream = rng.stream if hasattr(rng, "stream") else -1
    return ChainOutput(
        names=names, draws=draws[:row], scheme=cfg.scheme, seed=seed,
        stream=stream, iterations=cfg.iterations, burn_in=cfg.burn_in,
        thin=cfg.thin, independence_mode=cfg.independence_mode,
        binary=np.array(md.binary),
        wall_time=_time.perf_counter() - start,
        u_stats=u_stats[:row] if u_stats is not None else None,
        expanded_trace=expanded_trace,
        final_state=(st, lt))


def _sg_theta(md, st):
    """SG state is already on the original scale."""
    return ParameterSet(
        beta0=np.array(st.beta0_star), beta=np.array(st.beta),
        alpha=np.array(st.alpha_star), lam=np.array(st.lam_star),
        tau2=np.array(st.eta2), sigma2=np.array(st.sigma2[:md.J1]),
        sigma_a=np.array(st.sigma_a_star), sigma_d=np.array(st.sigma_d_star))


def run_chain_independence(d, priors, cfg, rng):
    """run_chain with the family random-effect block removed."""
    if not cfg.independence_mode:
        cfg = replace(cfg, independence_mode=True)
    return run_chain(d, priors, cfg, rng)


# ---------------------------------------------------------------------------
# complete-data log likelihood
# ---------------------------------------------------------------------------

def log_complete_likelihood(theta, latent, d):
    """Complete-data log likelihood on the original scale.

    Sums Gaussian log densities of: continuous cells (variance sigma2_j),
    underlying Gaussians for binary cells (variance 1), latent-equation
    residuals (variance 1), and the random effects b, a, d under their
    covariances.
    """
    md = _ModelData(d)
    theta.validate()
    if len(theta.beta0) != md.J:
        raise DimensionMismatch("beta0 length != J")
    ll = 0.0
    wb = md.W @ theta.beta.T if md.p1 else np.zeros((md.n, md.J))
    b_rows = latent.b[md.ind, :]
    for j in range(md.J):
        v = latent.y_tilde[:, j] if md.binary[j] else md.y[:, j]
        s_j = 1.0 if md.binary[j] else theta.sigma2[j]
        resid = v - theta.beta0[j] - wb[:, j] - theta.lam[j] * latent.u \
            - b_rows[:, j]
        ll += -0.5 * md.n * np.log(2 * np.pi * s_j) - resid @ resid / (2 * s_j)
    xa = md.X @ theta.alpha if md.p2 else 0.0
    za = (md.Z * latent.a[md.fam]).sum(axis=1) if md.q1 else 0.0
    qd = (md.Q * latent.d[md.ind]).sum(axis=1) if md.q2 else 0.0
    eps = latent.u - xa - za - qd
    ll += -0.5 * md.n * np.log(2 * np.pi) - eps @ eps / 2.0
    for j in range(md.J):
        bj = latent.b[:, j]
        ll += (-0.5 * md.n_ind * np.log(2 * np.pi * theta.tau2[j])
               - bj @ bj / (2 * theta.tau2[j]))
    for effects, cov in ((latent.a, theta.sigma_a), (latent.d, theta.sigma_d)):
        k = effects.shape[1]
        if k == 0:
            continue
        m = effects.shape[0]
        sign, logdet = np.linalg.slogdet(cov)
        if sign <= 0:
            raise NumericalBreakdown("random-effect covariance not PD")
        quad = np.sum(effects * np.linalg.solve(cov, effects.T).T)
        ll += -0.5 * m * (k * np.log(2 * np.pi) + logdet) - 0.5 * quad
    return float(ll)
