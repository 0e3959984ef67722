"""Model parameters on the original (identified) scale, and prior settings."""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DimensionMismatch, NotPositiveDefinite


def _spd_check(m, name):
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"{name} must be square")
    if m.size and not np.allclose(m, m.T, atol=1e-10):
        raise NotPositiveDefinite(f"{name} is not symmetric")
    if m.size:
        try:
            np.linalg.cholesky(m)
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefinite(f"{name} is not positive definite") from exc
    return m


@dataclass
class ParameterSet:
    """Identified model parameters.

    The latent-equation residual variance is fixed at 1 and is deliberately
    not a field; the factor loadings carry the sign restriction lambda_j >= 0.
    """

    beta0: np.ndarray       # (J,)
    beta: np.ndarray        # (J, p1)
    alpha: np.ndarray       # (p2,)
    lam: np.ndarray         # (J,) nonnegative factor loadings
    tau2: np.ndarray        # (J,) positive
    sigma2: np.ndarray      # (J1,) positive, continuous phenotypes only
    sigma_a: np.ndarray     # (q1, q1) SPD family random-effect covariance
    sigma_d: np.ndarray     # (q2, q2) SPD subject random-effect covariance

    def __post_init__(self):
        self.beta0 = np.asarray(self.beta0, dtype=float)
        self.beta = np.atleast_2d(np.asarray(self.beta, dtype=float))
        self.alpha = np.asarray(self.alpha, dtype=float)
        self.lam = np.asarray(self.lam, dtype=float)
        self.tau2 = np.asarray(self.tau2, dtype=float)
        self.sigma2 = np.asarray(self.sigma2, dtype=float)
        self.sigma_a = np.atleast_2d(np.asarray(self.sigma_a, dtype=float))
        self.sigma_d = np.atleast_2d(np.asarray(self.sigma_d, dtype=float))

    def validate(self):
        j = len(self.beta0)
        if self.beta.shape[0] != j and self.beta.size:
            raise DimensionMismatch("beta must have one row per phenotype")
        if len(self.lam) != j or len(self.tau2) != j:
            raise DimensionMismatch("lam/tau2 must have length J")
        if np.any(self.lam < 0):
            raise ValueError("factor loadings must be nonnegative")
        if np.any(self.tau2 <= 0):
            raise ValueError("tau2 must be strictly positive")
        if np.any(self.sigma2 <= 0):
            raise ValueError("sigma2 must be strictly positive")
        _spd_check(self.sigma_a, "SigmaA")
        _spd_check(self.sigma_d, "SigmaD")
        return self

    def to_dict(self):
        return {
            "beta0": self.beta0.tolist(),
            "beta": self.beta.tolist(),
            "alpha": self.alpha.tolist(),
            "lambda": self.lam.tolist(),
            "tau2": self.tau2.tolist(),
            "sigma2": self.sigma2.tolist(),
            "SigmaA": self.sigma_a.tolist(),
            "SigmaD": self.sigma_d.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(beta0=d["beta0"], beta=d["beta"], alpha=d["alpha"],
                   lam=d["lambda"], tau2=d["tau2"], sigma2=d["sigma2"],
                   sigma_a=d["SigmaA"], sigma_d=d["SigmaD"])


@dataclass
class PriorConfig:
    """Hyperparameters of the conjugate prior family.

    v1 and v2 are the degrees of freedom of the folded-t priors induced on
    the loadings and on tau via the parameter-expansion construction.
    Wishart degrees of freedom default to dim+1 when left as None.
    """

    v1: float = 10.0
    v2: float = 10.0
    spike_slab_a: float = 1.0
    spike_slab_b: float = 1.0
    sigma2_shape: float = 0.1
    sigma2_rate: float = 0.1
    wishart_df_a: float | None = None
    wishart_df_d: float | None = None
    wishart_scale: float = 10.0        # scale matrix is wishart_scale * I
    fixed_effect_var: float = 1000.0
    latent_effect_var: float | None = None   # alpha prior variance; None ->
    spike_slab_enabled: bool | np.ndarray = False    # fixed_effect_var

    def __post_init__(self):
        for name in ("v1", "v2", "spike_slab_a", "spike_slab_b",
                     "sigma2_shape", "sigma2_rate", "wishart_scale",
                     "fixed_effect_var"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.latent_effect_var is not None and self.latent_effect_var <= 0:
            raise ValueError("latent_effect_var must be positive")

    def alpha_var(self):
        """Prior variance of the latent-equation coefficients alpha."""
        return (self.fixed_effect_var if self.latent_effect_var is None
                else self.latent_effect_var)

    def slab_flags(self, n_phenotypes):
        flags = self.spike_slab_enabled
        if np.isscalar(flags):
            return np.full(n_phenotypes, bool(flags))
        flags = np.asarray(flags, dtype=bool)
        if flags.shape != (n_phenotypes,):
            raise DimensionMismatch("spike_slab_enabled length != J")
        return flags

    def df_a(self, q1):
        return self.wishart_df_a if self.wishart_df_a is not None else q1 + 1

    def df_d(self, q2):
        return self.wishart_df_d if self.wishart_df_d is not None else q2 + 1
