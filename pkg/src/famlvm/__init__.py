"""Bayesian latent variable modeling of longitudinal family phenotype data.

A two-part (continuous + probit-binary) factor model with family and
subject random effects, fit by parameter-expanded Gibbs sampling, with
spike-and-slab phenotype selection and path-sampling Bayes factors.
"""

from .dataset import (LongitudinalFamilyDataset, flatten_index,
                      impute_missing, unflatten_index, validate_dataset)
from .diagnostics import (acf, batch_means_se, ess, hpdi,
                          summarize_replicates)
from .distributions import (normal_cdf, sample_beta, sample_inv_gamma,
                            sample_inv_wishart, sample_mvn,
                            sample_truncated_normal)
from .estimators import LatentVariableGibbs, PhenotypeSelector
from .exceptions import (AllMissingSeries, ConfigError, ConstantSeries,
                         DfTooSmall, DimensionMismatch, FamlvmError,
                         IndicatorAbsent, IoFailure, NameMismatch,
                         NotPositiveDefinite, NumericalBreakdown,
                         SeriesTooShort, ValidationFailure)
from .params import ParameterSet, PriorConfig
from .rng import RngHandle, derive_stream
from .sampler import (ChainOutput, ExpandedState, LatentState, SamplerConfig,
                      gibbs_sweep_continuous, gibbs_sweep_general,
                      log_complete_likelihood, run_chain,
                      run_chain_independence, standard_gibbs_sweep,
                      transform_expanded_to_original,
                      update_spike_slab_loading)
from .selection import (BfResult, PathPlan, build_grid, df_sensitivity,
                        fdr_select, log_bayes_factor, path_integral,
                        posterior_inclusion_probability, select_phenotypes)
from .simulate import (SCENARIOS, ScenarioSpec, SimDesign,
                       simulate_covariate_panel, simulate_from_spec,
                       simulate_genotypes, simulate_pedigree,
                       simulate_phenotypes, simulate_scenario)

__version__ = "1.0.0"
