"""Dirichlet process mixtures of variable-length order-statistics sequences with an EW kernel."""

from .ew import (
    DomainError,
    EWParams,
    beta_sample,
    binomial_sample,
    ew_cdf,
    ew_log_cdf,
    ew_log_pdf,
    ew_mode,
    ew_pdf,
    ew_quantile,
    ew_regime,
    ew_sample,
    gamma_sample,
)
from .orderstats import (
    Atom,
    Sequence,
    conditional_log_density,
    hierarchical_log_density,
    joint_log_density,
    length_log_pmf,
    order_stat_marginal_pdf,
    sample_sequence,
    sequence_log_likelihood,
)
from .rng import rng_stream

__version__ = "0.1.0"
