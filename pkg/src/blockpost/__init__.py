"""Latent and stochastic block models, end to end at desk scale:
generation, exact groups posterior, symmetry handling, and numerical
evaluation of the divergences, rate functions and finite-size bounds
that drive posterior concentration.
"""

__version__ = "0.1.0"

from .errors import BlockpostError, CapExceededError, SpecError, TheoryPreconditionError
from .families import (
    Bernoulli,
    Binomial,
    Family,
    GaussLocation,
    GaussScale,
    Multinomial,
    Poisson,
    ZeroInflated,
    ZeroTruncatedPoisson,
    family_from_dict,
)
from .model import (
    Configuration,
    ConnectivityMatrix,
    ModelSpec,
    ModelVariant,
    ObservationMatrix,
    good_set_probability_bound,
    group_counts,
    in_good_set,
    index_mask,
    make_rng,
    derive_seed,
    sample_configuration,
    sample_observations,
)
from .symmetry import (
    SymmetryGroup,
    are_equivalent,
    canonical_representative,
    check_bound_number,
    config_distance,
    detect_symmetry_group,
    diff_count,
)
from .posterior import (
    PosteriorTable,
    delta_statistic,
    exact_posterior,
    expected_delta,
    log_prior,
    log_unnormalized_posterior,
    map_configuration,
    misclassification,
    posterior_mass_of_class,
)
from .divergence import (
    cross_log_ratio,
    kappa_max,
    kappa_min,
    kl_divergence,
    lipschitz_L0,
)
from .rates import (
    RateFunction,
    SparseScalings,
    breve_psi_lemma3,
    breve_psi_lemma4,
    breve_psi_s42,
    exact_chernoff_rate,
    growth_product_bound,
    rate_function,
    sparse_scalings,
    tilde_psi_star_max,
    tilde_psi_star_sparse,
)
from .bounds import BoundReport, proportions_gap, theorem_constants
from .harness import (
    ExhaustiveReport,
    ExperimentPlan,
    ExperimentResult,
    run_concentration_check,
    run_convergence_sweep,
    run_exhaustive_checks,
    run_sparse_sweep,
)
from .io import (
    load_spec,
    read_configuration,
    read_observations,
    save_spec,
    spec_from_dict,
    spec_to_dict,
    write_configuration,
    write_observations,
)
