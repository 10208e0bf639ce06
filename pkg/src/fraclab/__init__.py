"""Fractional integrals, semigroup kernels and Morrey-Campanato estimators on grids."""

from fraclab.commutator import (
    RadialOperator,
    SymbolFunction,
    commutator,
    expanded_commutator,
    higher_commutator,
    kernel_commutator,
    l_alpha_operator,
    lipschitz_domination_check,
    riesz_operator,
    semigroup_operator,
)
from fraclab.corpus import Corpus, corpus_generate
from fraclab.errors import (
    ConfigError,
    ExponentError,
    FraclabError,
    GridError,
    IndexWindowError,
    KernelError,
    MarginError,
    QuadratureError,
)
from fraclab.fracint import (
    QuadratureSpec,
    difference_kernel,
    fractional_integral,
    gamma_alpha,
    k_alpha_profile,
    l_alpha,
    regularized_riesz,
    riesz_kernel,
)
from fraclab.grid import (
    Ball,
    BallLadder,
    GridFunction,
    GridSpec,
    SummedAreaTable,
    ball_average,
    ball_count,
    ball_measure,
    enumerate_balls,
    sample,
)
from fraclab.harness import (
    IndexSet,
    RatioReport,
    commutator_experiment,
    derive_indices,
    dilate_chain_check,
    hls_experiment,
    inclusion_experiment,
    morrey_experiment,
    refinement_study,
)
from fraclab.norms import (
    NormEstimate,
    bmo_L_norm,
    bmo_norm,
    campanato_L_norm,
    campanato_norm,
    lip_norm,
    lp_norm,
    morrey_norm,
    sharp_maximal_L,
)
from fraclab.semigroup import (
    KernelFamily,
    apply_semigroup,
    heat_kernel_family,
    kernel_mass,
    validate_gaussian_bound,
)

__version__ = "0.1.0"
