"""Martingale oscillation operators on finite filtrations, with
numerically exact oracles and empirical verification of the
distributional inequalities that control the r-variation."""

from .filtration import (
    Filtration,
    conditional_expectation,
    dyadic_filtration,
    random_filtration,
    regularity_constant,
    stick_filtration,
    validate,
)
from .martingale import (
    Martingale,
    ProofSets,
    StoppingTime,
    first_variation_exceed,
    from_terminal,
    proof_sets,
    random_martingale,
    stopped_tail,
    truncated_transform,
)
from .operators import (
    JumpChain,
    VariationCertificate,
    c_r_constant,
    conditional_square,
    distribution,
    dyadic_jump_majorant,
    jump_count_chain,
    jump_count_pairs,
    lp_norm,
    maximal,
    square,
    variation,
    variation_bruteforce,
    variation_pointwise,
)
from .inequalities import (
    ExperimentSummary,
    SearchResult,
    VerificationReport,
    adversarial_search,
    bdg_experiment,
    jump_experiment,
    lepingle_experiment,
    verify_good_lambda,
    verify_lemma_weak,
    verify_proof_chain,
)
from .weights import (
    AInftyProfile,
    DyadicWeight,
    ainfty_profile,
    cascade_weight,
    doubling_constant,
    verify_weighted_good_lambda,
    weighted_distribution,
)
from .reporting import __version__

__all__ = [name for name in dir() if not name.startswith("_")]
