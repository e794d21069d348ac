"""Compression of product quantum measurements into collective POVMs with
fewer outcomes but the same single-site statistics."""
__version__ = "0.1.0"

from .bounds import (
    InapplicableBound,
    Triple,
    dual_triple,
    holevo_check,
    holevo_via_compression_chain,
    joint_distribution,
    mutual_information,
    operator_chernoff_mc,
    thm3_lower_bound,
)
from .marginals import (
    WordPovm,
    block_fidelity,
    check_condition,
    k_subset_marginal,
    marginal_povm,
    product_povm,
    product_povm_element,
)
from .pipeline import CompressionConfig, CompressionResult, compress
from .quantum import (
    Ensemble,
    KrausInstrument,
    Povm,
    SubPovm,
    canonical_ensemble,
    entropy_defect,
    pretty_good_measurement,
    von_neumann_entropy,
)
