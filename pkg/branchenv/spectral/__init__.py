from branchenv.spectral.eigen_sequence import (
    EigenSequence,
    alignment_profile,
    duality_drift,
    eigen_sequence,
    perron_root,
)
from branchenv.spectral.hilbert import (
    birkhoff_coefficient,
    certified_lookahead,
    contraction_bound,
    hilbert_distance,
    norm_bound,
    projective_diameter,
)
from branchenv.spectral.products import product_matrix, ratio_band

__all__ = [
    "EigenSequence",
    "alignment_profile",
    "birkhoff_coefficient",
    "certified_lookahead",
    "contraction_bound",
    "duality_drift",
    "eigen_sequence",
    "hilbert_distance",
    "norm_bound",
    "perron_root",
    "product_matrix",
    "projective_diameter",
    "ratio_band",
]
