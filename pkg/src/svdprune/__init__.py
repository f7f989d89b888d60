"""Training-free vision-token pruning with SVD leverage scores."""

from .bias_sim import BiasProfile, BiasSimConfig, simulate_bias
from .errors import (
    DataError,
    DegenerateInputError,
    DtypeError,
    FormatError,
    IoError,
    NumericalError,
    ParamError,
    ShapeError,
    SvdPruneError,
)
from .flops import FlopsConfig, FlopsReport, estimate_flops
from .matrix_io import FeatureMatrix, load_matrix, save_matrix
from .prune import (
    PruneConfig,
    PruneResult,
    VarianceProfile,
    leverage_scores,
    prune,
    select_tokens,
    variance_profile,
)
from .svd_core import SvdFactors, ValidationReport, thin_svd, validate_factors

__version__ = "0.1.0"
