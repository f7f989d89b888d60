"""Leverage-score token pruning.

The pipeline is: thin SVD of the T x D feature matrix, truncation to the
smallest rank ``k`` whose cumulative explained variance reaches epsilon,
rank-``k`` leverage scores per token, then selection of the highest
leverage tokens.  Selected rows are returned in their original order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .errors import DegenerateInputError, ParamError, ShapeError
from .matrix_io import FeatureMatrix
from .svd_core import SvdFactors, thin_svd


@dataclass(frozen=True)
class PruneConfig:
    """Selection parameters.

    ``epsilon`` is the retained-variance threshold; it drives both the
    truncation rank and the cumulative-leverage cut unless
    ``rank_epsilon`` overrides the former.  Setting ``budget`` switches
    to fixed-count selection.
    """

    epsilon: float = 0.9
    min_tokens: int = 4
    budget: Optional[int] = None
    rank_epsilon: Optional[float] = None

    def __post_init__(self):
        if not 0.0 < self.epsilon <= 1.0:
            raise ParamError(f"epsilon must be in (0, 1], got {self.epsilon}")
        if self.rank_epsilon is not None and not 0.0 < self.rank_epsilon <= 1.0:
            raise ParamError(f"rank_epsilon must be in (0, 1], got {self.rank_epsilon}")
        if self.min_tokens < 1:
            raise ParamError(f"min_tokens must be >= 1, got {self.min_tokens}")
        if self.budget is not None and self.budget < 1:
            raise ParamError(f"budget must be >= 1, got {self.budget}")

    @property
    def mode(self) -> str:
        return "adaptive" if self.budget is None else "budget"

    @property
    def truncation_epsilon(self) -> float:
        return self.epsilon if self.rank_epsilon is None else self.rank_epsilon


@dataclass(frozen=True, eq=False)
class VarianceProfile:
    ratios: np.ndarray
    cumulative: np.ndarray
    truncation_rank: int


class Selection(NamedTuple):
    indices: np.ndarray
    m: int
    cumulative: float
    order: np.ndarray


@dataclass(frozen=True, eq=False)
class PruneResult:
    selected_indices: np.ndarray
    leverage_scores: np.ndarray
    truncation_rank: int
    cumulative_leverage_at_m: float
    permutation: np.ndarray
    pruned: FeatureMatrix
    factors: SvdFactors
    variance: VarianceProfile

    @property
    def m(self) -> int:
        return len(self.selected_indices)


def compensated_cumsum(values) -> np.ndarray:
    """Running sum with Neumaier compensation."""
    out = np.empty(len(values))
    total = 0.0
    comp = 0.0
    for i, x in enumerate(np.asarray(values, dtype=np.float64).tolist()):
        t = total + x
        if abs(total) >= abs(x):
            comp += (total - t) + x
        else:
            comp += (x - t) + total
        total = t
        out[i] = total + comp
    return out


def _first_reaching(cumulative: np.ndarray, threshold: float) -> int:
    # 1-based count; if rounding keeps the sum just under 1, take everything.
    hits = np.flatnonzero(cumulative >= threshold)
    return int(hits[0]) + 1 if len(hits) else len(cumulative)


def variance_profile(f, epsilon: float) -> VarianceProfile:
    """Explained-variance ratios, their running sum and the truncation rank.

    ``f`` may be an :class:`SvdFactors` or a bare sequence of singular values.
    """
    if not 0.0 < epsilon <= 1.0:
        raise ParamError(f"epsilon must be in (0, 1], got {epsilon}")
    s = np.asarray(getattr(f, "singular_values", f), dtype=np.float64)
    if s.ndim != 1 or len(s) == 0:
        raise ShapeError("singular values must be a non-empty 1-D sequence")
    energy = s * s
    total = math.fsum(energy)
    if total == 0.0:
        raise DegenerateInputError("all singular values are zero")
    ratios = energy / total
    cumulative = compensated_cumsum(ratios)
    return VarianceProfile(
        ratios=ratios,
        cumulative=cumulative,
        truncation_rank=_first_reaching(cumulative, epsilon),
    )


def leverage_scores(f: SvdFactors, k: int) -> np.ndarray:
    """Mean squared projection of each token onto the top-``k`` left singular vectors."""
    u = np.asarray(f.U, dtype=np.float64)
    if not 1 <= k <= u.shape[1]:
        raise ParamError(f"k must be in [1, {u.shape[1]}], got {k}")
    tokens = u.shape[0]
    if k == tokens:
        # U[:, :k] is square orthogonal, so every row has unit norm exactly.
        return np.full(tokens, 1.0 / tokens)
    return np.einsum("ij,ij->i", u[:, :k], u[:, :k]) / k


def select_tokens(scores: Sequence[float], cfg: PruneConfig) -> Selection:
    """Pick tokens by descending score; ties go to the lower index."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 1 or len(scores) == 0:
        raise ShapeError("scores must be a non-empty 1-D sequence")
    if np.any(scores < 0) or not np.all(np.isfinite(scores)):
        raise ParamError("scores must be finite and non-negative")
    tokens = len(scores)
    order = np.argsort(-scores, kind="stable")
    cumulative = compensated_cumsum(scores[order])

    if cfg.budget is not None:
        m = min(cfg.budget, tokens)
    else:
        m = _first_reaching(cumulative, cfg.epsilon)
        m = min(max(m, min(cfg.min_tokens, tokens)), tokens)

    indices = np.sort(order[:m])
    return Selection(indices=indices, m=m, cumulative=float(cumulative[m - 1]), order=order)


def prune(m, cfg: PruneConfig | None = None, method: str = "lapack") -> PruneResult:
    """Run the full pruning pipeline on a feature matrix."""
    cfg = cfg or PruneConfig()
    matrix = m if isinstance(m, FeatureMatrix) else FeatureMatrix(m)
    factors = thin_svd(matrix, method=method)
    profile = variance_profile(factors, cfg.truncation_epsilon)
    scores = leverage_scores(factors, profile.truncation_rank)
    chosen = select_tokens(scores, cfg)
    pruned = FeatureMatrix(matrix.data[chosen.indices])
    return PruneResult(
        selected_indices=chosen.indices,
        leverage_scores=scores,
        truncation_rank=profile.truncation_rank,
        cumulative_leverage_at_m=chosen.cumulative,
        permutation=chosen.order,
        pruned=pruned,
        factors=factors,
        variance=profile,
    )
