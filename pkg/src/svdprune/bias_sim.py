"""Monte-Carlo model of positional bias in causally-masked attention scores.

Each trial draws standard-normal logits for every (query, key) pair with
key <= query, adds ``self_boost`` on the diagonal, and softmaxes every
query row over its unmasked keys.  The attention a key receives is summed
over its attenders and divided either by the sequence length
(``average_over_all``) or by its number of attenders
(``average_over_attenders``).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ParamError

SCHEMES = ("average_over_all", "average_over_attenders")


@dataclass(frozen=True)
class BiasSimConfig:
    seq_len: int = 576
    trials: int = 1000
    self_boost: float = 0.0
    scheme: str = "average_over_all"
    seed: int = 0

    def __post_init__(self):
        if self.seq_len < 2:
            raise ParamError(f"seq_len must be >= 2, got {self.seq_len}")
        if self.trials < 1:
            raise ParamError(f"trials must be >= 1, got {self.trials}")
        if not self.self_boost >= 0:
            raise ParamError(f"self_boost must be >= 0, got {self.self_boost}")
        if self.scheme not in SCHEMES:
            raise ParamError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")


@dataclass(frozen=True, eq=False)
class BiasProfile:
    mean_received: np.ndarray
    stderr: np.ndarray

    @property
    def argmax_position(self) -> int:
        return int(np.argmax(self.mean_received))

    def write_csv(self, fp) -> None:
        writer = csv.writer(fp, lineterminator="\n")
        writer.writerow(["position", "mean", "stderr"])
        for t, (mean, err) in enumerate(zip(self.mean_received, self.stderr)):
            writer.writerow([t, repr(float(mean)), repr(float(err))])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fp:
            self.write_csv(fp)


def causal_attention(logits: np.ndarray, self_boost: float = 0.0) -> np.ndarray:
    """Row-softmax of ``logits`` under a causal mask, with a diagonal bonus."""
    n = logits.shape[-1]
    masked = np.where(np.tril(np.ones((n, n), dtype=bool)), logits, -np.inf)
    masked = masked + self_boost * np.eye(n)
    masked -= masked.max(axis=-1, keepdims=True)
    weights = np.exp(masked)
    return weights / weights.sum(axis=-1, keepdims=True)


def received_attention(weights: np.ndarray, scheme: str) -> np.ndarray:
    """Per-key attention score from a causal weight matrix."""
    n = weights.shape[-1]
    received = weights.sum(axis=-2)
    if scheme == "average_over_all":
        return received / n
    if scheme == "average_over_attenders":
        return received / (n - np.arange(n))
    raise ParamError(f"unknown scheme {scheme!r}")


def expected_received(seq_len: int, scheme: str) -> np.ndarray:
    """Exact expectation at zero self-boost.

    Exchangeable logits give every visible key of query ``q`` an expected
    weight of ``1 / (q + 1)``.
    """
    n = seq_len
    tail = np.cumsum((1.0 / np.arange(1, n + 1))[::-1])[::-1]
    if scheme == "average_over_all":
        return tail / n
    return tail / (n - np.arange(n))


def trial_generator(seed: int, trial: int) -> np.random.Generator:
    # Per-trial streams keep results independent of execution order.
    return np.random.default_rng(np.random.SeedSequence([seed, trial]))


def simulate_bias(cfg: BiasSimConfig) -> BiasProfile:
    """Mean received attention per key position, with standard errors."""
    n = cfg.seq_len
    total = np.zeros(n)
    total_sq = np.zeros(n)
    for trial in range(cfg.trials):
        logits = trial_generator(cfg.seed, trial).standard_normal((n, n))
        scores = received_attention(causal_attention(logits, cfg.self_boost), cfg.scheme)
        total += scores
        total_sq += scores * scores
    mean = total / cfg.trials
    if cfg.trials > 1:
        var = np.maximum(total_sq - cfg.trials * mean * mean, 0.0) / (cfg.trials - 1)
        stderr = np.sqrt(var / cfg.trials)
    else:
        stderr = np.zeros(n)
    return BiasProfile(mean_received=mean, stderr=stderr)
