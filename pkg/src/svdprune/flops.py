"""Analytic FLOPs for a vision encoder -> projector -> LLM pipeline.

Each transformer layer costs ``4*n*d**2 + 2*n**2*d + 2*n*d*m`` for ``n``
tokens, hidden size ``d`` and FFN width ``m``.  Pruning happens after the
encoder, so only the projector and the LLM see the retained token count.
Defaults describe LLaVA-1.5-7B (CLIP ViT-L/14 at 336px, Vicuna-7B).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Iterable, Mapping

from .errors import ParamError


@dataclass(frozen=True)
class VisionConfig:
    layers: int = 24
    hidden: int = 1024
    ffn: int = 4096
    tokens: int = 577


@dataclass(frozen=True)
class ProjectorConfig:
    in_dim: int = 1024
    out_dim: int = 4096


@dataclass(frozen=True)
class LlmConfig:
    layers: int = 32
    hidden: int = 4096
    ffn: int = 11008


@dataclass(frozen=True)
class FlopsConfig:
    vision: VisionConfig = field(default_factory=VisionConfig)
    projector: ProjectorConfig = field(default_factory=ProjectorConfig)
    llm: LlmConfig = field(default_factory=LlmConfig)
    text_tokens: int = 50
    # The layer formula is stated at 2 FLOPs per MAC; other values rescale it.
    flops_per_mac_llm_vision: int = 2
    flops_per_mac_projector: int = 1
    baseline_tokens: int = 576

    def __post_init__(self):
        for section in (self.vision, self.projector, self.llm):
            for f in fields(section):
                if getattr(section, f.name) < 1:
                    raise ParamError(f"{f.name} must be positive")
        if self.text_tokens < 0:
            raise ParamError("text_tokens must be non-negative")
        if self.flops_per_mac_llm_vision <= 0 or self.flops_per_mac_projector <= 0:
            raise ParamError("flops_per_mac values must be positive")
        if self.baseline_tokens < 1:
            raise ParamError("baseline_tokens must be positive")

    @classmethod
    def from_dict(cls, data: Mapping) -> "FlopsConfig":
        """Build a config from a (possibly partial) nested mapping.

        Keys must match field names exactly; unknown keys raise ParamError.
        """
        sections = {"vision": VisionConfig, "projector": ProjectorConfig, "llm": LlmConfig}
        known = {f.name for f in fields(cls)}
        kwargs = {}
        for key, value in data.items():
            if key not in known:
                raise ParamError(f"unknown config key {key!r}")
            if key in sections:
                if not isinstance(value, Mapping):
                    raise ParamError(f"config section {key!r} must be an object")
                sub_known = {f.name for f in fields(sections[key])}
                unknown = set(value) - sub_known
                if unknown:
                    raise ParamError(f"unknown config key(s) in {key!r}: {sorted(unknown)}")
                kwargs[key] = sections[key](**{k: _as_int(k, v) for k, v in value.items()})
            else:
                kwargs[key] = _as_int(key, value)
        return cls(**kwargs)

    @classmethod
    def from_json(cls, path) -> "FlopsConfig":
        with open(path) as fp:
            try:
                data = json.load(fp)
            except json.JSONDecodeError as exc:
                raise ParamError(f"invalid JSON in {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ParamError("config file must contain a JSON object")
        return cls.from_dict(data)


def _as_int(key, value) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ParamError(f"config value {key!r} must be an integer, got {value!r}")
    return value


@dataclass(frozen=True)
class FlopsReport:
    retained_tokens: int
    vision_gflops: float
    projector_gflops: float
    llm_tflops: float
    total_tflops: float
    reduction_percent: float

    def as_dict(self) -> dict:
        return asdict(self)


def transformer_flops(layers: int, tokens: int, hidden: int, ffn: int, flops_per_mac: float = 2) -> float:
    """FLOPs of ``layers`` dense transformer layers over ``tokens`` tokens."""
    n, d, m = tokens, hidden, ffn
    return (flops_per_mac / 2) * layers * (4 * n * d * d + 2 * n * n * d + 2 * n * d * m)


def _stage_flops(retained: int, cfg: FlopsConfig) -> tuple[float, float, float]:
    v, p, l = cfg.vision, cfg.projector, cfg.llm
    vision = transformer_flops(v.layers, v.tokens, v.hidden, v.ffn, cfg.flops_per_mac_llm_vision)
    projector = retained * (p.in_dim * p.out_dim + p.out_dim * p.out_dim) * cfg.flops_per_mac_projector
    llm = transformer_flops(
        l.layers, retained + cfg.text_tokens, l.hidden, l.ffn, cfg.flops_per_mac_llm_vision
    )
    return vision, projector, llm


def estimate_flops(retained_vision_tokens: int, cfg: FlopsConfig | None = None) -> FlopsReport:
    """Per-stage FLOPs when ``retained_vision_tokens`` reach the projector and LLM."""
    cfg = cfg or FlopsConfig()
    retained = retained_vision_tokens
    if isinstance(retained, bool) or not isinstance(retained, int):
        raise ParamError(f"retained token count must be an integer, got {retained!r}")
    if not 1 <= retained <= cfg.baseline_tokens:
        raise ParamError(f"retained tokens must be in [1, {cfg.baseline_tokens}], got {retained}")

    vision, projector, llm = _stage_flops(retained, cfg)
    total = vision + projector + llm
    baseline = sum(_stage_flops(cfg.baseline_tokens, cfg))
    reduction = 100.0 * (1.0 - total / baseline)
    return FlopsReport(
        retained_tokens=retained,
        vision_gflops=vision / 1e9,
        projector_gflops=projector / 1e9,
        llm_tflops=llm / 1e12,
        total_tflops=total / 1e12,
        reduction_percent=reduction,
    )


def fit_text_tokens(
    llm_tflops: Mapping[int, float],
    cfg: FlopsConfig | None = None,
    candidates: Iterable[int] = range(0, 201),
) -> int:
    """Text-token count minimizing squared relative error against measured LLM TFLOPs.

    ``llm_tflops`` maps retained vision tokens to an observed LLM cost.
    Ties resolve to the smallest candidate.
    """
    cfg = cfg or FlopsConfig()
    best, best_err = None, float("inf")
    for text in candidates:
        trial = replace(cfg, text_tokens=text)
        err = sum(
            (estimate_flops(n, trial).llm_tflops / ref - 1.0) ** 2 for n, ref in llm_tflops.items()
        )
        if err < best_err:
            best, best_err = text, err
    return best


def format_table(reports: Iterable[FlopsReport]) -> str:
    """Aligned text table with the same columns as a FLOPs breakdown."""
    lines = [
        f"{'Tokens':>6} {'Vision':>9} {'Projector':>9} {'LLM':>7} {'Total':>7} {'Reduction':>9}",
        f"{'':>6} {'[G]':>9} {'[G]':>9} {'[T]':>7} {'[T]':>7} {'[%]':>9}",
    ]
    for r in reports:
        lines.append(
            f"{r.retained_tokens:>6d} {r.vision_gflops:>9.3f} {r.projector_gflops:>9.3f} "
            f"{r.llm_tflops:>7.3f} {r.total_tflops:>7.3f} {r.reduction_percent:>9.1f}"
        )
    return "\n".join(lines)
