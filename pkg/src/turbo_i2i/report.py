"""Itemized loss reports and loss-term weights."""

from __future__ import annotations

from dataclasses import dataclass, asdict

import torch

from .errors import ValidationError


@dataclass(frozen=True)
class LossWeights:
    """Weights of the composite objectives.

    Unpaired defaults: lambda_idt=1, lambda_gan=0.5.  Paired training uses
    lambda_gan=0.4 and lambda_clip=4 (pass `LossWeights.paired()`).  The
    pixel/perceptual split inside the reconstruction distance is a toolkit
    choice: heavier perceptual weights over-anchor small models to the input
    appearance and stall adversarial translation, so the default stays light.
    """

    lambda_idt: float = 1.0
    lambda_gan: float = 0.5
    lambda_clip: float = 4.0
    lambda_l1: float = 1.0
    lambda_lpips: float = 1.0

    def __post_init__(self):
        for name, v in asdict(self).items():
            if v < 0:
                raise ValidationError(f"{name} must be nonnegative, got {v}")

    @staticmethod
    def paired() -> "LossWeights":
        return LossWeights(lambda_gan=0.4, lambda_clip=4.0)

    def to_dict(self) -> dict:
        return asdict(self)


class LossReport:
    """Named scalar loss terms plus their weighted total.

    `total_tensor` carries the differentiable sum for backprop; `terms`,
    `weights` and `total` are plain floats for logging.  The float total is
    recomputed from the itemized terms, so it always equals the weighted
    sum exactly.
    """

    def __init__(self, terms: dict[str, torch.Tensor], weights: dict[str, float] | None = None,
                 meta: dict | None = None):
        weights = weights or {}
        self.weights = {k: float(weights.get(k, 1.0)) for k in terms}
        self.term_tensors = dict(terms)
        total = None
        for k, t in terms.items():
            piece = self.weights[k] * t
            total = piece if total is None else total + piece
        self.total_tensor = total
        self.terms = {k: float(t.detach()) for k, t in terms.items()}
        self.total = sum(self.weights[k] * v for k, v in self.terms.items())
        self.meta = dict(meta or {})
        self.extras: dict = {}  # non-serialized side channel (e.g. detached fakes)

    def to_dict(self) -> dict:
        d = {"terms": self.terms, "weights": self.weights, "total": self.total}
        if self.meta:
            d["meta"] = self.meta
        return d

    def __repr__(self) -> str:
        items = ", ".join(f"{k}={v:.4g}" for k, v in self.terms.items())
        return f"LossReport(total={self.total:.4g}, {items})"
