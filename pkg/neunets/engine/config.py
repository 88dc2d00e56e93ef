"""Request validation: what a synthesis run will do, decided before any training"""
from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from neunets.data.budget import HOUR, TIER_HOURS, BudgetTier, classify_budget
from neunets.data.datasets import Dataset, DatasetError, RawImages
from neunets.data.embeddings import load_embeddings
from neunets.data.formats import load_raw
from neunets.data.images import preprocess_images, resolution_for
from neunets.data.text import Vocabulary, preprocess_text
from neunets.engine.settings import Settings
from neunets.errors import NeunetsError
from neunets.search.plugin import synthesizer_registry
from neunets.search.tapas.lde import LifelongDatabase

logger = logging.getLogger(__name__)

AUTO = "auto"


class ValidationError(NeunetsError):
    pass


@dataclass
class SynthesisRequest:
    dataset: str
    # detected from the dataset layout when not given
    domain: Optional[str] = None
    algorithm: str = AUTO
    budget: str = AUTO
    budget_divisor: float = 1.0
    finegrain: bool = False
    warm_start: bool = True
    seed: int = 0
    out: Optional[str] = None
    max_cycles: Optional[int] = None
    # epochs per candidate, the synthesizer's default when not given
    epochs: Optional[int] = None
    max_workers: int = 2
    resolution: Optional[int] = None
    vocabulary_size: int = 20000
    max_length: int = 100
    embeddings: Optional[str] = None


@dataclass
class RunConfig:
    dataset: str
    domain: str
    algorithm: str
    # why `algorithm` was chosen; the engine's own policy when the request said auto
    selection_reason: str
    tier: BudgetTier
    cap_seconds: float
    n_examples: int
    n_classes: int
    finegrain: bool = False
    warm_start: bool = True
    seed: int = 0
    out: Optional[str] = None
    max_cycles: Optional[int] = None
    epochs: Optional[int] = None
    max_workers: int = 2
    resolution: Optional[int] = None
    vocabulary_size: int = 20000
    max_length: int = 100
    embeddings: Optional[str] = None


def select_algorithm(domain: str, tier: BudgetTier, experiences: int) -> tuple[str, str]:
    """Auto-selection policy: evolution for small image tasks, prediction when experience exists"""
    if domain == "image" and tier is BudgetTier.LOW:
        return "ncevolve", "auto: image dataset in the low budget tier, evolving the template"
    if experiences > 0:
        return "tapas", f"auto: the lifelong database holds {experiences} experiments"
    return "hyperband", "auto: no experiments to predict from, successive halving"


def _budget(request: SynthesisRequest, n_examples: int, domain: str) -> tuple[BudgetTier, float]:
    budget = classify_budget(n_examples, domain, request.budget_divisor)
    if request.budget == AUTO:
        return budget.tier, budget.cap_seconds
    try:
        tier = BudgetTier(request.budget)
    except ValueError:
        choices = ", ".join([AUTO] + [t.value for t in BudgetTier])
        raise ValidationError(f"Unknown budget {request.budget!r}, expected one of {choices}")
    return tier, TIER_HOURS[tier] * HOUR / request.budget_divisor


def validate_request(request: SynthesisRequest, settings: Settings) -> RunConfig:
    """Check the dataset and the options and settle the algorithm and budget

    :raises ValidationError: for a missing or unreadable dataset, fewer than two classes,
        unknown options or a TAPAS request without any experience to learn from
    """
    if request.algorithm != AUTO and request.algorithm not in synthesizer_registry:
        choices = ", ".join([AUTO] + sorted(synthesizer_registry))
        raise ValidationError(f"Unknown algorithm {request.algorithm!r}, expected one of {choices}")
    for name in ("max_cycles", "epochs"):
        value = getattr(request, name)
        if value is not None and value < 1:
            raise ValidationError(f"{name} must be >= 1, got {value}")
    if request.max_workers < 1:
        raise ValidationError(f"max_workers must be >= 1, got {request.max_workers}")
    if request.embeddings is not None and not Path(request.embeddings).is_file():
        raise ValidationError(f"No embedding file at {request.embeddings}")
    try:
        raw, _ = load_raw(request.dataset)
        raw.validate()
        domain = "image" if isinstance(raw, RawImages) else "text"
        if request.domain is not None and request.domain != domain:
            raise ValidationError(f"{request.dataset} holds a {domain} dataset, not {request.domain}")
        if len(raw.classes) < 2:
            raise ValidationError(f"{request.dataset} defines {len(raw.classes)} classes, at least 2 are needed")
        n_examples = len(raw.labels)
        tier, cap_seconds = _budget(request, n_examples, domain)
    except DatasetError as e:
        raise ValidationError(str(e)) from e

    experiences = len(LifelongDatabase(settings.lde_path)) if settings.lde_path.exists() else 0
    if request.algorithm == AUTO:
        algorithm, reason = select_algorithm(domain, tier, experiences)
    else:
        algorithm, reason = request.algorithm, "requested"
        if algorithm == "tapas" and experiences == 0:
            raise ValidationError(
                f"Insufficient experience: the lifelong database {settings.lde_path} is empty. "
                f"Run `neunets lde init` or `neunets lde import` first."
            )
    logger.info(f"{request.dataset}: {n_examples} {domain} examples, {tier.value} budget, {algorithm} ({reason})")
    return RunConfig(
        dataset=str(request.dataset),
        domain=domain,
        algorithm=algorithm,
        selection_reason=reason,
        tier=tier,
        cap_seconds=cap_seconds,
        n_examples=n_examples,
        n_classes=len(raw.classes),
        finegrain=request.finegrain,
        warm_start=request.warm_start,
        seed=request.seed,
        out=request.out,
        max_cycles=request.max_cycles,
        epochs=request.epochs,
        max_workers=request.max_workers,
        resolution=request.resolution,
        vocabulary_size=request.vocabulary_size,
        max_length=request.max_length,
        embeddings=request.embeddings,
    )


def load_dataset(config: RunConfig) -> Dataset:
    """The model-ready dataset of a run; the same config always yields the same splits"""
    raw, raw_test = load_raw(config.dataset)
    if config.domain == "image":
        resolution = resolution_for(config.algorithm, config.resolution)
        return preprocess_images(raw, resolution, raw_test, seed=config.seed)
    dataset = preprocess_text(raw, config.vocabulary_size, config.max_length, raw_test=raw_test, seed=config.seed)
    if config.embeddings is not None:
        matrix = load_embeddings(config.embeddings, Vocabulary(dataset.vocabulary), seed=config.seed)
        dataset = dataclasses.replace(dataset, embeddings=matrix)
    return dataset
