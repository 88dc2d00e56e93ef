import enum
from dataclasses import dataclass

from neunets.data.datasets import DatasetError

HOUR = 3600.0


class BudgetTier(enum.Enum):
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"


TIER_HOURS = {BudgetTier.LOW: 2.0, BudgetTier.MEDIUM: 5.0, BudgetTier.HIGH: 16.0}

# largest dataset size (inclusive) of the low and medium tiers
TIER_LIMITS = {
    "image": (10_000, 75_000),
    "text": (250_000, 2_000_000),
}


@dataclass(frozen=True)
class Budget:
    tier: BudgetTier
    cap_seconds: float


def classify_budget(n_examples: int, domain: str, divisor: float = 1.0) -> Budget:
    """Budget tier of a dataset; `divisor` shrinks the wall-clock cap for desk-scale runs"""
    if n_examples < 1:
        raise DatasetError(f"Cannot budget an empty dataset ({n_examples} examples)")
    if domain not in TIER_LIMITS:
        raise DatasetError(f"Unknown domain {domain!r}")
    if divisor <= 0:
        raise DatasetError(f"Budget divisor must be positive, got {divisor}")
    low, medium = TIER_LIMITS[domain]
    if n_examples <= low:
        tier = BudgetTier.LOW
    elif n_examples <= medium:
        tier = BudgetTier.MEDIUM
    else:
        tier = BudgetTier.HIGH
    return Budget(tier=tier, cap_seconds=TIER_HOURS[tier] * HOUR / divisor)
