"""Relative computation budget of a backbone.

Downsampling doubles the channel count, so one block costs the same at every
resolution (up to a per-stage weight for irregular channel plans).  The cost of
a backbone is therefore a weighted block count, and dilation is free.  All
arithmetic is done on :class:`fractions.Fraction` so that budget comparisons
are exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Sequence

from .arch import Architecture, BackboneFamily


def to_fraction(x) -> Fraction:
    if isinstance(x, Rational):
        return Fraction(x)
    if isinstance(x, float):
        # decimal meaning, so 0.1 means 1/10
        return Fraction(repr(x))
    return Fraction(str(x))


@dataclass(frozen=True)
class BudgetModel:
    reference_block_cost: Fraction = Fraction(1)
    fixed_overhead: Fraction = Fraction(0)

    def __post_init__(self):
        object.__setattr__(self, "reference_block_cost", to_fraction(self.reference_block_cost))
        object.__setattr__(self, "fixed_overhead", to_fraction(self.fixed_overhead))
        if self.reference_block_cost <= 0:
            raise ValueError("reference_block_cost must be positive")
        if self.fixed_overhead < 0:
            raise ValueError("fixed_overhead must be nonnegative")

    def to_dict(self) -> dict:
        return {"reference_block_cost": float(self.reference_block_cost),
                "fixed_overhead": float(self.fixed_overhead)}


def weighted_block_count(family: BackboneFamily, tau: Sequence[int]) -> Fraction:
    if len(tau) != family.num_stages:
        raise ValueError(
            f"stage code has {len(tau)} entries, {family.name} has {family.num_stages} stages")
    return sum((w * int(n) for w, n in zip(family.stage_weights, tau)), Fraction(0))


def backbone_cost(arch: Architecture, model: BudgetModel) -> Fraction:
    """Cost of the backbone; the operation code does not enter."""
    return model.fixed_overhead + model.reference_block_cost * weighted_block_count(
        arch.family, arch.stage_code)


def is_within_budget(tau: Sequence[int], family: BackboneFamily, budget,
                     tolerance=0) -> bool:
    tolerance = to_fraction(tolerance)
    if tolerance < 0:
        raise ValueError("tolerance must be nonnegative")
    return abs(weighted_block_count(family, tau) - to_fraction(budget)) <= tolerance
