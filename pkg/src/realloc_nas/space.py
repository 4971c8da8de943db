"""Stage reallocation space: per-stage branch sets under a block budget."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

from .arch import BackboneFamily
from .budget import to_fraction, weighted_block_count

RESNET_BRANCH_SETS = (
    tuple(range(1, 11)),
    tuple(range(1, 11)),
    (2, 3, 5, 6, 9, 11, 14, 17, 20, 23),
    (2, 3, 4, 6, 7, 9, 11, 13, 15, 17),
)

MOBILENETV2_BRANCH_SETS = (
    tuple(range(1, 6)),
    tuple(range(1, 6)),
    tuple(range(3, 8)),
    tuple(range(2, 7)),
    tuple(range(2, 7)),
)


def default_branch_sets(family: BackboneFamily) -> tuple[tuple[int, ...], ...]:
    if family.block_kind == "inverted_residual":
        return MOBILENETV2_BRANCH_SETS
    if family.num_stages == 4:
        return RESNET_BRANCH_SETS
    raise ValueError(f"no default branch sets for family {family.name!r}")


class InfeasibleSpaceError(ValueError):
    """The space contains no allocation meeting the budget."""


@dataclass(frozen=True)
class AllocationSpace:
    family: BackboneFamily
    branch_sets: tuple[tuple[int, ...], ...]
    budget: Fraction
    tolerance: Fraction = Fraction(0)

    def __post_init__(self):
        sets = tuple(tuple(int(x) for x in s) for s in self.branch_sets)
        object.__setattr__(self, "branch_sets", sets)
        object.__setattr__(self, "budget", to_fraction(self.budget))
        object.__setattr__(self, "tolerance", to_fraction(self.tolerance))
        if len(sets) != self.family.num_stages:
            raise ValueError(
                f"{len(sets)} branch sets for {self.family.num_stages} stages")
        for i, s in enumerate(sets):
            if not s:
                raise ValueError(f"branch set {i + 1} is empty")
            if any(b <= a for a, b in zip(s, s[1:])):
                raise ValueError(f"branch set {i + 1} is not strictly increasing: {s}")
            if s[0] < 1:
                raise ValueError(f"branch set {i + 1} allows fewer than one block")
        if self.tolerance < 0:
            raise ValueError("tolerance must be nonnegative")

    @classmethod
    def default(cls, family: BackboneFamily, budget=None, tolerance=0) -> "AllocationSpace":
        if budget is None:
            if family.baseline is None:
                raise ValueError(f"{family.name} has no baseline; give a budget")
            budget = weighted_block_count(family, family.baseline)
        return cls(family, default_branch_sets(family), budget, tolerance)

    def integer_form(self) -> tuple[tuple[int, ...], int, int]:
        """Weights, budget and tolerance scaled by a common denominator to exact ints."""
        values = [*self.family.stage_weights, self.budget, self.tolerance]
        scale = math.lcm(*(v.denominator for v in values))
        weights = tuple(int(w * scale) for w in self.family.stage_weights)
        return weights, int(self.budget * scale), int(self.tolerance * scale)

    def weighted_range(self) -> tuple[Fraction, Fraction]:
        w = self.family.stage_weights
        lo = sum((wi * s[0] for wi, s in zip(w, self.branch_sets)), Fraction(0))
        hi = sum((wi * s[-1] for wi, s in zip(w, self.branch_sets)), Fraction(0))
        return lo, hi

    def contains(self, tau: Sequence[int]) -> bool:
        return (len(tau) == len(self.branch_sets)
                and all(t in s for t, s in zip(tau, self.branch_sets))
                and abs(weighted_block_count(self.family, tau) - self.budget) <= self.tolerance)

    def to_dict(self) -> dict:
        return {
            "family": self.family.name,
            "branch_sets": [list(s) for s in self.branch_sets],
            "budget": float(self.budget),
            "tolerance": float(self.tolerance),
        }


def iter_allocations(space: AllocationSpace) -> Iterator[tuple[int, ...]]:
    """Yield feasible stage codes in lexicographic order.

    Depth-first over branch sets; a branch is pruned when the remaining stages
    cannot bring the weighted total back inside ``budget +/- tolerance``.
    """
    weights, budget, tol = space.integer_form()
    sets = space.branch_sets
    n = len(sets)
    lo_target, hi_target = budget - tol, budget + tol
    # suffix_min[i] / suffix_max[i]: weighted extent of stages i..n-1
    suffix_min = [0] * (n + 1)
    suffix_max = [0] * (n + 1)
    for i in range(n - 1, -1, -1):
        suffix_min[i] = suffix_min[i + 1] + weights[i] * sets[i][0]
        suffix_max[i] = suffix_max[i + 1] + weights[i] * sets[i][-1]

    prefix: list[int] = []

    def walk(i: int, acc: int):
        if i == n:
            yield tuple(prefix)
            return
        for t in sets[i]:
            total = acc + weights[i] * t
            if total + suffix_min[i + 1] > hi_target:
                break  # branch sets are increasing
            if total + suffix_max[i + 1] < lo_target:
                continue
            prefix.append(t)
            yield from walk(i + 1, total)
            prefix.pop()

    yield from walk(0, 0)


def enumerate_allocations(space: AllocationSpace) -> list[tuple[int, ...]]:
    return list(iter_allocations(space))


def count_allocations(space: AllocationSpace) -> int:
    """Count feasible stage codes by dynamic programming over partial sums.

    Apart from the integer scaling this shares nothing with
    :func:`iter_allocations`, so the two serve as mutual checks.
    """
    weights, budget, tol = space.integer_form()
    counts: dict[int, int] = {0: 1}
    for w, branch in zip(weights, space.branch_sets):
        nxt: dict[int, int] = defaultdict(int)
        for acc, c in counts.items():
            for t in branch:
                nxt[acc + w * t] += c
        counts = nxt
    return sum(c for s, c in counts.items() if abs(s - budget) <= tol)


def operation_space_size(num_blocks: int, num_ops: int = 3) -> int:
    if num_blocks < 0 or num_ops < 1:
        raise ValueError("need num_blocks >= 0 and num_ops >= 1")
    return num_ops ** num_blocks
