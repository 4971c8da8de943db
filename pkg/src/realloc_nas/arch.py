"""Architecture genotypes: backbone families, stage codes and operation codes.

An architecture is a pair of integer codes.  The stage code gives the number
of blocks in every searchable stage; the operation code gives one dilation
choice per block (0, 1, 2 for dilation 1, 2, 3).  Both render as bracketed
integer lists joined by `` / ``::

    [1,3,5,7] / [0,0,1,0,0,0,1,2,0,0,1,0,2,1,1,2]
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

BLOCK_KINDS = ("basic", "bottleneck", "grouped_bottleneck", "inverted_residual")

#: Operation code -> dilation rate of the searched 3x3 convolution.
DILATIONS = (1, 2, 3)
NUM_OPS = len(DILATIONS)


class CodeError(ValueError):
    """Raised for malformed or invalid architecture code text."""


@dataclass(frozen=True)
class BackboneFamily:
    name: str
    num_stages: int
    block_kind: str
    stage_weights: tuple[Fraction, ...]
    fixed_prefix_blocks: int = 0
    fixed_suffix_blocks: int = 0
    channel_plan: tuple[int, ...] = ()
    #: Stride of the first block of each searchable stage.
    stage_strides: tuple[int, ...] = ()
    baseline: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.block_kind not in BLOCK_KINDS:
            raise ValueError(f"unknown block kind {self.block_kind!r}")
        weights = tuple(Fraction(w) for w in self.stage_weights)
        object.__setattr__(self, "stage_weights", weights)
        if len(weights) != self.num_stages:
            raise ValueError(
                f"{self.name}: {len(weights)} stage weights for {self.num_stages} stages")
        if any(w <= 0 for w in weights):
            raise ValueError(f"{self.name}: stage weights must be positive")
        if self.fixed_prefix_blocks < 0 or self.fixed_suffix_blocks < 0:
            raise ValueError(f"{self.name}: negative fixed block count")
        if not self.stage_strides:
            object.__setattr__(self, "stage_strides", (1,) + (2,) * (self.num_stages - 1))
        if len(self.stage_strides) != self.num_stages:
            raise ValueError(f"{self.name}: stage_strides length mismatch")
        if self.baseline is not None:
            object.__setattr__(self, "baseline", tuple(self.baseline))

    @property
    def uniform(self) -> bool:
        return all(w == 1 for w in self.stage_weights)

    def choice_blocks(self, stage_code: Sequence[int]) -> int:
        """Number of blocks carrying an operation choice for ``stage_code``."""
        return self.fixed_prefix_blocks + sum(stage_code) + self.fixed_suffix_blocks

    def full_block_vector(self, stage_code: Sequence[int]) -> tuple[int, ...]:
        return ((1,) * self.fixed_prefix_blocks + tuple(stage_code)
                + (1,) * self.fixed_suffix_blocks)

    def searchable_part(self, blocks: Sequence[int]) -> tuple[int, ...]:
        """Inverse of :meth:`full_block_vector`; also accepts a bare stage code."""
        blocks = tuple(blocks)
        if len(blocks) == self.num_stages:
            return blocks
        full_len = self.fixed_prefix_blocks + self.num_stages + self.fixed_suffix_blocks
        if len(blocks) != full_len:
            raise CodeError(
                f"{self.name}: stage code has {len(blocks)} entries, expected "
                f"{self.num_stages} (or {full_len} with fixed blocks)")
        head = blocks[:self.fixed_prefix_blocks]
        tail = blocks[len(blocks) - self.fixed_suffix_blocks:]
        if any(b != 1 for b in head + tail):
            raise CodeError(f"{self.name}: fixed stem/tail block counts must be 1")
        return blocks[self.fixed_prefix_blocks:len(blocks) - self.fixed_suffix_blocks]


@dataclass(frozen=True)
class Architecture:
    """Stage code plus operation code for one family.

    Construction does not validate; see :func:`validate_architecture`.
    """

    family: BackboneFamily
    stage_code: tuple[int, ...]
    op_code: tuple[int, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "stage_code", tuple(int(x) for x in self.stage_code))
        object.__setattr__(self, "op_code", tuple(int(x) for x in self.op_code))

    @property
    def num_blocks(self) -> int:
        return self.family.choice_blocks(self.stage_code)

    def with_ops(self, op_code: Sequence[int]) -> "Architecture":
        return Architecture(self.family, self.stage_code, tuple(op_code))


def builtin_families() -> dict[str, BackboneFamily]:
    one = Fraction(1)
    resnet_weights = (one,) * 4
    return {
        "resnet_basic": BackboneFamily(
            "resnet_basic", 4, "basic", resnet_weights,
            channel_plan=(64, 128, 256, 512), baseline=(2, 2, 2, 2)),
        "resnet_bottleneck": BackboneFamily(
            "resnet_bottleneck", 4, "bottleneck", resnet_weights,
            channel_plan=(256, 512, 1024, 2048), baseline=(3, 4, 6, 3)),
        "resnext": BackboneFamily(
            "resnext", 4, "grouped_bottleneck", resnet_weights,
            channel_plan=(256, 512, 1024, 2048), baseline=(3, 4, 6, 3)),
        # Full block vector is [1,1,m1..m5,1,1,1]; only m1..m5 are searchable.
        "mobilenetv2": BackboneFamily(
            "mobilenetv2", 5, "inverted_residual",
            (Fraction(3, 2), one, one, Fraction(3, 4), Fraction(5, 4)),
            fixed_prefix_blocks=2, fixed_suffix_blocks=3,
            channel_plan=(24, 32, 64, 96, 160),
            stage_strides=(2, 2, 2, 1, 2), baseline=(2, 3, 4, 3, 3)),
    }


def get_family(name: str) -> BackboneFamily:
    families = builtin_families()
    try:
        return families[name]
    except KeyError:
        raise KeyError(
            f"unknown family {name!r}; choose from {', '.join(sorted(families))}") from None


@dataclass(frozen=True)
class Violation:
    kind: str  # "stage_count", "zero_block_stage", "length_mismatch", "bad_code"
    message: str


@dataclass(frozen=True)
class ValidationResult:
    violation: Violation | None = None

    @property
    def ok(self) -> bool:
        return self.violation is None

    def __bool__(self) -> bool:
        return self.ok


def validate_stage_code(family: BackboneFamily, stage_code: Sequence[int]) -> ValidationResult:
    if len(stage_code) != family.num_stages:
        return ValidationResult(Violation(
            "stage_count",
            f"stage code has {len(stage_code)} entries, {family.name} has {family.num_stages} stages"))
    for i, n in enumerate(stage_code):
        if n < 1:
            return ValidationResult(Violation(
                "zero_block_stage", f"stage {i + 1} has {n} blocks; at least 1 required"))
    return ValidationResult()


def validate_architecture(arch: Architecture, num_ops: int = NUM_OPS) -> ValidationResult:
    """Check every genotype invariant; report the first one violated."""
    result = validate_stage_code(arch.family, arch.stage_code)
    if not result:
        return result
    expected = arch.num_blocks
    if len(arch.op_code) != expected:
        return ValidationResult(Violation(
            "length_mismatch",
            f"operation code has {len(arch.op_code)} entries, stage code implies {expected} blocks"))
    for b, o in enumerate(arch.op_code):
        if not 0 <= o < num_ops:
            return ValidationResult(Violation(
                "bad_code", f"block {b + 1} has operation {o}; allowed 0..{num_ops - 1}"))
    return ValidationResult()


def format_code(values: Sequence[int]) -> str:
    return "[" + ",".join(str(int(v)) for v in values) + "]"


def format_codes(arch: Architecture) -> str:
    return (format_code(arch.family.full_block_vector(arch.stage_code))
            + " / " + format_code(arch.op_code))


_LIST_RE = re.compile(r"^\[\s*(-?\d+(\s*,\s*-?\d+)*)?\s*,?\s*\]$")


def parse_int_list(text: str) -> tuple[int, ...]:
    text = text.strip()
    if not _LIST_RE.match(text):
        raise CodeError(f"malformed code list {text!r}")
    body = text[1:-1].strip().rstrip(",")
    if not body:
        return ()
    return tuple(int(tok) for tok in body.split(","))


def parse_codes(text: str, family: BackboneFamily, num_ops: int = NUM_OPS) -> Architecture:
    """Parse ``"[stage...] / [ops...]"`` into a validated :class:`Architecture`.

    The stage list may be either the searchable stage code or the full block
    vector including fixed stem/tail entries.
    """
    parts = text.split("/")
    if len(parts) != 2:
        raise CodeError(f"expected '<stage code> / <operation code>', got {text!r}")
    blocks = parse_int_list(parts[0])
    ops = parse_int_list(parts[1])
    arch = Architecture(family, family.searchable_part(blocks), ops)
    result = validate_architecture(arch, num_ops)
    if not result:
        raise CodeError(f"{result.violation.kind}: {result.violation.message}")
    return arch


def parse_stage_code(text: str, family: BackboneFamily) -> tuple[int, ...]:
    code = family.searchable_part(parse_int_list(text))
    result = validate_stage_code(family, code)
    if not result:
        raise CodeError(f"{result.violation.kind}: {result.violation.message}")
    return code
