"""Published baseline and reallocated codes, used as regression fixtures."""

from __future__ import annotations

from dataclasses import dataclass

from .arch import Architecture, get_family, parse_int_list, validate_architecture, validate_stage_code
from .budget import weighted_block_count


@dataclass(frozen=True)
class StagePair:
    label: str
    family: str
    baseline: str
    reallocated: str


@dataclass(frozen=True)
class FinalCode:
    label: str
    family: str
    stage_code: str
    op_code: str
    budget: float


STAGE_PAIRS = (
    StagePair("MV2", "mobilenetv2", "[1,1,2,3,4,3,3,1,1,1]", "[1,1,2,2,3,4,4,1,1,1]"),
    StagePair("Res18", "resnet_basic", "[2,2,2,2]", "[1,1,2,4]"),
    StagePair("Res50", "resnet_bottleneck", "[3,4,6,3]", "[1,3,5,7]"),
    StagePair("Res101", "resnet_bottleneck", "[3,4,23,3]", "[2,3,17,11]"),
    StagePair("ReX50", "resnext", "[3,4,6,3]", "[2,2,6,6]"),
    StagePair("ReX101", "resnext", "[3,4,23,3]", "[3,4,15,11]"),
)

FINAL_CODES = (
    FinalCode("CR-MobileNetV2", "mobilenetv2", "[1,1,2,2,3,4,4,1,1,1]",
              "[0,1,0,1,0,2,0,1,1,0,0,1,1,0,1,1,0,2,0,0]", 16.0),
    FinalCode("CR-ResNet18", "resnet_basic", "[1,1,2,4]", "[0,0,1,0,1,0,2,1]", 8.0),
    FinalCode("CR-ResNet50", "resnet_bottleneck", "[1,3,5,7]",
              "[0,0,1,0,0,0,1,2,0,0,1,0,2,1,1,2]", 16.0),
    FinalCode("CR-ResNet101", "resnet_bottleneck", "[2,3,17,11]",
              "[0,0,0,0,0,0,1,0,1,0,0,0,2,0,0,0,1,0,1,0,1,0,1,1,0,0,1,0,1,2,0,1,1]", 33.0),
)


@dataclass(frozen=True)
class Check:
    label: str
    ok: bool
    detail: str


def check_stage_pair(pair: StagePair) -> Check:
    family = get_family(pair.family)
    base = family.searchable_part(parse_int_list(pair.baseline))
    new = family.searchable_part(parse_int_list(pair.reallocated))
    for code in (base, new):
        result = validate_stage_code(family, code)
        if not result:
            return Check(pair.label, False, result.violation.message)
    wb, wn = weighted_block_count(family, base), weighted_block_count(family, new)
    return Check(pair.label, wb == wn,
                 f"{pair.baseline} -> {pair.reallocated}: weighted blocks {float(wb):g} vs {float(wn):g}")


def check_final_code(code: FinalCode) -> Check:
    family = get_family(code.family)
    stage = family.searchable_part(parse_int_list(code.stage_code))
    ops = parse_int_list(code.op_code)
    result = validate_architecture(Architecture(family, stage, ops))
    if not result:
        return Check(code.label, False, result.violation.message)
    weighted = weighted_block_count(family, stage)
    return Check(code.label, weighted == code.budget,
                 f"{len(ops)} choice blocks, weighted blocks {float(weighted):g}")


def verify_all() -> list[Check]:
    return [check_stage_pair(p) for p in STAGE_PAIRS] + [check_final_code(c) for c in FINAL_CODES]
