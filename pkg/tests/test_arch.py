from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from realloc_nas.arch import (
    Architecture,
    BackboneFamily,
    CodeError,
    builtin_families,
    format_codes,
    get_family,
    parse_codes,
    parse_int_list,
    validate_architecture,
)
from realloc_nas.golden import FINAL_CODES, STAGE_PAIRS

CR_RESNET101 = ("[2,3,17,11] / [0,0,0,0,0,0,1,0,1,0,0,0,2,0,0,0,1,0,1,0,1,0,1,1,0,0,1,"
                "0,1,2,0,1,1]")


class TestFamilies:
    def test_builtin_names(self):
        assert {"resnet_basic", "resnet_bottleneck", "resnext", "mobilenetv2"} <= set(
            builtin_families())

    def test_baselines(self):
        fam = builtin_families()
        assert fam["resnet_bottleneck"].baseline == (3, 4, 6, 3)
        assert fam["resnet_basic"].baseline == (2, 2, 2, 2)
        mv2 = fam["mobilenetv2"]
        assert mv2.baseline == (2, 3, 4, 3, 3)
        assert mv2.full_block_vector(mv2.baseline) == (1, 1, 2, 3, 4, 3, 3, 1, 1, 1)

    def test_weights(self):
        fam = builtin_families()
        for name in ("resnet_basic", "resnet_bottleneck", "resnext"):
            assert fam[name].stage_weights == (1, 1, 1, 1)
            assert fam[name].uniform
        assert fam["mobilenetv2"].stage_weights == (
            Fraction(3, 2), 1, 1, Fraction(3, 4), Fraction(5, 4))

    @pytest.mark.parametrize("weights", [(1, 1, 1), (1, 1, 1, 0), (1, 1, -1, 1)])
    def test_bad_weights(self, weights):
        with pytest.raises(ValueError):
            BackboneFamily("bad", 4, "basic", weights)

    def test_bad_kind(self):
        with pytest.raises(ValueError):
            BackboneFamily("bad", 4, "transformer", (1, 1, 1, 1))

    def test_unknown_family(self):
        with pytest.raises(KeyError):
            get_family("vgg")


class TestValidate:
    def test_cr_resnet50_valid(self, resnet50):
        arch = Architecture(resnet50, (1, 3, 5, 7),
                            (0, 0, 1, 0, 0, 0, 1, 2, 0, 0, 1, 0, 2, 1, 1, 2))
        assert validate_architecture(arch).ok

    def test_length_mismatch(self, resnet18):
        result = validate_architecture(Architecture(resnet18, (1, 1, 2, 4), (0,) * 7))
        assert not result.ok
        assert result.violation.kind == "length_mismatch"

    def test_zero_block_stage(self, resnet50):
        result = validate_architecture(Architecture(resnet50, (0, 4, 6, 6), (0,) * 16))
        assert result.violation.kind == "zero_block_stage"

    def test_bad_code(self, resnet18):
        result = validate_architecture(Architecture(resnet18, (2, 2, 2, 2), (0,) * 7 + (3,)))
        assert result.violation.kind == "bad_code"

    def test_stage_count(self, resnet18):
        result = validate_architecture(Architecture(resnet18, (2, 2, 4), (0,) * 8))
        assert result.violation.kind == "stage_count"


class TestParse:
    def test_cr_resnet101(self, resnet50):
        arch = parse_codes(CR_RESNET101, resnet50)
        assert arch.stage_code == (2, 3, 17, 11)
        assert len(arch.op_code) == 33
        assert arch.op_code[12] == 2

    def test_identity_ops(self, resnet18):
        arch = parse_codes("[2,2,2,2] / [0,0,0,0,0,0,0,0]", resnet18)
        assert arch == Architecture(resnet18, (2, 2, 2, 2), (0,) * 8)

    def test_out_of_range(self, resnet18):
        with pytest.raises(CodeError, match="bad_code"):
            parse_codes("[1,1,2,4] / [0,0,1,0,1,0,2,9]", resnet18)

    @pytest.mark.parametrize("text", [
        "[1,1,2,4]",
        "[1,1,2,4] / [0,0,1",
        "1,1,2,4 / 0,0,0,0,0,0,0,0",
        "[1,1,x,4] / [0,0,0,0,0,0,0,0]",
        "[1,1,2,4] / [0,0] / [0]",
    ])
    def test_malformed(self, resnet18, text):
        with pytest.raises(CodeError):
            parse_codes(text, resnet18)

    def test_whitespace_insensitive(self, resnet18):
        a = parse_codes("  [ 1, 1,2 , 4 ]/[0,0,1,0,1,0,2,1 ] ", resnet18)
        assert a == parse_codes("[1,1,2,4] / [0,0,1,0,1,0,2,1]", resnet18)

    def test_mv2_full_and_bare_vectors(self, mv2):
        ops = "[0,1,0,1,0,2,0,1,1,0,0,1,1,0,1,1,0,2,0,0]"
        full = parse_codes(f"[1,1,2,2,3,4,4,1,1,1] / {ops}", mv2)
        bare = parse_codes(f"[2,2,3,4,4] / {ops}", mv2)
        assert full == bare
        assert full.stage_code == (2, 2, 3, 4, 4)
        assert format_codes(full).startswith("[1,1,2,2,3,4,4,1,1,1] / ")

    def test_mv2_fixed_blocks_must_be_one(self, mv2):
        with pytest.raises(CodeError):
            parse_codes("[2,1,2,2,3,4,4,1,1,1] / [" + ",".join(["0"] * 21) + "]", mv2)


@st.composite
def architectures(draw):
    family = draw(st.sampled_from(sorted(builtin_families().values(), key=lambda f: f.name)))
    stage = tuple(draw(st.lists(st.integers(1, 25), min_size=family.num_stages,
                                max_size=family.num_stages)))
    n = family.choice_blocks(stage)
    ops = tuple(draw(st.lists(st.integers(0, 2), min_size=n, max_size=n)))
    return Architecture(family, stage, ops)


@given(architectures())
def test_round_trip(arch):
    assert validate_architecture(arch).ok
    again = parse_codes(format_codes(arch), arch.family)
    assert again == arch
    assert (again.family, again.stage_code, again.op_code) == (
        arch.family, arch.stage_code, arch.op_code)


class TestPublishedCodes:
    # baseline/reallocated plain block totals, read off the published table
    TOTALS = {"Res18": 8, "Res50": 16, "Res101": 33, "ReX50": 16, "ReX101": 33}

    @pytest.mark.parametrize("pair", STAGE_PAIRS, ids=lambda p: p.label)
    def test_stage_pairs_validate(self, pair):
        fam = get_family(pair.family)
        zeros = lambda s: (0,) * fam.choice_blocks(s)
        for text in (pair.baseline, pair.reallocated):
            code = fam.searchable_part(parse_int_list(text))
            assert validate_architecture(Architecture(fam, code, zeros(code))).ok

    @pytest.mark.parametrize("label,total", sorted(TOTALS.items()))
    def test_block_totals_preserved(self, label, total):
        pair = next(p for p in STAGE_PAIRS if p.label == label)
        assert sum(parse_int_list(pair.baseline)) == sum(parse_int_list(pair.reallocated)) == total

    def test_final_code_lengths(self):
        lengths = {c.label: len(parse_int_list(c.op_code)) for c in FINAL_CODES}
        assert lengths == {"CR-MobileNetV2": 20, "CR-ResNet18": 8, "CR-ResNet50": 16,
                           "CR-ResNet101": 33}
        for c in FINAL_CODES:
            fam = get_family(c.family)
            arch = parse_codes(f"{c.stage_code} / {c.op_code}", fam)
            assert arch.num_blocks == lengths[c.label]
