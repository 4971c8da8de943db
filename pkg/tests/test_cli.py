import csv
import io

import pytest
import yaml

from realloc_nas.cli import resolve_settings, build_parser, run, run_search
from realloc_nas.report import RunRecord, dump_text, read_report
from realloc_nas.space import AllocationSpace, count_allocations
from realloc_nas.arch import get_family


def call(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


def test_verify_codes():
    code, out, _ = call("verify-codes")
    assert code == 0
    assert out.count("PASS") == 10
    assert "10/10 codes verified" in out


def test_enumerate():
    code, out, _ = call("enumerate", "--family", "resnet_bottleneck", "--budget", "16")
    lines = out.splitlines()
    assert code == 0
    assert "[3,4,6,3]" in lines
    n = count_allocations(AllocationSpace.default(get_family("resnet_bottleneck"), 16))
    assert lines[-1] == f"count: {n}"
    assert len(lines) == n + 1


def test_enumerate_branch_override():
    code, out, _ = call("enumerate", "--budget", "4", "--branch-set", "3:1,2",
                        "--branch-set", "4:1")
    assert code == 0
    assert out.splitlines() == ["[1,1,1,1]", "count: 1"]


def test_search_op_constant():
    code, out, _ = call("search-op", "--family", "resnet_basic", "--stage", "[2,2,2,2]",
                        "--evaluator", "constant")
    assert code == 0
    assert "winner: [2,2,2,2] / [0,0,0,0,0,0,0,0]" in out


def test_usage_errors():
    assert call("frobnicate")[0] == 2
    assert call("enumerate", "--no-such-flag")[0] == 2
    assert call()[0] == 2


def test_infeasible_budget():
    code, _, err = call("enumerate", "--budget", "3")
    assert code == 3
    assert "reachable range" in err
    assert call("search-stage", "--budget", "200")[0] == 3


def test_validation_errors():
    assert call("search-op", "--family", "resnet_basic", "--stage", "[0,2,2,2]")[0] == 2
    assert call("cost", "--family", "resnet_basic",
                "--code", "[1,1,2,4] / [0,0,1,0,1,0,2,9]")[0] == 2
    assert call("enumerate", "--family", "vgg16")[0] == 2
    assert call("search-brute", "--stage", "[3,4,6,3]")[0] == 2  # 3^16 over the limit


def test_io_error(tmp_path):
    code, _, err = call("search-stage", "--budget", "8", "--family", "resnet_basic",
                        "--output", str(tmp_path / "missing" / "r.yaml"))
    assert code == 4
    assert "missing/r.yaml" in err
    assert call("search-op", "--evaluator", "table", "--table", str(tmp_path / "none.tsv"))[0] == 4


def test_cost():
    code, out, _ = call("cost", "--family", "mobilenetv2", "--stage", "[1,1,2,2,3,4,4,1,1,1]",
                        "--ref-cost", "2", "--overhead", "1")
    assert code == 0
    assert "weighted_blocks: 16" in out
    assert "cost: 33" in out
    assert "choice_blocks: 20" in out


def test_erf_csv(tmp_path):
    code, out, _ = call("erf", "--family", "resnet_bottleneck", "--stage", "[3,4,6,3]")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0
    assert [r["stage"] for r in rows] == ["0", "1", "2", "3", "4"]
    assert rows[-1]["trf"] == "427"
    path = tmp_path / "erf.csv"
    assert call("erf", "--stage", "[1,3,5,7]", "-o", str(path))[0] == 0
    assert path.read_text().splitlines()[-1].startswith("4,619,")


def test_config_file_and_flags(tmp_path):
    cfg = tmp_path / "run.yaml"
    cfg.write_text("family: resnet_basic\nbudget: 8\nK: 2\nseed: 11\n"
                   "branch_sets:\n  4: [2, 3, 4]\n")
    ns = build_parser().parse_args(["search-stage", "--config", str(cfg), "--K", "5"])
    settings = resolve_settings(ns)
    assert settings["family"] == "resnet_basic"
    assert settings["K"] == 5
    assert settings["seed"] == 11
    assert settings["branch_sets"] == {4: [2, 3, 4]}
    bad = tmp_path / "bad.yaml"
    bad.write_text("famly: resnet_basic\n")
    assert call("search-stage", "--config", str(bad))[0] == 2


def test_env_seed(monkeypatch):
    monkeypatch.setenv("REALLOC_NAS_SEED", "1234")
    ns = build_parser().parse_args(["search-op"])
    assert resolve_settings(ns)["seed"] == 1234
    ns = build_parser().parse_args(["search-op", "--seed", "7"])
    assert resolve_settings(ns)["seed"] == 7


def test_workers_flag_keeps_payload(tmp_path):
    paths = []
    for workers in ("1", "8"):
        path = tmp_path / f"w{workers}.yaml"
        code, _, _ = call("search-hier", "--family", "resnet_basic", "--budget", "8",
                          "--evaluator", "separable", "--noise-std", "0.002", "--seed", "5",
                          "--completions", "4", "--workers", workers, "-o", str(path))
        assert code == 0
        paths.append(path)
    a, b = (read_report(p) for p in paths)
    assert a.payload_text() == b.payload_text()


def test_replay_from_record(tmp_path):
    path = tmp_path / "r.yaml"
    assert call("search-hier", "--family", "resnet_basic", "--budget", "8",
                "--evaluator", "interaction", "--seed", "3", "--completions", "5",
                "-o", str(path))[0] == 0
    record = read_report(path)
    settings = dict(record.config)
    command = settings.pop("command")
    replayed = run_search(command, settings)
    assert dump_text(replayed.payload()) == record.payload_text()


def test_table_evaluator_file(tmp_path):
    table = tmp_path / "ap.tsv"
    table.write_text("[1,1,2,4] / [0,0,0,0,0,0,0,0]\t0.35\n"
                     "[1,1,2,4] / [0,0,1,0,1,0,2,1]\t0.40\n")
    code, out, _ = call("search-hier", "--family", "resnet_basic", "--budget", "8",
                        "--evaluator", "table", "--table", str(table), "--table-default", "0.3",
                        "--completion-mode", "exhaustive")
    assert code == 0
    assert "winner: [1,1,2,4] / [0,0,1,0,1,0,2,1]" in out
    assert "score: 0.400000" in out


def test_paired_sampling_flag():
    ns = build_parser().parse_args(["search-op", "--paired-sampling"])
    assert resolve_settings(ns)["completion_mode"] == "paired"


def test_scatter(tmp_path):
    reports = []
    for fam, budget in (("resnet_basic", "8"), ("resnet_bottleneck", "16")):
        path = tmp_path / f"{fam}.yaml"
        assert call("search-stage", "--family", fam, "--budget", budget,
                    "--evaluator", "separable", "-o", str(path))[0] == 0
        reports.append(str(path))
    out_csv = tmp_path / "s.csv"
    code, _, _ = call("scatter", *reports, "-o", str(out_csv))
    assert code == 0
    rows = list(csv.DictReader(out_csv.open()))
    assert [r["weighted_blocks"] for r in rows] == ["8.0", "16.0"]


def test_search_brute_small():
    code, out, _ = call("search-brute", "--family", "resnet_basic", "--stage", "[2,2,2,2]",
                        "--evaluator", "separable")
    assert code == 0
    assert "candidates: 6561" in out
