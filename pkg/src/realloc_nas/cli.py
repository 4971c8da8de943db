"""Command-line front end.

Exit codes: 0 success, 2 validation or usage error, 3 infeasible space,
4 I/O failure.  Settings come from built-in defaults, then an optional YAML
``--config`` file, then flags; the seed falls back to ``$REALLOC_NAS_SEED``.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

import yaml

from . import __version__, rng
from .arch import Architecture, CodeError, format_code, format_codes, get_family, parse_codes, parse_stage_code
from .budget import BudgetModel, backbone_cost, weighted_block_count
from .evaluators import (
    COMPLETION_MODES,
    EvaluatorError,
    NoisyEvaluator,
    SeparableEvaluator,
    load_table,
    random_interaction,
    random_separable,
)
from .golden import verify_all
from .report import ReportIOError, export_scatter, write_text_atomic, make_run_record, read_report, write_report
from .rf import stage_fields
from .search import (
    SearchConfig,
    brute_force_search,
    greedy_op_search,
    hierarchical_search,
    stage_search,
)
from .space import AllocationSpace, InfeasibleSpaceError, default_branch_sets, iter_allocations

EXIT_OK, EXIT_INVALID, EXIT_INFEASIBLE, EXIT_IO = 0, 2, 3, 4

DEFAULTS = {
    "family": "resnet_bottleneck",
    "budget": None,  # family baseline
    "tolerance": 0.0,
    "branch_sets": None,
    "evaluator": "constant",
    "constant_score": 0.0,
    "evaluator_seed": 0,
    "table": None,
    "table_default": None,
    "noise_std": 0.0,
    "K": 3,
    "completions": 20,
    "completion_mode": "sampled",
    "seed": None,
    "workers": 1,
    "max_candidates": 10**6,
    "checkpoint": None,
    "checkpoint_interval": 0,
    "ref_cost": 1.0,
    "overhead": 0.0,
    "stage": None,
    "code": None,
    "name": None,
    "output": None,
}

EVALUATORS = ("constant", "separable", "interaction", "table")


class UsageError(ValueError):
    pass


def _branch_set(text: str) -> tuple[int, tuple[int, ...]]:
    try:
        stage, values = text.split(":", 1)
        return int(stage), tuple(sorted({int(v) for v in values.split(",") if v.strip()}))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected STAGE:N1,N2,... (stages count from 1), got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="YAML file of settings; flags take precedence")
    common.add_argument("--family", help="backbone family (default resnet_bottleneck)")
    common.add_argument("--budget", type=float, help="weighted block budget N (default: baseline)")
    common.add_argument("--tolerance", type=float)
    common.add_argument("--branch-set", dest="branch_sets", type=_branch_set, action="append",
                        help="override one stage's branch set, e.g. 3:2,4,6")
    common.add_argument("--evaluator", choices=EVALUATORS)
    common.add_argument("--constant-score", type=float)
    common.add_argument("--evaluator-seed", type=int)
    common.add_argument("--table", help="table evaluator file: 'stage / ops<TAB>score' per line")
    common.add_argument("--table-default", type=float)
    common.add_argument("--noise-std", type=float)
    common.add_argument("-K", "--K", dest="K", type=int, help="beam width")
    common.add_argument("--completions", type=int)
    common.add_argument("--completion-mode", choices=COMPLETION_MODES)
    common.add_argument("--paired-sampling", dest="completion_mode", action="store_const",
                        const="paired", help="share completion samples within a beam step")
    common.add_argument("--seed", type=lambda s: int(s, 0))
    common.add_argument("--workers", type=int)
    common.add_argument("--max-candidates", type=int)
    common.add_argument("--checkpoint")
    common.add_argument("--checkpoint-interval", type=int)
    common.add_argument("--ref-cost", type=float)
    common.add_argument("--overhead", type=float)
    common.add_argument("--stage", help="stage code, e.g. '[1,3,5,7]'")
    common.add_argument("--code", help="full code, e.g. '[1,3,5,7] / [0,...]'")
    common.add_argument("--name")
    common.add_argument("-o", "--output")

    parser = argparse.ArgumentParser(prog="realloc-nas", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    for name, help_ in (
        ("enumerate", "list stage codes meeting the budget"),
        ("cost", "weighted block count and relative cost of a stage code"),
        ("erf", "per-stage theoretical RF and effective radius as CSV"),
        ("search-stage", "exhaustive stage reallocation search"),
        ("search-op", "greedy beam search over block operations"),
        ("search-hier", "stage search followed by operation search"),
        ("search-brute", "exhaustive operation search (oracle)"),
        ("verify-codes", "check the published codes against families and budgets"),
    ):
        sub.add_parser(name, parents=[common], help=help_)
    scatter = sub.add_parser("scatter", parents=[common], help="CSV of winners from report files")
    scatter.add_argument("reports", nargs="*")
    return parser


def resolve_settings(ns: argparse.Namespace) -> dict:
    flags = {k: v for k, v in vars(ns).items() if k not in ("command", "config", "reports")}
    settings = dict(DEFAULTS)
    config_path = getattr(ns, "config", None)
    if config_path:
        try:
            loaded = yaml.safe_load(Path(config_path).read_text()) or {}
        except OSError as exc:
            raise ReportIOError(f"cannot read config {config_path}: {exc.strerror}") from exc
        if not isinstance(loaded, dict):
            raise UsageError(f"{config_path}: expected a mapping of settings")
        unknown = sorted(set(loaded) - set(DEFAULTS))
        if unknown:
            raise UsageError(f"{config_path}: unknown settings {', '.join(unknown)}")
        settings.update(loaded)
    settings.update(flags)
    if isinstance(settings.get("branch_sets"), list):
        # flags give [(stage, values)], config files a {stage: [values]} mapping
        settings["branch_sets"] = {int(s): list(v) for s, v in settings["branch_sets"]}
    if settings["seed"] is None:
        settings["seed"] = rng.seed_from_env(0)
    return settings


def build_space(settings: dict) -> AllocationSpace:
    family = get_family(settings["family"])
    sets = [list(s) for s in default_branch_sets(family)]
    for stage, values in (settings.get("branch_sets") or {}).items():
        stage = int(stage)
        if not 1 <= stage <= family.num_stages:
            raise UsageError(f"branch set for stage {stage}; {family.name} has {family.num_stages}")
        sets[stage - 1] = sorted(int(v) for v in values)
    if settings["budget"] is None:
        budget = weighted_block_count(family, family.baseline)
    else:
        budget = settings["budget"]
    space = AllocationSpace(family, sets, budget, settings["tolerance"])
    lo, hi = space.weighted_range()
    if not lo - space.tolerance <= space.budget <= hi + space.tolerance:
        raise InfeasibleSpaceError(
            f"budget {float(space.budget):g} outside the reachable range {float(lo):g}..{float(hi):g}")
    return space


def build_evaluator(settings: dict, space: AllocationSpace, extra_stage=None):
    family = space.family
    max_count = max(s[-1] for s in space.branch_sets)
    max_blocks = family.choice_blocks([s[-1] for s in space.branch_sets])
    if extra_stage is not None:
        max_count = max(max_count, max(extra_stage))
        max_blocks = max(max_blocks, family.choice_blocks(extra_stage))
    kind = settings["evaluator"]
    eseed = settings["evaluator_seed"]
    if kind == "constant":
        ev = SeparableEvaluator.constant(settings["constant_score"])
    elif kind == "separable":
        ev = random_separable(family.num_stages, max_count, max_blocks, eseed)
    elif kind == "interaction":
        ev = random_interaction(family.num_stages, max_count, max_blocks, eseed)
    elif kind == "table":
        if not settings["table"]:
            raise UsageError("--evaluator table needs --table FILE")
        try:
            ev = load_table(settings["table"], family, settings["table_default"])
        except OSError as exc:
            raise ReportIOError(f"cannot read table {settings['table']}: {exc.strerror}") from exc
    else:
        raise UsageError(f"unknown evaluator {kind!r}")
    if settings["noise_std"]:
        ev = NoisyEvaluator(ev, settings["noise_std"])
    return ev


def build_search_config(settings: dict) -> SearchConfig:
    return SearchConfig(
        K=settings["K"], completions=settings["completions"], seed=settings["seed"],
        completion_mode=settings["completion_mode"],
        checkpoint_interval=settings["checkpoint_interval"], workers=settings["workers"],
        max_candidates=settings["max_candidates"])


def _stage_from_settings(settings: dict, family) -> tuple[int, ...]:
    if settings.get("code"):
        return parse_codes(settings["code"], family).stage_code
    if settings.get("stage"):
        return parse_stage_code(settings["stage"], family)
    return tuple(family.baseline)


def run_search(command: str, settings: dict):
    """Run one search subcommand from resolved settings; returns the report."""
    space = build_space(settings)
    config = build_search_config(settings)
    family = space.family
    if command in ("search-stage", "search-hier"):
        evaluator = build_evaluator(settings, space)
        if command == "search-stage":
            return stage_search(space, evaluator, config)
        return hierarchical_search(space, evaluator, config, settings["checkpoint"])
    stage = _stage_from_settings(settings, family)
    evaluator = build_evaluator(settings, space, stage)
    if command == "search-op":
        return greedy_op_search(family, stage, evaluator, config, settings["checkpoint"])
    return brute_force_search(family, stage, evaluator, config)


def _cmd_enumerate(settings, out):
    space = build_space(settings)
    n = 0
    for tau in iter_allocations(space):
        out.write(format_code(tau) + "\n")
        n += 1
    out.write(f"count: {n}\n")
    return EXIT_OK if n else EXIT_INFEASIBLE


def _cmd_cost(settings, out):
    family = get_family(settings["family"])
    if settings.get("code"):
        arch = parse_codes(settings["code"], family)
    else:
        stage = _stage_from_settings(settings, family)
        arch = Architecture(family, stage, (0,) * family.choice_blocks(stage))
    model = BudgetModel(settings["ref_cost"], settings["overhead"])
    out.write(f"family: {family.name}\n")
    out.write(f"stage_code: {format_code(family.full_block_vector(arch.stage_code))}\n")
    out.write(f"choice_blocks: {arch.num_blocks}\n")
    out.write(f"weighted_blocks: {float(weighted_block_count(family, arch.stage_code)):g}\n")
    out.write(f"cost: {float(backbone_cost(arch, model)):g}\n")
    return EXIT_OK


def _cmd_erf(settings, out):
    family = get_family(settings["family"])
    if settings.get("code"):
        arch = parse_codes(settings["code"], family)
    else:
        stage = _stage_from_settings(settings, family)
        arch = Architecture(family, stage, (0,) * family.choice_blocks(stage))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["stage", "trf", "erf_radius"])
    for row in stage_fields(arch):
        writer.writerow([row.stage, row.trf, f"{row.erf_radius:.6f}"])
    _emit(buf.getvalue(), settings, out)
    return EXIT_OK


def _emit(text: str, settings: dict, out):
    if settings.get("output"):
        write_text_atomic(Path(settings["output"]), text)
    else:
        out.write(text)


def _cmd_search(command, settings, out):
    report = run_search(command, settings)
    out.write(f"winner: {format_codes(report.winner)}\n")
    out.write(f"score: {report.winner_score:.6f}\n")
    out.write(f"candidates: {report.num_candidates}  evaluations: {report.evaluations}\n")
    if settings.get("output"):
        name = settings.get("name") or f"{report.winner.family.name}-{command}"
        model = BudgetModel(settings["ref_cost"], settings["overhead"])
        space = build_space(settings).to_dict()
        record = make_run_record(name, report, {"command": command, **settings}, space,
                                 model, settings["seed"])
        write_report(record, settings["output"])
        out.write(f"report: {settings['output']}\n")
    return EXIT_OK


def _cmd_verify(settings, out):
    checks = verify_all()
    for c in checks:
        out.write(f"{'PASS' if c.ok else 'FAIL'} {c.label}: {c.detail}\n")
    failed = sum(not c.ok for c in checks)
    out.write(f"{len(checks) - failed}/{len(checks)} codes verified\n")
    return EXIT_OK if not failed else EXIT_INVALID


def _cmd_scatter(reports, settings, out):
    if not settings.get("output"):
        raise UsageError("scatter needs --output FILE")
    export_scatter([read_report(p) for p in reports], settings["output"])
    out.write(f"{len(reports)} rows written to {settings['output']}\n")
    return EXIT_OK


def run(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    if not ns.command:
        parser.print_usage(err)
        return EXIT_INVALID
    try:
        settings = resolve_settings(ns)
        if ns.command == "enumerate":
            return _cmd_enumerate(settings, out)
        if ns.command == "cost":
            return _cmd_cost(settings, out)
        if ns.command == "erf":
            return _cmd_erf(settings, out)
        if ns.command == "verify-codes":
            return _cmd_verify(settings, out)
        if ns.command == "scatter":
            return _cmd_scatter(ns.reports, settings, out)
        return _cmd_search(ns.command, settings, out)
    except InfeasibleSpaceError as exc:
        err.write(f"error: {exc}\n")
        return EXIT_INFEASIBLE
    except (OSError, ReportIOError) as exc:
        err.write(f"error: {exc}\n")
        return EXIT_IO
    except (CodeError, EvaluatorError, UsageError, KeyError, ValueError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        err.write(f"error: {msg}\n")
        return EXIT_INVALID


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
