"""Stage search, greedy beam search over operations, and the two-level pipeline.

Ties are always broken toward the lexicographically smallest code, at every
top-K cut and in the final choice, so a search is a pure function of its
inputs and seed.  Candidates inside one step may be scored on several worker
threads; results are merged by candidate index before ranking.
"""

from __future__ import annotations

import itertools
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .arch import NUM_OPS, Architecture, BackboneFamily, validate_architecture, validate_stage_code
from .budget import is_within_budget, weighted_block_count
from .evaluators import COMPLETION_MODES, Evaluator, evaluate_full, evaluate_partial
from .space import AllocationSpace, InfeasibleSpaceError, enumerate_allocations, operation_space_size


class NoCandidatesError(InfeasibleSpaceError):
    pass


class SpaceTooLargeError(ValueError):
    def __init__(self, size: int, limit: int):
        super().__init__(f"operation space has {size} candidates, limit is {limit}")
        self.size = size
        self.limit = limit


@dataclass(frozen=True)
class SearchConfig:
    K: int = 3
    completions: int = 20
    seed: int = 0
    ops: tuple[int, ...] = tuple(range(NUM_OPS))
    completion_mode: str = "sampled"
    checkpoint_interval: int = 0
    workers: int = 1
    max_candidates: int = 10**6
    #: ranked candidates kept in a report
    max_ranked: int = 50

    def __post_init__(self):
        object.__setattr__(self, "ops", tuple(int(o) for o in self.ops))
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.completions < 1:
            raise ValueError("completions must be >= 1")
        if not self.ops or len(set(self.ops)) != len(self.ops):
            raise ValueError("ops must be a nonempty set of operation codes")
        if any(not 0 <= o < NUM_OPS for o in self.ops):
            raise ValueError(f"operation codes must lie in 0..{NUM_OPS - 1}")
        if self.completion_mode not in COMPLETION_MODES:
            raise ValueError(f"completion_mode must be one of {COMPLETION_MODES}")
        if self.checkpoint_interval < 0 or self.workers < 1:
            raise ValueError("checkpoint_interval must be >= 0 and workers >= 1")

    def echo(self) -> dict:
        """Settings that influence results (``workers`` deliberately excluded)."""
        d = asdict(self)
        d.pop("workers")
        d.pop("checkpoint_interval")
        d["ops"] = list(self.ops)
        return d


@dataclass
class SearchReport:
    kind: str  # "stage", "op", "brute", "hierarchical"
    winner: Architecture
    winner_score: float
    #: (code, score) best first; stage codes for stage search, op codes otherwise
    ranked: list[tuple[tuple[int, ...], float]]
    config: dict
    num_candidates: int
    evaluations: int
    beams: list[list[tuple[tuple[int, ...], float]]] = field(default_factory=list)
    budget_audit: dict = field(default_factory=dict)
    children: dict[str, "SearchReport"] = field(default_factory=dict)
    wall_time: float = 0.0

    def payload(self) -> dict:
        """Deterministic content of the report (no timing)."""
        family = self.winner.family
        out = {
            "kind": self.kind,
            "family": family.name,
            "winner": {
                "stage_code": list(family.full_block_vector(self.winner.stage_code)),
                "op_code": list(self.winner.op_code),
                "score": self.winner_score,
            },
            "ranked": [{"code": list(c), "score": s} for c, s in self.ranked],
            "num_candidates": self.num_candidates,
            "evaluations": self.evaluations,
            "config": self.config,
        }
        if self.beams:
            out["beams"] = [[{"code": list(c), "score": s} for c, s in beam]
                            for beam in self.beams]
        if self.budget_audit:
            out["budget_audit"] = self.budget_audit
        for name, child in self.children.items():
            out[name] = child.payload()
        return out


def _map(fn: Callable, items: Sequence, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _rank(codes: Sequence[tuple[int, ...]], scores: Sequence[float]) -> list[int]:
    return sorted(range(len(codes)), key=lambda j: (-scores[j], codes[j]))


# -- stage search ------------------------------------------------------------

def stage_search(space: AllocationSpace, evaluator: Evaluator,
                 config: SearchConfig = SearchConfig()) -> SearchReport:
    """Score every feasible stage code (normal convs everywhere) and take the best."""
    start = time.perf_counter()
    family = space.family
    candidates = enumerate_allocations(space)
    if not candidates:
        lo, hi = space.weighted_range()
        raise NoCandidatesError(
            f"no stage code of {family.name} meets budget {space.budget} "
            f"(branch sets span {lo}..{hi})")

    def score(tau):
        if not is_within_budget(tau, family, space.budget, space.tolerance):
            raise AssertionError(f"candidate {tau} outside the budget")
        arch = Architecture(family, tau, (0,) * family.choice_blocks(tau))
        return evaluate_full(evaluator, arch, config.seed)

    scores = _map(score, candidates, config.workers)
    order = _rank(candidates, scores)
    best = candidates[order[0]]
    counts = [weighted_block_count(family, t) for t in candidates]
    audit = {
        "budget": float(space.budget),
        "tolerance": float(space.tolerance),
        "min_weighted_blocks": float(min(counts)),
        "max_weighted_blocks": float(max(counts)),
        "winner_weighted_blocks": float(weighted_block_count(family, best)),
        "all_within_budget": True,
    }
    return SearchReport(
        kind="stage",
        winner=Architecture(family, best, (0,) * family.choice_blocks(best)),
        winner_score=scores[order[0]],
        ranked=[(candidates[j], scores[j]) for j in order[:config.max_ranked]],
        config={**config.echo(), "space": space.to_dict()},
        num_candidates=len(candidates),
        evaluations=len(candidates),
        budget_audit=audit,
        wall_time=time.perf_counter() - start,
    )


# -- greedy operation search ---------------------------------------------------

CHECKPOINT_FORMAT = 1


def _write_json_atomic(path: Path, data: dict) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(data, sort_keys=True))
    os.replace(tmp, path)


def _checkpoint_key(family, stage_code, evaluator, config) -> dict:
    return {"family": family.name, "stage_code": list(stage_code),
            "evaluator": evaluator.kind, "config": config.echo()}


def greedy_op_search(family: BackboneFamily, stage_code: Sequence[int], evaluator: Evaluator,
                     config: SearchConfig = SearchConfig(),
                     checkpoint_path: str | os.PathLike | None = None) -> SearchReport:
    """Beam search over per-block operations, one block at a time.

    Each step extends every kept prefix by every operation, scores the
    extensions (partial ones through completion sampling, the last step
    exactly) and keeps the best ``config.K``.  With ``checkpoint_path`` and a
    positive ``config.checkpoint_interval`` the beam is saved every that many
    steps, and an existing matching checkpoint is resumed from.
    """
    start = time.perf_counter()
    stage_code = tuple(stage_code)
    check = validate_stage_code(family, stage_code)
    if not check:
        raise ValueError(check.violation.message)
    num_blocks = family.choice_blocks(stage_code)
    if num_blocks < 1:
        raise ValueError("no choice blocks to search")

    def score(prefix):
        arch = Architecture(family, stage_code, prefix)
        if len(prefix) == num_blocks:
            return evaluate_full(evaluator, arch, config.seed)
        return evaluate_partial(evaluator, arch, config.completions, config.seed,
                                config.completion_mode, config.ops)

    beam: list[tuple[int, ...]] = [()]
    beams: list[list[tuple[tuple[int, ...], float]]] = []
    evaluations = 0
    first_step = 0

    ckpt = Path(checkpoint_path) if checkpoint_path is not None else None
    key = _checkpoint_key(family, stage_code, evaluator, config)
    if ckpt is not None and ckpt.exists():
        state = json.loads(ckpt.read_text())
        if state.get("format") != CHECKPOINT_FORMAT or state.get("key") != key:
            raise ValueError(f"checkpoint {ckpt} belongs to a different search")
        beams = [[(tuple(c), s) for c, s in b] for b in state["beams"]]
        beam = [c for c, _ in beams[-1]] if beams else [()]
        evaluations = state["evaluations"]
        first_step = len(beams)

    for step in range(first_step, num_blocks):
        extended = [p + (o,) for p in beam for o in config.ops]
        scores = _map(score, extended, config.workers)
        evaluations += len(extended)
        order = _rank(extended, scores)[:config.K]
        beam = [extended[j] for j in order]
        beams.append([(extended[j], scores[j]) for j in order])
        done = step + 1
        if (ckpt is not None and config.checkpoint_interval
                and done % config.checkpoint_interval == 0 and done < num_blocks):
            _write_json_atomic(ckpt, {
                "format": CHECKPOINT_FORMAT, "key": key, "evaluations": evaluations,
                "beams": [[[list(c), s] for c, s in b] for b in beams],
            })

    final = beams[-1]
    best_code, best_score = final[0]
    return SearchReport(
        kind="op",
        winner=Architecture(family, stage_code, best_code),
        winner_score=best_score,
        ranked=list(final),
        config=config.echo(),
        num_candidates=operation_space_size(num_blocks, len(config.ops)),
        evaluations=evaluations,
        beams=beams,
        wall_time=time.perf_counter() - start,
    )


# -- exhaustive oracle ---------------------------------------------------------

def brute_force_search(family: BackboneFamily, stage_code: Sequence[int], evaluator: Evaluator,
                       config: SearchConfig = SearchConfig(),
                       chunk_size: int = 65536) -> SearchReport:
    """Score every operation code exactly; the reference answer for greedy search."""
    start = time.perf_counter()
    stage_code = tuple(stage_code)
    check = validate_stage_code(family, stage_code)
    if not check:
        raise ValueError(check.violation.message)
    num_blocks = family.choice_blocks(stage_code)
    size = operation_space_size(num_blocks, len(config.ops))
    if size > config.max_candidates:
        raise SpaceTooLargeError(size, config.max_candidates)

    # lexicographic order, so a stable sort breaks ties toward the smaller code
    codes = np.array(list(itertools.product(config.ops, repeat=num_blocks)), dtype=np.int64)
    codes = codes.reshape(size, num_blocks)
    chunks = [codes[i:i + chunk_size] for i in range(0, size, chunk_size)]
    parts = _map(lambda c: evaluator.score_batch(stage_code, c, config.seed), chunks,
                 config.workers)
    scores = np.concatenate(parts) if parts else np.zeros(0)
    order = np.argsort(-scores, kind="stable")[:config.max_ranked]
    ranked = [(tuple(int(x) for x in codes[j]), float(scores[j])) for j in order]
    winner = Architecture(family, stage_code, ranked[0][0])
    assert validate_architecture(winner)
    return SearchReport(
        kind="brute",
        winner=winner,
        winner_score=ranked[0][1],
        ranked=ranked,
        config=config.echo(),
        num_candidates=size,
        evaluations=size,
        wall_time=time.perf_counter() - start,
    )


# -- pipeline -------------------------------------------------------------------

def hierarchical_search(space: AllocationSpace, evaluator: Evaluator,
                        config: SearchConfig = SearchConfig(),
                        checkpoint_path=None) -> SearchReport:
    """Stage search first, then greedy operation search on the winning stage code."""
    start = time.perf_counter()
    stage = stage_search(space, evaluator, config)
    ops = greedy_op_search(space.family, stage.winner.stage_code, evaluator, config,
                           checkpoint_path)
    return SearchReport(
        kind="hierarchical",
        winner=ops.winner,
        winner_score=ops.winner_score,
        ranked=[(ops.winner.op_code, ops.winner_score)],
        config={**config.echo(), "space": space.to_dict()},
        num_candidates=stage.num_candidates + ops.num_candidates,
        evaluations=stage.evaluations + ops.evaluations,
        budget_audit=stage.budget_audit,
        children={"stage_search": stage, "op_search": ops},
        wall_time=time.perf_counter() - start,
    )
