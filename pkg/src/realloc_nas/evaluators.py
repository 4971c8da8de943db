"""Pluggable architecture evaluators.

An evaluator stands in for validation accuracy of a supernet subgraph.  All
evaluators score a batch of operation codes for one stage code at once; each
row's score depends only on that row, the stage code and the seed, never on
the batch it arrived in.

Scores are fractions (0.374 rather than 37.4).
"""

from __future__ import annotations

import itertools
from pathlib import Path
from typing import Sequence

import numpy as np

from . import rng
from .arch import NUM_OPS, Architecture, BackboneFamily, format_codes, parse_codes, validate_architecture

COMPLETION_MODES = ("sampled", "paired", "exhaustive")


class EvaluatorError(ValueError):
    pass


class MissingEntryError(EvaluatorError, KeyError):
    pass


class Evaluator:
    kind = "abstract"

    def score_batch(self, stage_code: tuple[int, ...], ops: np.ndarray, seed: int) -> np.ndarray:
        raise NotImplementedError

    def expected_score(self, stage_code, prefix, num_blocks, op_set) -> float | None:
        """Exact mean score over uniform completions of ``prefix``, if known in closed form."""
        return None

    def to_spec(self) -> dict:
        raise NotImplementedError


class SeparableEvaluator(Evaluator):
    """``base + sum_i stage[i, tau_i] + sum_b op[b, o_b]``.

    ``stage_utilities`` has shape (num_stages, max_count + 1) and
    ``op_utilities`` shape (max_blocks, num_ops); either may be omitted for a
    zero table.  With both omitted the evaluator is constant.
    """

    kind = "separable"

    def __init__(self, base: float = 0.0, stage_utilities=None, op_utilities=None):
        self.base = float(base)
        self.stage_utilities = (None if stage_utilities is None
                                else np.asarray(stage_utilities, dtype=float))
        self.op_utilities = (None if op_utilities is None
                             else np.asarray(op_utilities, dtype=float))
        if self.stage_utilities is not None and self.stage_utilities.ndim != 2:
            raise EvaluatorError("stage_utilities must be 2-D (stage, count)")
        if self.op_utilities is not None and self.op_utilities.ndim != 2:
            raise EvaluatorError("op_utilities must be 2-D (block, op)")

    @classmethod
    def constant(cls, value: float = 0.0) -> "SeparableEvaluator":
        return cls(base=value)

    def stage_score(self, stage_code) -> float:
        s = self.base
        if self.stage_utilities is None:
            return s
        table = self.stage_utilities
        for i, n in enumerate(stage_code):
            if i >= table.shape[0] or n >= table.shape[1]:
                raise EvaluatorError(f"no stage utility for stage {i + 1} with {n} blocks")
            s += table[i, n]
        return s

    def _check_blocks(self, num_blocks: int):
        if self.op_utilities is not None and num_blocks > self.op_utilities.shape[0]:
            raise EvaluatorError(
                f"op utilities cover {self.op_utilities.shape[0]} blocks, need {num_blocks}")

    def score_batch(self, stage_code, ops, seed=0):
        ops = np.asarray(ops, dtype=np.int64)
        total = np.full(ops.shape[0], self.stage_score(stage_code))
        if self.op_utilities is not None:
            self._check_blocks(ops.shape[1])
            table = self.op_utilities
            if ops.size and ops.max() >= table.shape[1]:
                raise EvaluatorError("operation code outside the utility table")
            for b in range(ops.shape[1]):
                total += table[b, ops[:, b]]
        return total

    def expected_score(self, stage_code, prefix, num_blocks, op_set):
        s = self.stage_score(stage_code)
        if self.op_utilities is None:
            return s
        self._check_blocks(num_blocks)
        table = self.op_utilities
        for b in range(num_blocks):
            if b < len(prefix):
                s += table[b, prefix[b]]
            else:
                s += sum(table[b, o] for o in op_set) / len(op_set)
        return s

    def to_spec(self) -> dict:
        spec = {"kind": self.kind, "base": self.base}
        if self.stage_utilities is not None:
            spec["stage_utilities"] = self.stage_utilities.tolist()
        if self.op_utilities is not None:
            spec["op_utilities"] = self.op_utilities.tolist()
        return spec


class InteractionEvaluator(SeparableEvaluator):
    """Separable terms plus pairwise bonuses.

    Each pair ``(a, op_a, b, op_b, bonus)`` adds ``bonus`` when block ``a``
    uses ``op_a`` and block ``b`` uses ``op_b``.  Pairs naming blocks past the
    end of a shorter architecture are inactive.
    """

    kind = "interaction"

    def __init__(self, base=0.0, stage_utilities=None, op_utilities=None, pairs=()):
        super().__init__(base, stage_utilities, op_utilities)
        self.pairs = tuple((int(a), int(oa), int(b), int(ob), float(w)) for a, oa, b, ob, w in pairs)
        for a, _, b, _, _ in self.pairs:
            if a == b:
                raise EvaluatorError("a pair must join two different blocks")

    def score_batch(self, stage_code, ops, seed=0):
        ops = np.asarray(ops, dtype=np.int64)
        total = super().score_batch(stage_code, ops, seed)
        width = ops.shape[1]
        for a, oa, b, ob, w in self.pairs:
            if a < width and b < width:
                total += np.where((ops[:, a] == oa) & (ops[:, b] == ob), w, 0.0)
        return total

    def expected_score(self, stage_code, prefix, num_blocks, op_set):
        s = super().expected_score(stage_code, prefix, num_blocks, op_set)
        k = len(op_set)
        fixed = len(prefix)
        for a, oa, b, ob, w in self.pairs:
            if a >= num_blocks or b >= num_blocks:
                continue
            p = 1.0
            for blk, op in ((a, oa), (b, ob)):
                if blk < fixed:
                    p *= 1.0 if prefix[blk] == op else 0.0
                else:
                    p *= (1.0 if op in op_set else 0.0) / k
            s += w * p
        return s

    def to_spec(self) -> dict:
        spec = super().to_spec()
        spec["pairs"] = [list(p) for p in self.pairs]
        return spec


class TableEvaluator(Evaluator):
    """Explicit ``(stage_code, op_code) -> score`` lookup."""

    kind = "table"

    def __init__(self, entries: dict, default: float | None = None):
        self.entries = {(tuple(s), tuple(o)): float(v) for (s, o), v in entries.items()}
        self.default = None if default is None else float(default)

    def lookup(self, stage_code, op_code) -> float:
        key = (tuple(int(x) for x in stage_code), tuple(int(x) for x in op_code))
        try:
            return self.entries[key]
        except KeyError:
            if self.default is None:
                raise MissingEntryError(
                    f"no table entry for {list(key[0])} / {list(key[1])} and no default") from None
            return self.default

    def score_batch(self, stage_code, ops, seed=0):
        ops = np.asarray(ops, dtype=np.int64)
        return np.array([self.lookup(stage_code, row) for row in ops], dtype=float)

    def to_spec(self) -> dict:
        return {
            "kind": self.kind,
            "default": self.default,
            "entries": [[list(s), list(o), v] for (s, o), v in sorted(self.entries.items())],
        }


class NoisyEvaluator(Evaluator):
    """Adds Gaussian noise keyed by (seed, architecture) to an inner evaluator."""

    kind = "noisy_wrapper"

    def __init__(self, inner: Evaluator, noise_std: float):
        if noise_std < 0:
            raise EvaluatorError("noise_std must be nonnegative")
        self.inner = inner
        self.noise_std = float(noise_std)

    def score_batch(self, stage_code, ops, seed=0):
        ops = np.asarray(ops, dtype=np.int64)
        total = self.inner.score_batch(stage_code, ops, seed)
        if self.noise_std == 0.0:
            return total
        noise = np.array([rng.stream(seed, rng.NOISE, stage_code, row).standard_normal()
                          for row in ops])
        return total + self.noise_std * noise

    def to_spec(self) -> dict:
        return {"kind": self.kind, "noise_std": self.noise_std, "inner": self.inner.to_spec()}


def evaluator_from_spec(spec: dict) -> Evaluator:
    kind = spec.get("kind")
    if kind == "separable":
        return SeparableEvaluator(spec.get("base", 0.0), spec.get("stage_utilities"),
                                  spec.get("op_utilities"))
    if kind == "interaction":
        return InteractionEvaluator(spec.get("base", 0.0), spec.get("stage_utilities"),
                                    spec.get("op_utilities"), spec.get("pairs", ()))
    if kind == "table":
        entries = {(tuple(s), tuple(o)): v for s, o, v in spec.get("entries", ())}
        return TableEvaluator(entries, spec.get("default"))
    if kind == "noisy_wrapper":
        return NoisyEvaluator(evaluator_from_spec(spec["inner"]), spec["noise_std"])
    raise EvaluatorError(f"unknown evaluator kind {kind!r}")


# -- table files -----------------------------------------------------------

def load_table(path, family: BackboneFamily, default: float | None = None) -> TableEvaluator:
    """Read ``stage_code / op_code<TAB>score`` lines; ``#`` starts a comment."""
    entries = {}
    path = Path(path)
    with path.open() as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                codes, score = line.rsplit("\t", 1)
                arch = parse_codes(codes, family)
                entries[(arch.stage_code, arch.op_code)] = float(score)
            except ValueError as exc:
                raise EvaluatorError(f"{path}:{lineno}: {exc}") from None
    return TableEvaluator(entries, default)


def save_table(table: TableEvaluator, path, family: BackboneFamily) -> None:
    lines = [f"{format_codes(Architecture(family, s, o))}\t{v!r}"
             for (s, o), v in sorted(table.entries.items())]
    Path(path).write_text("".join(line + "\n" for line in lines))


# -- scoring entry points --------------------------------------------------

def evaluate_full(evaluator: Evaluator, arch: Architecture, seed: int = 0) -> float:
    result = validate_architecture(arch)
    if not result:
        raise EvaluatorError(f"invalid architecture: {result.violation.message}")
    return float(evaluator.score_batch(arch.stage_code, np.array([arch.op_code], dtype=np.int64),
                                       seed)[0])


def evaluate_partial(evaluator: Evaluator, partial: Architecture, completions: int = 20,
                     seed: int = 0, mode: str = "sampled",
                     op_set: Sequence[int] = tuple(range(NUM_OPS)),
                     max_enumeration: int = 10**6) -> float:
    """Mean score of ``partial`` over uniform completions of its missing blocks.

    ``partial.op_code`` is a prefix of the full operation code.  Modes:

    * ``sampled``: ``completions`` draws from a stream keyed by the prefix.
    * ``paired``: the same draws for every prefix of a given length, so
      candidates compared within one beam step share their completions.
    * ``exhaustive``: the exact mean over all completions, in closed form when
      the evaluator provides one and by enumeration otherwise.
    """
    num_blocks = partial.num_blocks
    prefix = partial.op_code
    remaining = num_blocks - len(prefix)
    if remaining <= 0:
        raise EvaluatorError("prefix covers every block; use evaluate_full")
    if mode not in COMPLETION_MODES:
        raise EvaluatorError(f"unknown completion mode {mode!r}")
    op_set = tuple(op_set)
    stage_code = partial.stage_code

    if mode == "exhaustive":
        exact = evaluator.expected_score(stage_code, prefix, num_blocks, op_set)
        if exact is not None:
            return float(exact)
        total = len(op_set) ** remaining
        if total > max_enumeration:
            raise EvaluatorError(
                f"exhaustive completion needs {total} evaluations (limit {max_enumeration})")
        tails = np.array(list(itertools.product(op_set, repeat=remaining)), dtype=np.int64)
    else:
        if completions < 1:
            raise EvaluatorError("completions must be >= 1")
        if mode == "sampled":
            gen = rng.stream(seed, rng.PARTIAL, stage_code, prefix)
        else:
            gen = rng.stream(seed, rng.PAIRED, stage_code, (len(prefix),))
        choice = np.asarray(op_set, dtype=np.int64)
        tails = choice[gen.integers(0, len(op_set), size=(completions, remaining))]

    head = np.broadcast_to(np.asarray(prefix, dtype=np.int64), (tails.shape[0], len(prefix)))
    scores = evaluator.score_batch(stage_code, np.concatenate([head, tails], axis=1), seed)
    return float(scores.mean())


# -- generators ------------------------------------------------------------

def random_separable(num_stages: int, max_count: int, max_blocks: int, seed: int = 0,
                     num_ops: int = NUM_OPS, base: float = 0.3, scale: float = 0.01
                     ) -> SeparableEvaluator:
    # drawn count-major / block-major so that a larger table extends a smaller one
    stage = rng.stream(seed, rng.GENERATOR, (0,)).uniform(
        0.0, scale, size=(max_count + 1, num_stages)).T
    ops = rng.stream(seed, rng.GENERATOR, (2,)).uniform(0.0, scale, size=(max_blocks, num_ops))
    return SeparableEvaluator(base, stage, ops)


def random_interaction(num_stages: int, max_count: int, max_blocks: int, seed: int = 0,
                       num_ops: int = NUM_OPS, num_pairs: int | None = None,
                       base: float = 0.3, scale: float = 0.01,
                       pair_scale: float | None = None) -> InteractionEvaluator:
    """Separable utilities plus ``num_pairs`` random pairwise bonuses of either sign."""
    sep = random_separable(num_stages, max_count, max_blocks, seed, num_ops, base, scale)
    gen = rng.stream(seed, rng.GENERATOR, (1,))
    if num_pairs is None:
        num_pairs = 2 * max_blocks
    if pair_scale is None:
        pair_scale = scale
    pairs = []
    if max_blocks >= 2:
        for _ in range(num_pairs):
            a, b = sorted(gen.choice(max_blocks, size=2, replace=False).tolist())
            oa, ob = gen.integers(0, num_ops, size=2).tolist()
            pairs.append((a, oa, b, ob, float(gen.uniform(-pair_scale, pair_scale))))
    return InteractionEvaluator(base, sep.stage_utilities, sep.op_utilities, pairs)
