"""Bottom-up cost-increasing search for a separating formula.

Level c builds every candidate of cost exactly c from cached cheaper
entries, checks each against the specification before anything else, and
otherwise offers it to the language cache.  Candidate order is fixed:
connectives in CONNECTIVE_ORDER, children in bucket order, left index major.
The search is complete: when it reaches the cost of the overfitting formula
it returns that formula instead.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from . import bitsem
from . import kernels as K
from .bitsem import TraceContext, atom_cm, error_count
from .cache import CacheOOM, HashScheme, LanguageCache, resolve_scheme
from .formula import (
    COMMUTATIVE_OPS,
    CONNECTIVE_ORDER,
    OP_AND,
    OP_ATOM,
    OP_FINALLY,
    OP_NEXT,
    OP_NOT,
    OP_OR,
    OP_UNTIL,
    UNARY_OPS,
    UNIFORM,
    Atom,
    CostHomomorphism,
    Formula,
    Not,
    overfit,
    overfit_cost,
)
from .traces import Specification, SuffixTable

_CHUNK = 1 << 22  # candidates per kernel call, bounds deadline-check latency


class TimeoutExceeded(RuntimeError):
    pass


@dataclass
class LearnerConfig:
    """Search parameters; the fingerprint width is fixed at 128 (126 usable)."""

    max_traces: int = 64
    max_trace_len: int = 63
    fp_width: int = 128
    cost: CostHomomorphism = UNIFORM
    require_nnf: bool = False
    forbid_until: bool = False
    hash: HashScheme = field(default_factory=HashScheme)
    budget_bytes: int = 2 << 30
    noise: float = 0.0
    ceiling: Optional[int] = None
    backend: Optional[str] = None
    deadline: Optional[float] = None  # time.monotonic() cutoff

    def __post_init__(self):
        if self.max_traces < 1 or self.max_traces > 64:
            raise ValueError("max_traces must lie in [1, 64]")
        if self.max_trace_len < 1 or self.max_trace_len > 63:
            raise ValueError("max_trace_len must lie in [1, 63]")
        if self.fp_width != 128:
            raise ValueError("only the 128-bit fingerprint layout is supported")
        if not 0.0 <= self.noise <= 1.0:
            raise ValueError("noise must lie in [0, 1]")

    def err_max(self, spec: Specification) -> int:
        return math.floor(self.noise * spec.size + 1e-9)


@dataclass
class EnumStats:
    offered: int = 0
    admitted: int = 0
    duplicates: int = 0
    peak_bytes: int = 0
    precise: bool = False
    ceiling: int = 0
    atom_fast_path: bool = False
    levels: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "offered": self.offered,
            "admitted": self.admitted,
            "duplicates": self.duplicates,
            "peak_bytes": self.peak_bytes,
            "precise": self.precise,
            "ceiling": self.ceiling,
            "atom_fast_path": self.atom_fast_path,
            "levels": self.levels,
        }


@dataclass
class Solved:
    formula: Formula
    cost: int
    stats: EnumStats


@dataclass
class OutOfMemory:
    stats: EnumStats


@dataclass
class CeilingReached:
    formula: Formula  # the overfitting formula, which always separates
    ceiling: int
    stats: EnumStats


EnumOutcome = Union[Solved, OutOfMemory, CeilingReached]


def _validate(spec: Specification, alphabet, cfg: LearnerConfig):
    if not spec.pos or not spec.neg:
        raise ValueError("need at least one positive and one negative trace")
    if spec.size > cfg.max_traces:
        raise ValueError(f"{spec.size} traces exceed the limit of {cfg.max_traces}")
    for tr in spec.traces:
        if len(tr) > cfg.max_trace_len:
            raise ValueError(f"trace of length {len(tr)} exceeds {cfg.max_trace_len}")
    if any(len(tr) == 0 for tr in spec.pos):
        raise ValueError("an empty positive trace can never be satisfied")
    if spec.char_width() > alphabet.size:
        raise ValueError("traces use propositions outside the alphabet")


def _enabled_ops(cfg: LearnerConfig):
    ops = []
    for op in CONNECTIVE_ORDER:
        if op == OP_NOT and cfg.require_nnf:
            continue  # negation is folded into the negated-atom init instead
        if op == OP_UNTIL and cfg.forbid_until:
            continue
        ops.append(op)
    return ops


def _check_deadline(cfg: LearnerConfig):
    if cfg.deadline is not None and time.monotonic() > cfg.deadline:
        raise TimeoutExceeded("learner deadline exceeded")


def enum_learn(
    spec: Specification,
    alphabet,
    cfg: LearnerConfig | None = None,
    *,
    engine: str = "core",
) -> EnumOutcome:
    """Learn a separating formula, or signal OOM / fall back to overfitting.

    ``engine="reference"`` drives the same cache through the pure-Python
    candidate generator (handle_op) instead of the fused screening kernels;
    both engines are behaviorally identical.
    """
    cfg = cfg or LearnerConfig()
    _validate(spec, alphabet, cfg)
    ctx = TraceContext.from_spec(spec, alphabet)
    n_pos = len(spec.pos)
    err_max = cfg.err_max(spec)
    h = cfg.cost
    stats = EnumStats()
    stats.ceiling = overfit_cost(spec, alphabet, h)
    ceiling = stats.ceiling if cfg.ceiling is None else min(cfg.ceiling, stats.ceiling)

    atom_c = h.of(OP_ATOM)
    # fast path: try bare atoms (and negated atoms in NNF mode) before any caching
    for p in range(alphabet.size):
        if error_count(atom_cm(ctx, p), n_pos) <= err_max:
            stats.atom_fast_path = True
            return Solved(Atom(p), atom_c, stats)
    if cfg.require_nnf:
        for p in range(alphabet.size):
            if error_count(bitsem.bf_not(atom_cm(ctx, p), ctx.masks), n_pos) <= err_max:
                stats.atom_fast_path = True
                return Solved(Not(Atom(p)), atom_c + h.of(OP_NOT), stats)

    rs = resolve_scheme(cfg.hash, ctx.lengths, SuffixTable.from_spec(spec))
    stats.precise = rs.precise
    core = K.make_core(
        ctx.masks,
        n_pos,
        err_max,
        rs.variant,
        rs.proj_rows,
        rs.proj_offs,
        rs.fkp_bits,
        rs.mask_k,
        cfg.budget_bytes,
        backend=cfg.backend,
    )
    cache = LanguageCache(core)

    def finish(outcome):
        stats.offered = core.offered
        stats.admitted = core.admitted
        stats.duplicates = core.duplicates
        stats.peak_bytes = core.bytes_used
        stats.levels = cache.stats_rows()
        return outcome

    try:
        admitted_atoms = []
        for p in range(alphabet.size):
            if cache.try_admit(atom_cm(ctx, p), (OP_ATOM, p, -1), atom_c):
                admitted_atoms.append(p)
        if cfg.require_nnf:
            # negations only over atoms; duplicates of dropped atoms would be
            # duplicates themselves
            neg_c = atom_c + h.of(OP_NOT)
            for entry, p in enumerate(admitted_atoms):
                cache.try_admit(
                    bitsem.bf_not(atom_cm(ctx, p), ctx.masks), (OP_NOT, entry, -1), neg_c
                )
    except CacheOOM:
        return finish(OutOfMemory(stats))

    ops = _enabled_ops(cfg)
    run_level = _run_level_core if engine == "core" else _run_level_reference
    for c in range(atom_c + 1, ceiling):
        _check_deadline(cfg)
        t0 = time.perf_counter()
        cache.begin_level(c)
        hit = run_level(cache, ctx, cfg, ops, c, n_pos, err_max)
        if hit is not None:
            status, op, li, ri = hit
            if status == K.S_OOM:
                return finish(OutOfMemory(stats))
            formula = cache.build_candidate(op, li, ri)
            cache.end_level(c)
            stats.levels = cache.stats_rows()
            return finish(Solved(formula, c, stats))
        cache.end_level(c)
        cache._level_marks[-1]["ms"] = round((time.perf_counter() - t0) * 1e3, 3)
    return finish(CeilingReached(overfit(spec, alphabet), ceiling, stats))


def _bucket_pairs(cfg: LearnerConfig, c: int, op: int):
    """Child-cost combinations for candidates of cost c with top connective op."""
    w = cfg.cost.of(op)
    if op in UNARY_OPS:
        a = c - w
        return [(a, None)] if a >= 1 else []
    out = []
    for a in range(1, c - w):
        b = c - w - a
        if b < 1:
            continue
        if op in COMMUTATIVE_OPS and a > b:
            break
        out.append((a, b))
    return out


def _run_level_core(cache, ctx, cfg, ops, c, n_pos, err_max):
    core = cache.core
    for op in ops:
        for a, b in _bucket_pairs(cfg, c, op):
            if b is None:
                s, e = cache.bucket_range(a)
                for i0 in range(s, e, _CHUNK):
                    _check_deadline(cfg)
                    status, li, ri = core.screen_unary(op, i0, min(i0 + _CHUNK, e))
                    if status != K.S_DONE:
                        return status, op, li, ri
            else:
                sa, ea = cache.bucket_range(a)
                sb, eb = cache.bucket_range(b)
                if ea == sa or eb == sb:
                    continue
                tri = op in COMMUTATIVE_OPS and a == b
                outer = max(1, _CHUNK // (eb - sb))
                for i0 in range(sa, ea, outer):
                    _check_deadline(cfg)
                    status, li, ri = core.screen_binary(
                        op, i0, min(i0 + outer, ea), sb, eb, tri
                    )
                    if status != K.S_DONE:
                        return status, op, li, ri
    return None


# ---------------------------------------------------------------------------
# Reference engine: explicit candidate generator plus per-candidate check.
# Slow, but structurally transparent; the kernels must match it exactly.


def handle_op(op: int, c: int, cache: LanguageCache, ctx: TraceContext, h=UNIFORM):
    """All candidates of cost exactly c with top connective op, in order."""
    w = h.of(op)
    core = cache.core
    if op in UNARY_OPS:
        a = c - w
        if a < 1:
            return
        for i in cache.entries_of_cost(a):
            x = core.get_cm(i)
            yield _unary_cm(op, x, ctx), (op, i, -1)
        return
    for a in range(1, c - w):
        b = c - w - a
        if b < 1:
            continue
        if op in COMMUTATIVE_OPS and a > b:
            break
        tri = op in COMMUTATIVE_OPS and a == b
        sa, ea = cache.bucket_range(a)
        sb, eb = cache.bucket_range(b)
        for i in range(sa, ea):
            x = core.get_cm(i)
            start = max(i + 1, sb) if tri else sb
            for j in range(start, eb):
                y = core.get_cm(j)
                yield _binary_cm(op, x, y), (op, i, j)


def _unary_cm(op, x, ctx):
    if op == OP_NOT:
        return bitsem.bf_not(x, ctx.masks)
    if op == OP_NEXT:
        return bitsem.bf_next(x)
    if op == OP_FINALLY:
        return bitsem.bf_finally(x)
    return bitsem.bf_globally(x, ctx.masks)


def _binary_cm(op, x, y):
    if op == OP_AND:
        return bitsem.bf_and(x, y)
    if op == OP_OR:
        return bitsem.bf_or(x, y)
    return bitsem.bf_until(x, y)


def check_and_cache(cm, record, cache: LanguageCache, n_pos: int, err_max: int, c: int):
    """Solve check first, then relaxed-uniqueness admission.

    Returns the reconstructed formula when the candidate separates (within
    the error allowance), else None after offering it to the cache.
    """
    if error_count(cm, n_pos) <= err_max:
        return cache.build_candidate(*record)
    cache.try_admit(cm, record, c)
    return None


def _run_level_reference(cache, ctx, cfg, ops, c, n_pos, err_max):
    for op in ops:
        for cm, record in handle_op(op, c, cache, ctx, cfg.cost):
            _check_deadline(cfg)
            try:
                hit = check_and_cache(cm, record, cache, n_pos, err_max, c)
            except CacheOOM:
                return K.S_OOM, op, -1, -1
            if hit is not None:
                return K.S_SOLVED, record[0], record[1], record[2]
    return None
