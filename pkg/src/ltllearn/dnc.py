"""Divide-and-conquer orchestration around the enumerator.

Specifications larger than the split window are decomposed into four
sub-problems whose results recombine as (f11 & f12) | (f21 & f22); the
window is halved whenever the enumerator runs out of memory.  Sub-problems
with an empty side short-circuit to the true/false abbreviations, which
keeps recombination sound.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import bitsem
from .enumerator import (
    CeilingReached,
    LearnerConfig,
    OutOfMemory,
    Solved,
    enum_learn,
)
from .formula import And, Formula, Or, cost, false_formula, true_formula
from .traces import Specification


class WindowExhausted(RuntimeError):
    """The window hit its minimum and the enumerator still ran out of memory."""


@dataclass(frozen=True)
class SplitConfig:
    strategy: str = "rand"  # "det" | "rand"
    window: int = 64
    min_window: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in ("det", "rand"):
            raise ValueError(f"unknown split strategy {self.strategy!r}")
        if not 1 <= self.min_window <= self.window:
            raise ValueError("need window >= min_window >= 1")


@dataclass
class DncResult:
    formula: Formula
    nodes: list = field(default_factory=list)  # one dict per solver/split node
    enum_calls: int = 0
    enum_stats: list = field(default_factory=list)


class _Runner:
    def __init__(self, spec, alphabet, cfg, split_cfg, debug_check, result):
        self.alphabet = alphabet
        self.cfg = cfg
        self.split = split_cfg
        self.debug_check = debug_check
        self.res = result
        self.rng = np.random.default_rng(split_cfg.seed)
        self.next_id = 0

    def fresh_id(self):
        self.next_id += 1
        return self.next_id

    def log(self, **row):
        self.res.nodes.append(row)

    def filter(self, f, traces):
        return bitsem.filter_traces(f, traces, self.alphabet.size)

    def filter_out(self, f, traces):
        kept = set(self.filter(f, traces))
        return [tr for tr in traces if tr not in kept]

    # -- leaf solving -----------------------------------------------------------

    def solve_leaf(self, pos, neg, window, parent):
        node = self.fresh_id()
        if not pos:
            self.log(node=node, parent=parent, kind="empty-pos", window=window)
            return false_formula()
        if not neg:
            self.log(node=node, parent=parent, kind="empty-neg", window=window)
            return true_formula()
        spec = Specification(tuple(pos), tuple(neg))
        out = enum_learn(spec, self.alphabet, self.cfg)
        self.res.enum_calls += 1
        self.res.enum_stats.append(out.stats.as_dict())
        if isinstance(out, OutOfMemory):
            self.log(node=node, parent=parent, kind="enum-oom", window=window,
                     n_pos=len(pos), n_neg=len(neg))
            return None
        f = out.formula
        outcome = "solved" if isinstance(out, Solved) else "ceiling"
        self.log(node=node, parent=parent, kind=outcome, window=window,
                 n_pos=len(pos), n_neg=len(neg), cost=cost(f, self.cfg.cost))
        return f

    # -- recursion ----------------------------------------------------------------

    def node(self, pos, neg, window, parent=0):
        """Solve (pos, neg), splitting while it exceeds the window and
        halving the window on out-of-memory."""
        if not pos or not neg:
            return self.solve_leaf(pos, neg, window, parent)
        while True:
            if len(pos) + len(neg) <= window:
                f = self.solve_leaf(pos, neg, window, parent)
                if f is not None:
                    return f
            else:
                f = self.split_node(pos, neg, window, parent)
                if f is not None:
                    return f
            if window // 2 < self.split.min_window:
                raise WindowExhausted(
                    f"window {window} exhausted on {len(pos)}+{len(neg)} traces"
                )
            window //= 2

    def split_node(self, pos, neg, window, parent):
        node = self.fresh_id()
        if self.split.strategy == "det":
            f = self.det_split(pos, neg, window, node)
        else:
            f = self.rand_split(pos, neg, window, node)
        if f is None:
            return None
        self.log(node=node, parent=parent, kind=f"split-{self.split.strategy}",
                 window=window, n_pos=len(pos), n_neg=len(neg),
                 cost=cost(f, self.cfg.cost))
        if self.debug_check is not None and not self.debug_check(f, pos, neg):
            raise AssertionError("recombined formula fails its node specification")
        return f

    def det_split(self, pos, neg, window, node):
        """Halve both sides by list order; the four sub-calls drop traces the
        earlier results already settle, and recombine as (f11&f12)|(f21&f22).

        The left disjunct's covered set is where f11 and f12 both hold;
        positives of the second half that it covers are excluded from the
        right disjunct's sub-problems.
        """
        p1, p2 = _halve(pos)
        n1, n2 = _halve(neg)
        f11 = self.node(p1, n1, window, node)
        f12 = self.node(p1, self.filter(f11, n2), window, node)
        covered = set(self.filter(f11, p2)) & set(self.filter(f12, p2))
        p2_rest = [tr for tr in p2 if tr not in covered]
        f21 = self.node(p2_rest, n1, window, node)
        f22 = self.node(p2_rest, self.filter(f21, n2), window, node)
        return Or(And(f11, f12), And(f21, f22))

    def rand_split(self, pos, neg, window, node):
        """Learn f11 from a balanced random sample, then recurse on the parts
        of the specification it classifies each way."""
        f11 = self.rand_aux(pos, neg, window, node)
        if f11 is None:
            return None
        pos_in = self.filter(f11, pos)
        pos_out = self.filter_out(f11, pos)
        neg_in = self.filter(f11, neg)
        neg_out = self.filter_out(f11, neg)
        f12 = self.node(pos_in, neg_in, window, node)
        f21 = self.node(pos_out, neg_out, window, node)
        f22 = self.node(pos_out, neg_in, window, node)
        return Or(And(f11, f12), And(f21, f22))

    def rand_aux(self, pos, neg, window, parent):
        """Enumerate on a random sub-specification of at most ``window``
        traces, as balanced as availability allows; halve and resample on OOM."""
        win = window
        while True:
            take_p, take_n = _balanced_quota(len(pos), len(neg), win)
            pi = sorted(self.rng.choice(len(pos), size=take_p, replace=False))
            ni = sorted(self.rng.choice(len(neg), size=take_n, replace=False))
            sub_p = [pos[i] for i in pi]
            sub_n = [neg[i] for i in ni]
            f = self.solve_leaf(sub_p, sub_n, win, parent)
            if f is not None:
                return f
            if win // 2 < self.split.min_window:
                return None  # outer loop halves the node window
            win //= 2


def _halve(items):
    mid = (len(items) + 1) // 2  # odd count: extra element stays in the first half
    return list(items[:mid]), list(items[mid:])


def _balanced_quota(n_pos, n_neg, window):
    """Sample sizes summing to at most window, as equal as possible."""
    half = window // 2
    take_p = min(n_pos, half)
    take_n = min(n_neg, window - take_p)
    take_p = min(n_pos, window - take_n)
    return take_p, take_n


def dnc_learn(
    spec: Specification,
    alphabet,
    cfg: LearnerConfig | None = None,
    split_cfg: SplitConfig | None = None,
    debug_check: Optional[Callable] = None,
) -> DncResult:
    """Learn a separating formula for a specification of any cardinality.

    ``debug_check(formula, pos, neg) -> bool`` is invoked on every
    recombination node when given; a False verdict aborts the run.
    """
    if not spec.pos or not spec.neg:
        raise ValueError("need at least one positive and one negative trace")
    cfg = cfg or LearnerConfig()
    split_cfg = split_cfg or SplitConfig()
    result = DncResult(formula=true_formula())
    runner = _Runner(spec, alphabet, cfg, split_cfg, debug_check, result)
    result.formula = runner.node(list(spec.pos), list(spec.neg), split_cfg.window)
    return result
