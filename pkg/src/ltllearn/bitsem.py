"""Branch-free, word-level LTL semantics over characteristic matrices.

A characteristic sequence (CS) packs one trace's satisfaction bits into a
single 64-bit word: position j of the trace lives at bit (63 - j), so a left
shift by k moves position j+k's value into position j.  Bits at positions
at or beyond the trace length are always 0 ("beyond the end nothing holds").
A characteristic matrix (CM) stacks the CSs of all specification traces, one
row per trace, in specification order (positives first).

F and U use exponential propagation: OR/AND-folding shifts by successive
powers of two, so a 64-bit word needs exactly 6 rounds regardless of content.

All operations are pure functions on numpy uint64 arrays and broadcast over
leading batch axes; nothing here mutates its inputs.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .formula import (
    OP_AND,
    OP_ATOM,
    OP_FINALLY,
    OP_GLOBALLY,
    OP_NEXT,
    OP_NOT,
    OP_OR,
    OP_UNTIL,
    Atom,
    opcode_of,
)
from .traces import MAX_TRACE_LEN, Specification

WORD = 64
ROUNDS = 6  # ceil(log2(WORD)); fixed round count keeps the kernels branch-free

_U64 = np.uint64
_SHIFTS = tuple(_U64(1 << i) for i in range(ROUNDS))  # 1, 2, 4, 8, 16, 32
_ONE = _U64(1)
_TOPBIT = _U64(63)

# Out-of-range-bit checks after every operation; cheap, but off by default on
# the hot path.
_DEBUG = bool(os.environ.get("LTLLEARN_DEBUG_MASKS"))


def length_mask(n: int) -> int:
    """Validity mask for a trace of length n: 1-bits at positions 0..n-1."""
    if n == 0:
        return 0
    return ((1 << n) - 1) << (WORD - n)


def _checked(out, masks):
    if _DEBUG and bool(np.any(out & ~masks)):
        raise AssertionError("characteristic bits escaped the validity mask")
    return out


@dataclass(frozen=True)
class TraceContext:
    """Shared per-specification data: row masks, lengths, and atom rows."""

    lengths: np.ndarray  # (R,) int64
    masks: np.ndarray  # (R,) uint64
    n_pos: int
    atoms: np.ndarray  # (n_props, R) uint64

    @staticmethod
    def from_traces(traces, n_props: int, n_pos: int = 0) -> "TraceContext":
        traces = [tuple(tr) for tr in traces]
        for tr in traces:
            if len(tr) > MAX_TRACE_LEN:
                raise ValueError(f"trace of length {len(tr)} exceeds {MAX_TRACE_LEN}")
        lengths = np.array([len(tr) for tr in traces], dtype=np.int64)
        masks = np.array([length_mask(len(tr)) for tr in traces], dtype=_U64)
        atoms = np.zeros((n_props, len(traces)), dtype=_U64)
        for r, tr in enumerate(traces):
            for j, char in enumerate(tr):
                bit = _U64(1 << (WORD - 1 - j))
                for p in range(n_props):
                    if char >> p & 1:
                        atoms[p, r] |= bit
        return TraceContext(lengths, masks, n_pos, atoms)

    @staticmethod
    def from_spec(spec: Specification, alphabet) -> "TraceContext":
        return TraceContext.from_traces(spec.traces, alphabet.size, len(spec.pos))

    @property
    def n_rows(self) -> int:
        return len(self.lengths)

    def atom_row(self, prop: int) -> np.ndarray:
        return self.atoms[prop].copy()


def atom_cm(ctx: TraceContext, prop: int) -> np.ndarray:
    """Row i holds bit j iff proposition ``prop`` is in trace i's character j."""
    return ctx.atom_row(prop)


def bf_not(x: np.ndarray, masks: np.ndarray) -> np.ndarray:
    # complement, then clamp: out-of-range positions must stay false
    return _checked(~x & masks, masks)


def bf_and(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    _check_shape(x, y)
    return x & y


def bf_or(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    _check_shape(x, y)
    return x | y


def bf_next(x: np.ndarray) -> np.ndarray:
    # position j receives position j+1; the final position receives 0
    return x << _ONE


def bf_finally(x: np.ndarray) -> np.ndarray:
    out = x.copy()
    for s in _SHIFTS:
        out |= out << s
    return out


def bf_globally(x: np.ndarray, masks: np.ndarray) -> np.ndarray:
    # dual of F over the complement-within-mask; direct AND-propagation would
    # smear the zeros that sit beyond each trace's end into valid positions
    viol = bf_finally(~x & masks)
    return _checked(~viol & masks, masks)


def bf_until(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    _check_shape(x, y)
    out = y.copy()
    run = x.copy()  # bit j: x holds on the next 2^i positions starting at j
    for i, s in enumerate(_SHIFTS):
        out |= run & (out << s)
        if i + 1 < ROUNDS:  # final window update is dead
            run &= run << s
    return out


def _check_shape(x, y):
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")


def error_count(cm: np.ndarray, n_pos: int) -> int:
    """Rows whose position-0 verdict disagrees with their side."""
    bit0 = (cm >> _TOPBIT).astype(bool)
    return int(np.count_nonzero(~bit0[:n_pos])) + int(np.count_nonzero(bit0[n_pos:]))


def separates(cm: np.ndarray, n_pos: int) -> bool:
    """True iff all positive rows accept at position 0 and no negative row does."""
    return error_count(cm, n_pos) == 0


def eval_cm(f, ctx: TraceContext) -> np.ndarray:
    """Characteristic matrix of a formula over the context's traces."""
    memo: dict[int, np.ndarray] = {}

    def go(node):
        key = id(node)
        got = memo.get(key)
        if got is not None:
            return got
        op = opcode_of(node)
        if op == OP_ATOM:
            out = ctx.atom_row(node.prop)
        elif op == OP_NOT:
            out = bf_not(go(node.child), ctx.masks)
        elif op == OP_AND:
            out = bf_and(go(node.left), go(node.right))
        elif op == OP_OR:
            out = bf_or(go(node.left), go(node.right))
        elif op == OP_NEXT:
            out = bf_next(go(node.child))
        elif op == OP_FINALLY:
            out = bf_finally(go(node.child))
        elif op == OP_GLOBALLY:
            out = bf_globally(go(node.child), ctx.masks)
        else:
            out = bf_until(go(node.left), go(node.right))
        memo[key] = out
        return out

    # iterative scheme not needed: learned formulae stay shallow, and deep
    # overfit chains are evaluated via eval_deep below
    return go(f)


def eval_deep_cm(f, ctx: TraceContext) -> np.ndarray:
    """Like eval_cm but with an explicit stack; safe for very deep trees."""
    from .formula import children

    memo: dict[int, np.ndarray] = {}
    stack = [f]
    while stack:
        node = stack[-1]
        if id(node) in memo:
            stack.pop()
            continue
        kids = children(node)
        pending = [k for k in kids if id(k) not in memo]
        if pending:
            stack.extend(pending)
            continue
        stack.pop()
        op = opcode_of(node)
        if op == OP_ATOM:
            out = ctx.atom_row(node.prop)
        elif op == OP_NOT:
            out = bf_not(memo[id(node.child)], ctx.masks)
        elif op == OP_NEXT:
            out = bf_next(memo[id(node.child)])
        elif op == OP_FINALLY:
            out = bf_finally(memo[id(node.child)])
        elif op == OP_GLOBALLY:
            out = bf_globally(memo[id(node.child)], ctx.masks)
        elif op == OP_AND:
            out = bf_and(memo[id(node.left)], memo[id(node.right)])
        elif op == OP_OR:
            out = bf_or(memo[id(node.left)], memo[id(node.right)])
        else:
            out = bf_until(memo[id(node.left)], memo[id(node.right)])
        memo[id(node)] = out
    return memo[id(f)]


def filter_traces(f, traces, n_props: int) -> list:
    """Traces accepted by the formula (word-level evaluation)."""
    traces = list(traces)
    if not traces:
        return []
    ctx = TraceContext.from_traces(traces, n_props)
    cm = eval_deep_cm(f, ctx)
    bit0 = (cm >> _TOPBIT).astype(bool)
    return [tr for tr, ok in zip(traces, bit0) if ok]


# ---------------------------------------------------------------------------
# Single-trace evaluation on plain ints; handy for samplers and spot checks.


def eval_trace_cs(f, tr) -> int:
    """Characteristic sequence of a formula over one trace, as a python int."""
    n = len(tr)
    mask = length_mask(n)

    def go(node):
        op = opcode_of(node)
        if op == OP_ATOM:
            cs = 0
            for j, char in enumerate(tr):
                if char >> node.prop & 1:
                    cs |= 1 << (WORD - 1 - j)
            return cs
        if op == OP_NOT:
            return ~go(node.child) & mask
        if op == OP_AND:
            return go(node.left) & go(node.right)
        if op == OP_OR:
            return go(node.left) | go(node.right)
        if op == OP_NEXT:
            return (go(node.child) << 1) & _M64
        if op == OP_FINALLY:
            return smear_or(go(node.child))
        if op == OP_GLOBALLY:
            return ~smear_or(~go(node.child) & mask) & mask
        return until_int(go(node.left), go(node.right))

    return go(f)


_M64 = (1 << 64) - 1


def smear_or(cs: int, rounds: int = ROUNDS) -> int:
    for i in range(rounds):
        cs |= (cs << (1 << i)) & _M64
    return cs


def until_int(cs1: int, cs2: int, rounds: int = ROUNDS) -> int:
    for i in range(rounds):
        cs2 |= cs1 & (cs2 << (1 << i)) & _M64
        if i + 1 < rounds:
            cs1 &= (cs1 << (1 << i)) & _M64
    return cs2


# Instrumented variants: same propagation, but they report every intermediate
# state, which pins down the round count (width 64 -> exactly 6 rounds) and
# reproduces worked bit-level examples at smaller widths.


def rounds_for_width(width: int) -> int:
    if width < 2:
        return 1
    return (width - 1).bit_length()


def finally_traced(cs: int, width: int = WORD):
    """OR-smear at the given word width, returning all intermediate states."""
    m = (1 << width) - 1
    states = []
    for i in range(rounds_for_width(width)):
        cs |= (cs << (1 << i)) & m
        states.append(cs)
    return cs, states


def until_traced(cs1: int, cs2: int, width: int = WORD):
    """Until-propagation at the given width; states record each assignment."""
    m = (1 << width) - 1
    states = []
    rounds = rounds_for_width(width)
    for i in range(rounds):
        cs2 |= cs1 & (cs2 << (1 << i)) & m
        states.append(("cs2", cs1, cs2))
        if i + 1 < rounds:
            cs1 &= (cs1 << (1 << i)) & m
            states.append(("cs1", cs1, cs2))
    return cs2, states


# ---------------------------------------------------------------------------
# Debug rendering: positions left to right, '.' marks out-of-range bits.


def render_cs(cs: int, length: int, width: int | None = None) -> str:
    if width is None:
        width = length
    bits = []
    for j in range(width):
        if j < length:
            bits.append("1" if cs >> (WORD - 1 - j) & 1 else "0")
        else:
            bits.append(".")
    return "".join(bits)


def dump_cm(cm: np.ndarray, ctx: TraceContext, width: int = WORD) -> str:
    return "\n".join(
        render_cs(int(row), int(n), width) for row, n in zip(cm, ctx.lengths)
    )
