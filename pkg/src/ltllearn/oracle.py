"""Reference semantics and a brute-force minimal learner.

Deliberately simple and slow: this module is the ground truth that the
word-level semantics and the enumerative learner are tested against, so it
must stay obviously correct and independent of them.
"""

from __future__ import annotations

import sys

from .formula import (
    CONNECTIVE_ORDER,
    COMMUTATIVE_OPS,
    OP_NOT,
    OP_UNTIL,
    UNARY_OPS,
    Atom,
    CostHomomorphism,
    Formula,
    Not,
    UNIFORM,
    make_binary,
    make_unary,
)
from .traces import Specification, suffix_closure_nonempty

# overfit formulae chain one disjunct per positive trace; allow deep recursion
sys.setrecursionlimit(max(sys.getrecursionlimit(), 20_000))


def holds(tr, i: int, f: Formula) -> bool:
    """Direct recursive satisfaction; positions at or past the end are false."""
    if i >= len(tr):
        return False
    if isinstance(f, Atom):
        return bool(tr[i] >> f.prop & 1)
    if isinstance(f, Not):
        return not holds(tr, i, f.child)
    kind = type(f).__name__
    if kind == "And":
        return holds(tr, i, f.left) and holds(tr, i, f.right)
    if kind == "Or":
        return holds(tr, i, f.left) or holds(tr, i, f.right)
    if kind == "Next":
        return holds(tr, i + 1, f.child)
    if kind == "Finally":
        return any(holds(tr, j, f.child) for j in range(i, len(tr)))
    if kind == "Globally":
        return all(holds(tr, j, f.child) for j in range(i, len(tr)))
    # Until: some j >= i satisfies the right side with the left side holding
    # at every position before it
    for j in range(i, len(tr)):
        if holds(tr, j, f.right):
            return True
        if not holds(tr, j, f.left):
            return False
    return False


def language_filter(f: Formula, traces) -> list:
    return [tr for tr in traces if holds(tr, 0, f)]


def check_separates(f: Formula, spec: Specification) -> bool:
    return all(holds(tr, 0, f) for tr in spec.pos) and not any(
        holds(tr, 0, f) for tr in spec.neg
    )


class NoFormulaWithinCeiling(RuntimeError):
    pass


def bruteforce_min(
    spec: Specification,
    h: CostHomomorphism = UNIFORM,
    *,
    n_props: int | None = None,
    require_nnf: bool = False,
    forbid_until: bool = False,
    ceiling: int = 12,
    rejected_log: list | None = None,
) -> Formula:
    """Exhaustive search for a cheapest separating formula.

    Candidates are deduplicated by their truth table over the non-empty
    suffix closure of the examples, which preserves minimality because the
    semantics is compositional over suffixes.  Intended for small problems
    only (the cross-check oracle for the real learner).
    """
    if n_props is None:
        n_props = spec.char_width()
    suffixes = sorted(suffix_closure_nonempty(spec.traces), key=lambda s: (len(s), s))
    suf_index = {s: k for k, s in enumerate(suffixes)}

    def signature(f):
        return tuple(holds(s, 0, f) for s in suffixes)

    def sig_separates(sig):
        return all(
            len(tr) > 0 and sig[suf_index[tr]] for tr in spec.pos
        ) and not any(len(tr) > 0 and sig[suf_index[tr]] for tr in spec.neg)

    buckets: dict[int, list] = {}
    seen = set()

    def offer(f, c):
        sig = signature(f)
        if sig_separates(sig):
            return f
        if rejected_log is not None:
            rejected_log.append((f, c))
        if sig not in seen:
            seen.add(sig)
            buckets.setdefault(c, []).append(f)
        return None

    atom_cost = h.of(0)
    for p in range(n_props):
        hit = offer(Atom(p), atom_cost)
        if hit is not None:
            return hit
    if require_nnf:
        for p in range(n_props):
            hit = offer(Not(Atom(p)), atom_cost + h.of(OP_NOT))
            if hit is not None:
                return hit

    for c in range(atom_cost + 1, ceiling + 1):
        for op in CONNECTIVE_ORDER:
            if op == OP_NOT and require_nnf:
                continue
            if op == OP_UNTIL and forbid_until:
                continue
            w = h.of(op)
            if op in UNARY_OPS:
                for child in buckets.get(c - w, []):
                    hit = offer(make_unary(op, child), c)
                    if hit is not None:
                        return hit
            else:
                commutative = op in COMMUTATIVE_OPS
                for a in range(1, c - w):
                    b = c - w - a
                    if commutative and a > b:
                        break
                    lefts = buckets.get(a, [])
                    rights = buckets.get(b, [])
                    for i, x in enumerate(lefts):
                        js = range(i + 1, len(rights)) if commutative and a == b else range(len(rights))
                        for j in js:
                            hit = offer(make_binary(op, x, rights[j]), c)
                            if hit is not None:
                                return hit
    raise NoFormulaWithinCeiling(f"no separating formula of cost <= {ceiling}")
