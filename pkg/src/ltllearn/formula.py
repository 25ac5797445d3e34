"""LTL formula syntax trees, cost homomorphisms, fragments, and text round-tripping.

Formulae are immutable after construction and safe to share across workers.
Connectives: atoms, !, &, |, X (next), F (finally), G (globally), U (until).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

# Opcodes double as node kinds and as indices into cost tables.
OP_ATOM = 0
OP_NOT = 1
OP_AND = 2
OP_OR = 3
OP_NEXT = 4
OP_FINALLY = 5
OP_GLOBALLY = 6
OP_UNTIL = 7

# Fixed candidate-generation order used by the enumerator and the brute-force
# learner alike, so equal-cost ties break identically everywhere.
CONNECTIVE_ORDER = (OP_NOT, OP_AND, OP_OR, OP_NEXT, OP_FINALLY, OP_GLOBALLY, OP_UNTIL)
UNARY_OPS = frozenset((OP_NOT, OP_NEXT, OP_FINALLY, OP_GLOBALLY))
BINARY_OPS = frozenset((OP_AND, OP_OR, OP_UNTIL))
COMMUTATIVE_OPS = frozenset((OP_AND, OP_OR))

OP_NAMES = {
    OP_ATOM: "atom",
    OP_NOT: "!",
    OP_AND: "&",
    OP_OR: "|",
    OP_NEXT: "X",
    OP_FINALLY: "F",
    OP_GLOBALLY: "G",
    OP_UNTIL: "U",
}


class Formula:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class Atom(Formula):
    prop: int


@dataclass(frozen=True, slots=True)
class Not(Formula):
    child: Formula


@dataclass(frozen=True, slots=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True, slots=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True, slots=True)
class Next(Formula):
    child: Formula


@dataclass(frozen=True, slots=True)
class Finally(Formula):
    child: Formula


@dataclass(frozen=True, slots=True)
class Globally(Formula):
    child: Formula


@dataclass(frozen=True, slots=True)
class Until(Formula):
    left: Formula
    right: Formula


_OPCODE_BY_TYPE = {
    Atom: OP_ATOM,
    Not: OP_NOT,
    And: OP_AND,
    Or: OP_OR,
    Next: OP_NEXT,
    Finally: OP_FINALLY,
    Globally: OP_GLOBALLY,
    Until: OP_UNTIL,
}

_UNARY_TYPE = {OP_NOT: Not, OP_NEXT: Next, OP_FINALLY: Finally, OP_GLOBALLY: Globally}
_BINARY_TYPE = {OP_AND: And, OP_OR: Or, OP_UNTIL: Until}


def opcode_of(f: Formula) -> int:
    return _OPCODE_BY_TYPE[type(f)]


def make_unary(op: int, child: Formula) -> Formula:
    return _UNARY_TYPE[op](child)


def make_binary(op: int, left: Formula, right: Formula) -> Formula:
    return _BINARY_TYPE[op](left, right)


def children(f: Formula):
    if isinstance(f, Atom):
        return ()
    if isinstance(f, (Not, Next, Finally, Globally)):
        return (f.child,)
    return (f.left, f.right)


def iter_nodes(f: Formula) -> Iterator[Formula]:
    """All nodes of the tree, iteratively (trees can nest thousands deep)."""
    stack = [f]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(children(node))


@dataclass(frozen=True)
class CostHomomorphism:
    """Per-connective positive weights, extended additively over syntax trees.

    ``weights`` is indexed by opcode; atoms share one entry.  Assigning a
    weight above the search ceiling effectively disables a connective.
    """

    weights: tuple[int, int, int, int, int, int, int, int]

    def __post_init__(self):
        if len(self.weights) != 8:
            raise ValueError("need one weight per node kind (8)")
        if any(w < 1 for w in self.weights):
            raise ValueError("all connective weights must be >= 1")

    @staticmethod
    def uniform() -> "CostHomomorphism":
        return CostHomomorphism((1,) * 8)

    def of(self, op: int) -> int:
        return self.weights[op]


UNIFORM = CostHomomorphism.uniform()


def cost(f: Formula, h: CostHomomorphism = UNIFORM) -> int:
    """Sum of per-node weights; equals the node count under uniform weights."""
    return sum(h.of(opcode_of(node)) for node in iter_nodes(f))


def is_nnf(f: Formula) -> bool:
    """True iff every negation is applied directly to an atom."""
    return all(isinstance(n.child, Atom) for n in iter_nodes(f) if isinstance(n, Not))


def is_until_free(f: Formula) -> bool:
    return not any(isinstance(n, Until) for n in iter_nodes(f))


def true_formula() -> Formula:
    """Tautology abbreviation, built from proposition 0."""
    return Or(Atom(0), Not(Atom(0)))


def false_formula() -> Formula:
    return And(Atom(0), Not(Atom(0)))


# ---------------------------------------------------------------------------
# Overfitting construction: a formula accepting exactly the positive traces
# (restricted to the example traces), used as the completeness ceiling.


class EmptyPositiveSet(ValueError):
    pass


def _overfit_char(char: int, n_props: int) -> Formula:
    """Conjunction pinning one trace position: present props, absent negated.

    Right-nested in proposition order; a block that would be an empty
    conjunction is omitted (a full character over a 1-prop alphabet is just
    the atom).
    """
    pos = [Atom(p) for p in range(n_props) if char >> p & 1]
    neg = [Not(Atom(p)) for p in range(n_props) if not char >> p & 1]
    parts = pos + neg
    out = parts[-1]
    for f in reversed(parts[:-1]):
        out = And(f, out)
    return out


def _overfit_trace(tr, n_props: int) -> Formula:
    # end marker first: no successor position exists
    out: Formula = Not(Next(true_formula()))
    for char in reversed(tr):
        out = And(_overfit_char(char, n_props), Next(out))
    return out


def overfit(spec, alphabet) -> Formula:
    """Disjunction of one exact-match formula per positive trace.

    Raises EmptyPositiveSet when there is no positive trace to overfit.
    """
    if not spec.pos:
        raise EmptyPositiveSet("cannot overfit an empty positive set")
    n = alphabet.size
    parts = [_overfit_trace(tr, n) for tr in spec.pos]
    out = parts[-1]
    for f in reversed(parts[:-1]):
        out = Or(f, out)
    return out


def overfit_cost(spec, alphabet, h: CostHomomorphism = UNIFORM) -> int:
    """Closed-form cost of overfit(spec) without building the tree.

    Large specifications make the tree itself expensive (thousands of traces,
    length-63 each); the search ceiling only needs the number.
    """
    if not spec.pos:
        raise EmptyPositiveSet("cannot overfit an empty positive set")
    n = alphabet.size
    w_atom, w_not, w_and = h.of(OP_ATOM), h.of(OP_NOT), h.of(OP_AND)
    w_or, w_next = h.of(OP_OR), h.of(OP_NEXT)
    end_cost = w_not + w_next + (2 * w_atom + w_not + w_or)  # !X(true)
    total = (len(spec.pos) - 1) * w_or
    for tr in spec.pos:
        total += end_cost
        for char in tr:
            m = bin(char).count("1")
            k = n - m
            char_cost = m * w_atom + k * (w_atom + w_not) + (m + k - 1) * w_and
            total += char_cost + w_and + w_next
    return total


# ---------------------------------------------------------------------------
# Text form.  Grammar: atoms are declared names (default p0..pN); prefix
# ! X F G; infix & | U, right-associative, with parentheses required whenever
# binary operators of different kinds mix.


class ParseError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


_RESERVED = {"X", "F", "G", "U"}


def _tokenize(text: str):
    tokens = []  # (kind, value, position)
    i = 0
    while i < len(text):
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c in "()!&|":
            tokens.append((c, c, i))
            i += 1
            continue
        if c.isalnum() or c == "_":
            j = i
            while j < len(text) and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            if word in _RESERVED:
                tokens.append((word, word, i))
            else:
                tokens.append(("name", word, i))
            i = j
            continue
        raise ParseError(f"unexpected character {c!r}", i)
    tokens.append(("end", "", len(text)))
    return tokens


_INFIX = {"&": OP_AND, "|": OP_OR, "U": OP_UNTIL}
_PREFIX = {"!": OP_NOT, "X": OP_NEXT, "F": OP_FINALLY, "G": OP_GLOBALLY}


class _Parser:
    def __init__(self, tokens, alphabet):
        self.tokens = tokens
        self.pos = 0
        self.alphabet = alphabet

    def peek(self):
        return self.tokens[self.pos]

    def take(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def parse_formula(self) -> Formula:
        left = self.parse_unary()
        kind, _, at = self.peek()
        if kind not in _INFIX:
            return left
        op = kind
        operands = [left]
        while True:
            kind, _, at = self.peek()
            if kind not in _INFIX:
                break
            if kind != op:
                raise ParseError(
                    f"mixed infix operators {op!r} and {kind!r} need parentheses", at
                )
            self.take()
            operands.append(self.parse_unary())
        out = operands[-1]
        for f in reversed(operands[:-1]):
            out = make_binary(_INFIX[op], f, out)
        return out

    def parse_unary(self) -> Formula:
        kind, _, at = self.peek()
        if kind in _PREFIX:
            self.take()
            return make_unary(_PREFIX[kind], self.parse_unary())
        if kind == "(":
            self.take()
            inner = self.parse_formula()
            kind, _, at = self.peek()
            if kind != ")":
                raise ParseError("expected ')'", at)
            self.take()
            return inner
        if kind == "name":
            _, name, at = self.take()
            prop = self.alphabet.index_of(name)
            if prop is None:
                raise ParseError(f"unknown proposition {name!r}", at)
            return Atom(prop)
        raise ParseError(f"expected a formula, found {kind!r}", at)


def parse_formula(text: str, alphabet) -> Formula:
    parser = _Parser(_tokenize(text), alphabet)
    out = parser.parse_formula()
    kind, _, at = parser.peek()
    if kind != "end":
        raise ParseError(f"trailing input {kind!r}", at)
    return out


def print_formula(f: Formula, alphabet=None) -> str:
    """Canonical text form; printing then parsing restores the same tree.

    Binary children are parenthesized except a right child of the same
    operator (chains parse right-associatively).  Iterative rendering:
    overfit trees nest too deep for recursion.
    """

    def name(prop):
        return alphabet.names[prop] if alphabet is not None else f"p{prop}"

    out = []
    # stack holds literal strings to emit or (node, wrap-in-parens) pairs;
    # items are pushed in reverse of emission order
    stack: list = [(f, False)]
    while stack:
        item = stack.pop()
        if isinstance(item, str):
            out.append(item)
            continue
        node, wrap = item
        if wrap:
            out.append("(")
            stack.append(")")
            stack.append((node, False))
            continue
        op = opcode_of(node)
        if op == OP_ATOM:
            out.append(name(node.prop))
        elif op in UNARY_OPS:
            out.append(OP_NAMES[op] if op == OP_NOT else OP_NAMES[op] + " ")
            stack.append((node.child, opcode_of(node.child) in BINARY_OPS))
        else:
            left_wrap = opcode_of(node.left) in BINARY_OPS
            right_op = opcode_of(node.right)
            right_wrap = right_op in BINARY_OPS and right_op != op
            stack.append((node.right, right_wrap))
            stack.append(f" {OP_NAMES[op]} ")
            stack.append((node.left, left_wrap))
    return "".join(out)
