"""Traces, specifications, suffix closure, and the benchmark trace-file format.

A trace is a tuple of characters; each character is an int bitmask over the
alphabet's propositions (bit p set iff proposition p holds at that position).
Everything here is immutable after construction and shareable across workers.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from itertools import combinations, product

Trace = tuple  # tuple[int, ...], each int a character bitmask

MAX_TRACE_LEN = 63  # one 64-bit word per characteristic sequence, top bit spare


class TraceFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Alphabet:
    names: tuple[str, ...]

    def __post_init__(self):
        if not self.names:
            raise ValueError("alphabet must be non-empty")
        if len(set(self.names)) != len(self.names):
            raise ValueError("proposition names must be unique")
        for n in self.names:
            if n in {"X", "F", "G", "U"} or not n or not all(c.isalnum() or c == "_" for c in n):
                raise ValueError(f"invalid proposition name {n!r}")

    @staticmethod
    def default(size: int) -> "Alphabet":
        return Alphabet(tuple(f"p{i}" for i in range(size)))

    @property
    def size(self) -> int:
        return len(self.names)

    @property
    def n_chars(self) -> int:
        """Number of distinct characters (subsets of propositions)."""
        return 1 << len(self.names)

    def index_of(self, name: str):
        try:
            return self.names.index(name)
        except ValueError:
            return None


@dataclass(frozen=True)
class Specification:
    """Disjoint positive/negative trace lists; order is fixed and meaningful
    (it defines the row order of characteristic matrices)."""

    pos: tuple
    neg: tuple

    def __post_init__(self):
        pos = _dedup_side(self.pos, "positive")
        neg = _dedup_side(self.neg, "negative")
        object.__setattr__(self, "pos", pos)
        object.__setattr__(self, "neg", neg)
        clash = set(pos) & set(neg)
        if clash:
            tr = next(iter(clash))
            raise ValueError(
                f"trace occurs on both sides (positive #{pos.index(tr)}, "
                f"negative #{neg.index(tr)})"
            )

    @property
    def size(self) -> int:
        return len(self.pos) + len(self.neg)

    @property
    def traces(self) -> tuple:
        return self.pos + self.neg

    def char_width(self) -> int:
        """Highest proposition bit used, as a minimum alphabet size."""
        top = 0
        for tr in self.traces:
            for c in tr:
                top |= c
        return max(1, top.bit_length())


def _dedup_side(traces, side: str) -> tuple:
    seen = set()
    out = []
    for tr in traces:
        tr = tuple(int(c) for c in tr)
        if any(c < 0 for c in tr):
            raise ValueError("trace characters must be non-negative bitmasks")
        if tr in seen:
            warnings.warn(f"duplicate {side} trace dropped: {tr}", stacklevel=3)
            continue
        seen.add(tr)
        out.append(tr)
    return tuple(out)


def hamming_distance(s: Trace, t: Trace) -> int:
    if len(s) != len(t):
        raise ValueError("traces must have equal length")
    return sum(1 for a, b in zip(s, t) if a != b)


def hamming_ball(tr: Trace, delta: int, alphabet: Alphabet) -> set:
    """All traces of the same length at distance exactly ``delta``."""
    if delta < 0 or delta > len(tr):
        raise ValueError("delta must lie in [0, len(trace)]")
    if delta == 0:
        return {tuple(tr)}
    n_chars = alphabet.n_chars
    out = set()
    for positions in combinations(range(len(tr)), delta):
        alternatives = [
            [c for c in range(n_chars) if c != tr[i]] for i in positions
        ]
        for chosen in product(*alternatives):
            t = list(tr)
            for i, c in zip(positions, chosen):
                t[i] = c
            out.add(tuple(t))
    return out


def suffix_closure_nonempty(traces) -> set:
    """All non-empty suffixes of the given traces, deduplicated."""
    out = set()
    for tr in traces:
        tr = tuple(tr)
        for i in range(len(tr)):
            out.add(tr[i:])
    return out


@dataclass(frozen=True)
class SuffixTable:
    """Deduplicated suffixes of a specification with one representative
    (row, offset) per suffix, in first-occurrence scan order.

    Used to count distinct suffixes (which decides whether uniqueness
    fingerprints can be exact) and to project a characteristic matrix onto
    one bit per distinct suffix.
    """

    count: int
    rows: tuple[int, ...]
    offsets: tuple[int, ...]
    index: dict = field(repr=False)

    @staticmethod
    def from_spec(spec: Specification) -> "SuffixTable":
        index = {}
        rows = []
        offsets = []
        for r, tr in enumerate(spec.traces):
            for j in range(len(tr)):
                suf = tr[j:]
                if suf not in index:
                    index[suf] = (r, j)
                    rows.append(r)
                    offsets.append(j)
        return SuffixTable(len(index), tuple(rows), tuple(offsets), index)

    def locate(self, row: int, offset: int, spec: Specification):
        """Representative (row, offset) of the suffix starting there."""
        return self.index[spec.traces[row][offset:]]


# ---------------------------------------------------------------------------
# Trace file format: one trace per line, positions separated by ';', each
# position a comma-separated 0/1 vector over the alphabet; a '---' line
# separates positives from negatives.  Further '---' sections are ignored.


def _parse_char(token: str, line_no: int):
    bits = token.split(",")
    char = 0
    for i, b in enumerate(bits):
        b = b.strip()
        if b == "1":
            char |= 1 << i
        elif b != "0":
            raise TraceFormatError(f"line {line_no}: bad proposition value {b!r}")
    return char, len(bits)


def _parse_trace_line(line: str, line_no: int, width):
    chars = []
    for token in line.split(";"):
        char, w = _parse_char(token, line_no)
        if width is None:
            width = w
        elif w != width:
            raise TraceFormatError(
                f"line {line_no}: expected {width} propositions, found {w}"
            )
        chars.append(char)
    if len(chars) > MAX_TRACE_LEN:
        raise TraceFormatError(
            f"line {line_no}: trace longer than {MAX_TRACE_LEN} positions"
        )
    return tuple(chars), width


def load_spec(path) -> tuple[Specification, Alphabet]:
    sections: list[list] = [[]]
    width = None
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line == "---":
                sections.append([])
                continue
            tr, width = _parse_trace_line(line, line_no, width)
            sections[-1].append(tr)
    if len(sections) < 2:
        raise TraceFormatError("missing '---' separator between trace blocks")
    if len(sections) > 2:
        warnings.warn(f"{path}: ignoring {len(sections) - 2} extra '---' section(s)")
    if width is None:
        raise TraceFormatError("empty trace file")
    spec = Specification(tuple(sections[0]), tuple(sections[1]))
    return spec, Alphabet.default(width)


def format_trace(tr: Trace, width: int) -> str:
    return ";".join(
        ",".join("1" if c >> p & 1 else "0" for p in range(width)) for c in tr
    )


def save_spec(spec: Specification, path, alphabet: Alphabet | None = None) -> None:
    width = alphabet.size if alphabet is not None else spec.char_width()
    if any(len(tr) == 0 for tr in spec.traces):
        raise TraceFormatError("the trace file format cannot carry empty traces")
    with open(path, "w", encoding="utf-8") as fh:
        for tr in spec.pos:
            fh.write(format_trace(tr, width) + "\n")
        fh.write("---\n")
        for tr in spec.neg:
            fh.write(format_trace(tr, width) + "\n")
