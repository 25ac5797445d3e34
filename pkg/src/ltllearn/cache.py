"""Cost-indexed language cache with relaxed-uniqueness admission.

Admission hashes each candidate matrix to a 126-bit fingerprint and admits
only unseen fingerprints: false "already seen" verdicts are allowed (they
only prune the search), false "new" verdicts are impossible because hashing
is deterministic.  When the matrix carries at most 126 distinct bits the
fingerprint is those bits themselves and admission is exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels as K
from ._kernels_py import CoreOOM
from .formula import OP_ATOM, Atom, Formula, UNARY_OPS, make_binary, make_unary
from .traces import Specification, SuffixTable

CacheOOM = CoreOOM

FP_BITS = K.FP_BITS


@dataclass(frozen=True)
class HashScheme:
    """Fingerprint recipe: hashing variant plus optional masked-out low bits."""

    variant: str = "mueller"  # "mueller" | "fkp"
    mask_bits: int = 0

    def __post_init__(self):
        if self.variant not in ("mueller", "fkp"):
            raise ValueError(f"unknown hash variant {self.variant!r}")
        if not 0 <= self.mask_bits <= FP_BITS:
            raise ValueError("mask_bits must lie in [0, 126]")


@dataclass(frozen=True)
class ResolvedScheme:
    """Concrete fingerprint parameters for one specification shape."""

    variant: int  # kernels.V_*
    proj_rows: tuple = ()
    proj_offs: tuple = ()
    fkp_bits: int = 0
    mask_k: int = 0

    @property
    def precise(self) -> bool:
        return self.variant == K.V_GATHER


def flatten_projection(lengths) -> tuple[tuple, tuple]:
    rows, offs = [], []
    for r, n in enumerate(lengths):
        for j in range(int(n)):
            rows.append(r)
            offs.append(j)
    return tuple(rows), tuple(offs)


def resolve_scheme(
    scheme: HashScheme,
    lengths,
    suffix_table: SuffixTable | None = None,
) -> ResolvedScheme:
    """Pick exact bit-gathering when it fits, the configured hash otherwise.

    With a suffix table, "fits" means at most 126 distinct suffixes (shared
    suffixes always carry equal bits, so one representative bit each is still
    exact).  Without one, it means at most 126 flattened live bits.
    """
    if suffix_table is not None:
        if suffix_table.count <= FP_BITS:
            return ResolvedScheme(
                K.V_GATHER,
                suffix_table.rows,
                suffix_table.offsets,
                mask_k=scheme.mask_bits,
            )
    elif sum(int(n) for n in lengths) <= FP_BITS:
        return ResolvedScheme(
            K.V_GATHER, *flatten_projection(lengths), mask_k=scheme.mask_bits
        )
    if scheme.variant == "mueller":
        return ResolvedScheme(K.V_MUELLER, mask_k=scheme.mask_bits)
    return ResolvedScheme(
        K.V_FKP, fkp_bits=K.fkp_bits_per_row(len(lengths)), mask_k=scheme.mask_bits
    )


def fingerprint(cm, lengths, scheme: HashScheme) -> int:
    """Fingerprint of one characteristic matrix as a 128-bit int (top 2 bits 0)."""
    rs = resolve_scheme(scheme, lengths)
    return K.fingerprint_int(
        [int(w) for w in cm],
        rs.variant,
        rs.proj_rows,
        rs.proj_offs,
        rs.fkp_bits,
        rs.mask_k,
    )


class LanguageCache:
    """Append-only store of admitted matrices, bucketed by formula cost.

    Entries carry a reconstruction record (connective + child entry indices,
    or the atom id), so any entry can be rebuilt into a formula.  Buckets for
    costs below the frontier are frozen forever.
    """

    def __init__(self, core):
        self.core = core
        self._buckets: dict[int, list[int]] = {}
        self._frontier = 0  # lowest cost still open for admission
        self._level_marks: list[dict] = []
        self._last_counts = (0, 0, 0)

    # -- admission ---------------------------------------------------------

    def try_admit(self, cm, record, cost: int) -> bool:
        """Admit one matrix at the given cost; False when already fingerprinted.

        Raises CacheOOM when the memory budget would be exceeded.
        """
        op, lhs, rhs = record
        if cost < self._frontier:
            raise ValueError(f"bucket for cost {cost} is frozen")
        idx = self.core.add_entry(np.asarray(cm, dtype=np.uint64), op, lhs, rhs)
        if idx < 0:
            return False
        bucket = self._buckets.setdefault(cost, [idx, idx])
        if bucket[1] != idx:
            raise AssertionError("non-contiguous admission order")
        bucket[1] = idx + 1
        self._frontier = cost
        return True

    # -- level bookkeeping used by the enumerator ---------------------------

    def begin_level(self, cost: int):
        if cost < self._frontier:
            raise ValueError("cost levels must not decrease")
        self._frontier = cost
        n = self.core.n_entries
        self._buckets.setdefault(cost, [n, n])
        c = self.core
        self._last_counts = (c.offered, c.admitted, c.duplicates)

    def end_level(self, cost: int):
        self._buckets[cost][1] = self.core.n_entries
        c = self.core
        o0, a0, d0 = self._last_counts
        self._level_marks.append(
            {
                "cost": cost,
                "offered": c.offered - o0,
                "admitted": c.admitted - a0,
                "duplicates": c.duplicates - d0,
                "bytes": c.bytes_used,
            }
        )
        self._frontier = cost + 1

    # -- views ---------------------------------------------------------------

    def bucket_range(self, cost: int):
        got = self._buckets.get(cost)
        return (got[0], got[1]) if got else (0, 0)

    def entries_of_cost(self, cost: int) -> range:
        start, end = self.bucket_range(cost)
        return range(start, end)

    def bucket_checksum(self, cost: int) -> int:
        start, end = self.bucket_range(cost)
        if start == end:
            return 0
        return int(np.bitwise_xor.reduce(self.core.export_cms()[start:end], axis=None))

    @property
    def n_entries(self) -> int:
        return self.core.n_entries

    @property
    def bytes_used(self) -> int:
        return self.core.bytes_used

    def stats_rows(self) -> list[dict]:
        return list(self._level_marks)

    # -- reconstruction --------------------------------------------------------

    def reconstruct(self, idx: int) -> Formula:
        op, lhs, rhs = self.core.get_record(idx)
        if op == OP_ATOM:
            return Atom(lhs)
        if lhs < 0 or lhs >= self.core.n_entries or (
            op not in UNARY_OPS and (rhs < 0 or rhs >= self.core.n_entries)
        ):
            raise IndexError(f"dangling child reference in entry {idx}")
        if op in UNARY_OPS:
            return make_unary(op, self.reconstruct(lhs))
        return make_binary(op, self.reconstruct(lhs), self.reconstruct(rhs))

    def build_candidate(self, op: int, lhs: int, rhs: int) -> Formula:
        """Formula for a screened candidate that was never admitted."""
        if op in UNARY_OPS:
            return make_unary(op, self.reconstruct(lhs))
        return make_binary(op, self.reconstruct(lhs), self.reconstruct(rhs))
