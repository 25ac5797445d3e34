"""Numpy fallback screening core; contract shared with the compiled core.

Candidate generation is vectorized in batches, while the uniqueness set is a
plain Python set of 128-bit ints.  Candidate order is the documented one
(left child index ascending, then right), identical to the compiled core.
"""

from __future__ import annotations

import numpy as np

from . import kernels as K
from .formula import (
    OP_AND,
    OP_FINALLY,
    OP_GLOBALLY,
    OP_NEXT,
    OP_NOT,
    OP_OR,
    OP_UNTIL,
)
from . import bitsem

_U64 = np.uint64
_CHUNK = 1 << 16  # candidates per vectorized batch


class CoreOOM(Exception):
    pass


class PyCore:
    def __init__(
        self,
        masks,
        n_pos,
        err_max,
        variant,
        proj_rows,
        proj_offs,
        fkp_bits,
        mask_k,
        budget_bytes,
    ):
        self.masks = np.ascontiguousarray(masks, dtype=_U64)
        self.n_rows = len(self.masks)
        self.n_pos = int(n_pos)
        self.err_max = int(err_max)
        self.variant = int(variant)
        self.proj_rows = np.asarray(proj_rows, dtype=np.int64)
        self.proj_offs = np.asarray(proj_offs, dtype=np.int64)
        self.fkp_bits = int(fkp_bits)
        self.mask_k = int(mask_k)
        self.budget = int(budget_bytes)
        self.entry_bytes = self.n_rows * 8 + 16  # matrix words + fingerprint

        cap = 256
        self._cms = np.zeros((cap, self.n_rows), dtype=_U64)
        self._ops = []
        self._lhs = []
        self._rhs = []
        self._n = 0
        self._seen = set()
        self.bytes_used = 0
        self.offered = 0
        self.admitted = 0
        self.duplicates = 0

    # -- storage ------------------------------------------------------------

    @property
    def n_entries(self):
        return self._n

    def _grow(self):
        if self._n == len(self._cms):
            self._cms = np.resize(self._cms, (len(self._cms) * 2, self.n_rows))

    def get_cm(self, idx):
        return self._cms[idx].copy()

    def get_record(self, idx):
        return self._ops[idx], self._lhs[idx], self._rhs[idx]

    def export_cms(self):
        return self._cms[: self._n].copy()

    # -- fingerprints ---------------------------------------------------------

    def fingerprint_of(self, cm):
        hi, lo = self._fingerprint_batch(np.asarray(cm, dtype=_U64).reshape(1, -1))
        return int(hi[0]) << 64 | int(lo[0])

    def _fingerprint_batch(self, batch):
        with np.errstate(over="ignore"):
            if self.variant == K.V_GATHER:
                hi, lo = self._fp_gather(batch)
            elif self.variant == K.V_MUELLER:
                hi, lo = self._fp_mueller(batch)
            else:
                hi, lo = self._fp_fkp(batch)
            if self.mask_k >= 64:
                lo = np.zeros_like(lo)
                if self.mask_k > 64:
                    hi = hi & _U64(~((1 << (self.mask_k - 64)) - 1) & K._M64)
            elif self.mask_k > 0:
                lo = lo & _U64(~((1 << self.mask_k) - 1) & K._M64)
        return hi, lo

    def _fp_gather(self, batch):
        n = len(batch)
        hi = np.zeros(n, dtype=_U64)
        lo = np.zeros(n, dtype=_U64)
        for b in range(len(self.proj_rows)):
            r = self.proj_rows[b]
            off = int(self.proj_offs[b])
            bit = (batch[:, r] >> _U64(63 - off)) & _U64(1)
            pos = 125 - b
            if pos >= 64:
                hi |= bit << _U64(pos - 64)
            else:
                lo |= bit << _U64(pos)
        return hi, lo

    def _fp_mueller(self, batch):
        n = len(batch)
        h0 = np.full(n, K.SEED0, dtype=_U64)
        h1 = np.full(n, K.SEED1, dtype=_U64)
        for r in range(self.n_rows):
            m = batch[:, r] ^ _U64(((r + 1) * K.STEP) & K._M64)
            m = _mix64_vec(m)
            h0 = (h0 ^ m) * _U64(K.FOLD0)
            h1 = (h1 ^ ((m << _U64(32)) | (m >> _U64(32)))) * _U64(K.FOLD1)
        hi = _mix64_vec(h0) & _U64(K.HI_CLEAR)
        lo = _mix64_vec(h1)
        return hi, lo

    def _fp_fkp(self, batch):
        n = len(batch)
        hi = np.zeros(n, dtype=_U64)
        lo = np.zeros(n, dtype=_U64)
        used = 0
        for r in range(self.n_rows):
            nb = min(self.fkp_bits, K.FP_BITS - used)
            if nb <= 0:
                break
            v = batch[:, r] >> _U64(64 - self.fkp_bits)
            if nb < self.fkp_bits:
                v = v >> _U64(self.fkp_bits - nb)
            s = 126 - used - nb
            if s >= 64:
                hi |= v << _U64(s - 64)
            else:
                lo |= v << _U64(s)
                if s > 0:
                    hi |= v >> _U64(64 - s)
            used += nb
        return hi, lo

    # -- admission ------------------------------------------------------------

    def add_entry(self, cm, op, lhs, rhs):
        """Admit one matrix through the uniqueness check (no solve check).

        Returns the new entry index, or -1 for a duplicate fingerprint.
        Raises CoreOOM when the memory budget is exhausted.
        """
        self.offered += 1
        fp = self.fingerprint_of(cm)
        if fp in self._seen:
            self.duplicates += 1
            return -1
        if self.bytes_used + self.entry_bytes > self.budget:
            raise CoreOOM
        self._seen.add(fp)
        self._grow()
        self._cms[self._n] = cm
        self._ops.append(op)
        self._lhs.append(lhs)
        self._rhs.append(rhs)
        self._n += 1
        self.bytes_used += self.entry_bytes
        self.admitted += 1
        return self._n - 1

    def contains(self, cm):
        return self.fingerprint_of(cm) in self._seen

    # -- screening ------------------------------------------------------------

    def screen_unary(self, opcode, c0, c1):
        for start in range(c0, c1, _CHUNK):
            stop = min(start + _CHUNK, c1)
            batch = self._apply_unary(opcode, self._cms[start:stop])
            status, l, r = self._consume(batch, opcode, start, None, None, False)
            if status != K.S_DONE:
                return status, l, r
        return K.S_DONE, -1, -1

    def screen_binary(self, opcode, a0, a1, b0, b1, tri):
        ny = b1 - b0
        if ny <= 0 or a1 <= a0:
            return K.S_DONE, -1, -1
        outer = max(1, _CHUNK // ny)
        for start in range(a0, a1, outer):
            stop = min(start + outer, a1)
            X = self._cms[start:stop]
            Y = self._cms[b0:b1]
            batch = self._apply_binary(opcode, X[:, None, :], Y[None, :, :])
            batch = batch.reshape(-1, self.n_rows)
            status, l, r = self._consume(batch, opcode, start, b0, ny, tri)
            if status != K.S_DONE:
                return status, l, r
        return K.S_DONE, -1, -1

    def _apply_unary(self, opcode, x):
        if opcode == OP_NOT:
            return bitsem.bf_not(x, self.masks)
        if opcode == OP_NEXT:
            return bitsem.bf_next(x)
        if opcode == OP_FINALLY:
            return bitsem.bf_finally(x)
        if opcode == OP_GLOBALLY:
            return bitsem.bf_globally(x, self.masks)
        raise ValueError(opcode)

    def _apply_binary(self, opcode, x, y):
        if opcode == OP_AND:
            return x & y
        if opcode == OP_OR:
            return x | y
        if opcode == OP_UNTIL:
            out = np.broadcast_to(y, np.broadcast_shapes(x.shape, y.shape)).copy()
            run = np.broadcast_to(x, out.shape).copy()
            for i, s in enumerate(bitsem._SHIFTS):
                out |= run & (out << s)
                if i + 1 < bitsem.ROUNDS:
                    run &= run << s
            return out
        raise ValueError(opcode)

    def _consume(self, batch, opcode, i_base, j_base, ny, tri):
        """Walk a batch in candidate order: solve check, then admission."""
        bit0 = (batch >> _U64(63)) & _U64(1)
        errs = (bit0[:, : self.n_pos] == 0).sum(axis=1) + (
            bit0[:, self.n_pos :] != 0
        ).sum(axis=1)
        solvable = errs <= self.err_max
        if tri:
            ks = np.arange(len(batch))
            solvable &= (j_base + ks % ny) > (i_base + ks // ny)
        limit = len(batch)
        if solvable.any():
            limit = int(np.argmax(solvable)) + 1
        hi, lo = self._fingerprint_batch(batch[:limit])
        for k in range(limit):
            if ny is None:
                li, ri = i_base + k, -1
            else:
                li, ri = i_base + k // ny, j_base + k % ny
                if tri and ri <= li:
                    continue
            self.offered += 1
            if solvable[k]:
                return K.S_SOLVED, li, ri
            fp = int(hi[k]) << 64 | int(lo[k])
            if fp in self._seen:
                self.duplicates += 1
                continue
            if self.bytes_used + self.entry_bytes > self.budget:
                return K.S_OOM, -1, -1
            self._seen.add(fp)
            self._grow()
            self._cms[self._n] = batch[k]
            self._ops.append(opcode)
            self._lhs.append(li)
            self._rhs.append(ri)
            self._n += 1
            self.bytes_used += self.entry_bytes
            self.admitted += 1
        return K.S_DONE, -1, -1


def _mix64_vec(x):
    x = x ^ (x >> _U64(30))
    x = x * _U64(K.MIX1)
    x = x ^ (x >> _U64(27))
    x = x * _U64(K.MIX2)
    x = x ^ (x >> _U64(31))
    return x
