# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
# distutils: language = c++
"""Compiled screening core: candidate construction, separation check,
fingerprint, and uniqueness-set admission fused into one C loop.

Must stay behaviorally identical to ltllearn._kernels_py.PyCore: same
candidate order, same fingerprints, same admissions.
"""

from libcpp.vector cimport vector
from libc.stdint cimport uint64_t, uint8_t, int32_t, int8_t

import numpy as np

from ._kernels_py import CoreOOM

# opcodes (mirror ltllearn.formula; cross-checked by tests)
cdef enum:
    OPC_NOT = 1
    OPC_AND = 2
    OPC_OR = 3
    OPC_NEXT = 4
    OPC_FINALLY = 5
    OPC_GLOBALLY = 6
    OPC_UNTIL = 7

cdef enum:
    ST_DONE = 0
    ST_SOLVED = 1
    ST_OOM = 2

cdef enum:
    VAR_GATHER = 0
    VAR_MUELLER = 1
    VAR_FKP = 2

cdef enum:
    RMAX = 64
    FPBITS = 126

# fingerprint constants (mirror ltllearn.kernels; cross-checked by tests)
cdef uint64_t MIX1 = 0xBF58476D1CE4E5B9u
cdef uint64_t MIX2 = 0x94D049BB133111EBu
cdef uint64_t STEP = 0x9E3779B97F4A7C15u
cdef uint64_t FOLD0 = 0xC2B2AE3D27D4EB4Fu
cdef uint64_t FOLD1 = 0x9E3779B185EBCA87u
cdef uint64_t SEED0 = 0x243F6A8885A308D3u
cdef uint64_t SEED1 = 0x13198A2E03707344u
cdef uint64_t HI_CLEAR = 0x3FFFFFFFFFFFFFFFu


cdef inline uint64_t mix64(uint64_t x) nogil:
    x ^= x >> 30
    x *= MIX1
    x ^= x >> 27
    x *= MIX2
    x ^= x >> 31
    return x


cdef class Core:
    cdef:
        int R, n_pos, err_max, variant, fkp_bits, mask_k, n_proj
        uint64_t masks[RMAX]
        int proj_row[FPBITS]
        int proj_off[FPBITS]
        uint64_t budget, entry_bytes
        public uint64_t bytes_used, offered, admitted, duplicates
        vector[uint64_t] cms
        vector[int8_t] rec_op
        vector[int32_t] rec_lhs
        vector[int32_t] rec_rhs
        # open-addressing uniqueness set over (hi, lo) fingerprints
        vector[uint64_t] thi
        vector[uint64_t] tlo
        vector[uint8_t] tused
        size_t tcap, tcount

    def __init__(self, masks, n_pos, err_max, variant, proj_rows, proj_offs,
                 fkp_bits, mask_k, budget_bytes):
        cdef int i
        m = np.ascontiguousarray(masks, dtype=np.uint64)
        if len(m) > RMAX:
            raise ValueError(f"at most {RMAX} rows supported")
        self.R = len(m)
        for i in range(self.R):
            self.masks[i] = <uint64_t> int(m[i])
        self.n_pos = n_pos
        self.err_max = err_max
        self.variant = variant
        self.n_proj = len(proj_rows)
        if self.n_proj > FPBITS:
            raise ValueError("projection wider than the fingerprint")
        for i in range(self.n_proj):
            self.proj_row[i] = proj_rows[i]
            self.proj_off[i] = proj_offs[i]
        self.fkp_bits = fkp_bits
        self.mask_k = mask_k
        self.budget = budget_bytes
        self.entry_bytes = self.R * 8 + 16
        self.bytes_used = 0
        self.offered = 0
        self.admitted = 0
        self.duplicates = 0
        self.tcap = 1024
        self.thi.resize(self.tcap)
        self.tlo.resize(self.tcap)
        self.tused.assign(self.tcap, 0)
        self.tcount = 0

    # -- storage --------------------------------------------------------------

    @property
    def n_entries(self):
        return self.cms.size() // self.R

    def get_cm(self, Py_ssize_t idx):
        out = np.empty(self.R, dtype=np.uint64)
        cdef uint64_t[::1] mv = out
        cdef int r
        for r in range(self.R):
            mv[r] = self.cms[idx * self.R + r]
        return out

    def get_record(self, Py_ssize_t idx):
        return self.rec_op[idx], self.rec_lhs[idx], self.rec_rhs[idx]

    def export_cms(self):
        cdef Py_ssize_t n = self.cms.size() // self.R
        out = np.empty((n, self.R), dtype=np.uint64)
        cdef uint64_t[:, ::1] mv = out
        cdef Py_ssize_t i
        cdef int r
        for i in range(n):
            for r in range(self.R):
                mv[i, r] = self.cms[i * self.R + r]
        return out

    # -- uniqueness set ---------------------------------------------------------

    cdef bint _probe_insert(self, uint64_t hi, uint64_t lo) nogil:
        """True if the fingerprint was new (and is now recorded)."""
        cdef size_t idx = <size_t> (mix64(lo ^ (hi * STEP)) & (self.tcap - 1))
        while self.tused[idx]:
            if self.thi[idx] == hi and self.tlo[idx] == lo:
                return False
            idx = (idx + 1) & (self.tcap - 1)
        self.thi[idx] = hi
        self.tlo[idx] = lo
        self.tused[idx] = 1
        self.tcount += 1
        if self.tcount * 10 >= self.tcap * 7:
            self._rehash()
        return True

    cdef void _rehash(self) nogil:
        cdef vector[uint64_t] ohi = self.thi
        cdef vector[uint64_t] olo = self.tlo
        cdef vector[uint8_t] oused = self.tused
        cdef size_t ocap = self.tcap
        cdef size_t i, idx
        self.tcap *= 2
        self.thi.assign(self.tcap, 0)
        self.tlo.assign(self.tcap, 0)
        self.tused.assign(self.tcap, 0)
        for i in range(ocap):
            if oused[i]:
                idx = <size_t> (mix64(olo[i] ^ (ohi[i] * STEP)) & (self.tcap - 1))
                while self.tused[idx]:
                    idx = (idx + 1) & (self.tcap - 1)
                self.thi[idx] = ohi[i]
                self.tlo[idx] = olo[i]
                self.tused[idx] = 1

    cdef bint _lookup(self, uint64_t hi, uint64_t lo) nogil:
        cdef size_t idx = <size_t> (mix64(lo ^ (hi * STEP)) & (self.tcap - 1))
        while self.tused[idx]:
            if self.thi[idx] == hi and self.tlo[idx] == lo:
                return True
            idx = (idx + 1) & (self.tcap - 1)
        return False

    # -- fingerprints -------------------------------------------------------------

    cdef void _fp(self, uint64_t *cm, uint64_t *hi_out, uint64_t *lo_out) nogil:
        cdef uint64_t hi = 0, lo = 0, h0, h1, m, v
        cdef int r, b, pos, nb, used, s
        if self.variant == VAR_GATHER:
            for b in range(self.n_proj):
                v = (cm[self.proj_row[b]] >> (63 - self.proj_off[b])) & 1u
                pos = 125 - b
                if pos >= 64:
                    hi |= v << (pos - 64)
                else:
                    lo |= v << pos
        elif self.variant == VAR_MUELLER:
            h0 = SEED0
            h1 = SEED1
            for r in range(self.R):
                m = mix64(cm[r] ^ ((<uint64_t> (r + 1)) * STEP))
                h0 = (h0 ^ m) * FOLD0
                h1 = (h1 ^ ((m << 32) | (m >> 32))) * FOLD1
            hi = mix64(h0) & HI_CLEAR
            lo = mix64(h1)
        else:  # VAR_FKP
            used = 0
            for r in range(self.R):
                nb = FPBITS - used
                if nb > self.fkp_bits:
                    nb = self.fkp_bits
                if nb <= 0:
                    break
                v = cm[r] >> (64 - self.fkp_bits)
                if nb < self.fkp_bits:
                    v >>= (self.fkp_bits - nb)
                s = 126 - used - nb
                if s >= 64:
                    hi |= v << (s - 64)
                else:
                    lo |= v << s
                    if s > 0:
                        hi |= v >> (64 - s)
                used += nb
        if self.mask_k >= 64:
            lo = 0
            if self.mask_k > 64:
                hi &= ~(((<uint64_t> 1) << (self.mask_k - 64)) - 1)
        elif self.mask_k > 0:
            lo &= ~(((<uint64_t> 1) << self.mask_k) - 1)
        hi_out[0] = hi
        lo_out[0] = lo

    def fingerprint_of(self, cm):
        cdef uint64_t buf[RMAX]
        cdef uint64_t hi = 0, lo = 0
        arr = np.ascontiguousarray(cm, dtype=np.uint64)
        cdef int r
        for r in range(self.R):
            buf[r] = <uint64_t> int(arr[r])
        self._fp(buf, &hi, &lo)
        return (int(hi) << 64) | int(lo)

    # -- admission -------------------------------------------------------------

    cdef int _admit(self, uint64_t *cm, int op, int lhs, int rhs) nogil:
        """-2 duplicate, -3 out of budget, else the new entry index."""
        cdef uint64_t hi = 0, lo = 0
        cdef int r
        self._fp(cm, &hi, &lo)
        if self._lookup(hi, lo):
            return -2
        if self.bytes_used + self.entry_bytes > self.budget:
            return -3
        self._probe_insert(hi, lo)
        for r in range(self.R):
            self.cms.push_back(cm[r])
        self.rec_op.push_back(<int8_t> op)
        self.rec_lhs.push_back(lhs)
        self.rec_rhs.push_back(rhs)
        self.bytes_used += self.entry_bytes
        self.admitted += 1
        return <int> (self.cms.size() // self.R) - 1

    def add_entry(self, cm, op, lhs, rhs):
        cdef uint64_t buf[RMAX]
        arr = np.ascontiguousarray(cm, dtype=np.uint64)
        cdef int r, res
        for r in range(self.R):
            buf[r] = <uint64_t> int(arr[r])
        self.offered += 1
        res = self._admit(buf, op, lhs, rhs)
        if res == -2:
            self.duplicates += 1
            return -1
        if res == -3:
            raise CoreOOM
        return res

    def contains(self, cm):
        cdef uint64_t buf[RMAX]
        cdef uint64_t hi = 0, lo = 0
        arr = np.ascontiguousarray(cm, dtype=np.uint64)
        cdef int r
        for r in range(self.R):
            buf[r] = <uint64_t> int(arr[r])
        self._fp(buf, &hi, &lo)
        return bool(self._lookup(hi, lo))

    # -- candidate construction ---------------------------------------------------

    cdef void _unary(self, int opcode, uint64_t *x, uint64_t *out) nogil:
        cdef int r, i
        cdef uint64_t c
        for r in range(self.R):
            if opcode == OPC_NOT:
                out[r] = (~x[r]) & self.masks[r]
            elif opcode == OPC_NEXT:
                out[r] = x[r] << 1
            elif opcode == OPC_FINALLY:
                c = x[r]
                for i in range(6):
                    c |= c << (1 << i)
                out[r] = c
            else:  # OPC_GLOBALLY
                c = (~x[r]) & self.masks[r]
                for i in range(6):
                    c |= c << (1 << i)
                out[r] = (~c) & self.masks[r]

    cdef void _binary(self, int opcode, uint64_t *x, uint64_t *y, uint64_t *out) nogil:
        cdef int r, i
        cdef uint64_t run, acc
        for r in range(self.R):
            if opcode == OPC_AND:
                out[r] = x[r] & y[r]
            elif opcode == OPC_OR:
                out[r] = x[r] | y[r]
            else:  # OPC_UNTIL
                acc = y[r]
                run = x[r]
                for i in range(6):
                    acc |= run & (acc << (1 << i))
                    if i < 5:
                        run &= run << (1 << i)
                out[r] = acc

    cdef int _errors(self, uint64_t *cm) nogil:
        cdef int r, e = 0
        for r in range(self.n_pos):
            e += <int> (1 - (cm[r] >> 63))
        for r in range(self.n_pos, self.R):
            e += <int> (cm[r] >> 63)
        return e

    # -- screening -----------------------------------------------------------------

    def screen_unary(self, int opcode, Py_ssize_t c0, Py_ssize_t c1):
        cdef uint64_t x[RMAX]
        cdef uint64_t tmp[RMAX]
        cdef Py_ssize_t i
        cdef int r, res
        for i in range(c0, c1):
            # copy the child row: admissions may reallocate the backing vector
            for r in range(self.R):
                x[r] = self.cms[i * self.R + r]
            self._unary(opcode, x, tmp)
            self.offered += 1
            if self._errors(tmp) <= self.err_max:
                return ST_SOLVED, i, -1
            res = self._admit(tmp, opcode, <int> i, -1)
            if res == -2:
                self.duplicates += 1
            elif res == -3:
                return ST_OOM, -1, -1
        return ST_DONE, -1, -1

    def screen_binary(self, int opcode, Py_ssize_t a0, Py_ssize_t a1,
                      Py_ssize_t b0, Py_ssize_t b1, bint tri):
        cdef uint64_t x[RMAX]
        cdef uint64_t y[RMAX]
        cdef uint64_t tmp[RMAX]
        cdef Py_ssize_t i, j, jstart
        cdef int r, res
        for i in range(a0, a1):
            for r in range(self.R):
                x[r] = self.cms[i * self.R + r]
            jstart = i + 1 if tri and i + 1 > b0 else b0
            for j in range(jstart, b1):
                for r in range(self.R):
                    y[r] = self.cms[j * self.R + r]
                self._binary(opcode, x, y, tmp)
                self.offered += 1
                if self._errors(tmp) <= self.err_max:
                    return ST_SOLVED, i, j
                res = self._admit(tmp, opcode, <int> i, <int> j)
                if res == -2:
                    self.duplicates += 1
                elif res == -3:
                    return ST_OOM, -1, -1
        return ST_DONE, -1, -1
