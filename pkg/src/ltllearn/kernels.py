"""Candidate-screening kernels: compiled core with a pure-Python fallback.

The enumerator's inner loop (build a candidate matrix, check it against the
specification, fingerprint it, test-and-insert into the uniqueness set) is
implemented twice: a Cython extension (``ltllearn._speedups``) and a
numpy-based fallback (``ltllearn._kernels_py``).  Both produce bit-identical
fingerprints, admissions, and iteration order; the backend is chosen at
import time, overridable with LTLLEARN_BACKEND=python|compiled.

Fingerprint layout (128 bits, top 2 bits always zero, 126 usable):

* gather: the designated characteristic-matrix bits themselves, placed from
  bit 125 downward -- exact, used whenever the matrix carries at most 126
  distinct bits of information;
* mueller: a 64-bit avalanche finalizer applied per word with a
  position-dependent tweak, folded into two lanes by multiply-xor;
* fkp: the first ``fkp_bits`` positions of every row, concatenated and
  truncated to 126 bits -- a deliberately weak scheme for experiments.

All variants then zero the lowest ``mask_k`` bits.
"""

from __future__ import annotations

import os

# --- fingerprint constants (shared verbatim by both backends) --------------
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB
STEP = 0x9E3779B97F4A7C15
FOLD0 = 0xC2B2AE3D27D4EB4F
FOLD1 = 0x9E3779B185EBCA87
SEED0 = 0x243F6A8885A308D3
SEED1 = 0x13198A2E03707344
HI_CLEAR = (1 << 62) - 1  # keeps the top 2 of 128 bits zero

FP_BITS = 126

V_GATHER = 0
V_MUELLER = 1
V_FKP = 2

S_DONE = 0
S_SOLVED = 1
S_OOM = 2

_M64 = (1 << 64) - 1


def mix64(x: int) -> int:
    x &= _M64
    x ^= x >> 30
    x = (x * MIX1) & _M64
    x ^= x >> 27
    x = (x * MIX2) & _M64
    x ^= x >> 31
    return x


def mueller_fingerprint(words) -> int:
    """Reference two-lane fold of a word sequence, as a 128-bit int."""
    h0, h1 = SEED0, SEED1
    for i, w in enumerate(words):
        m = mix64((int(w) ^ ((i + 1) * STEP)) & _M64)
        h0 = ((h0 ^ m) * FOLD0) & _M64
        h1 = ((h1 ^ ((m << 32 | m >> 32) & _M64)) * FOLD1) & _M64
    hi = mix64(h0) & HI_CLEAR
    lo = mix64(h1)
    return hi << 64 | lo


def gather_fingerprint(words, proj_rows, proj_offs) -> int:
    """Selected bits verbatim, streamed from bit 125 downward."""
    fp = 0
    for b, (r, off) in enumerate(zip(proj_rows, proj_offs)):
        bit = int(words[r]) >> (63 - off) & 1
        fp |= bit << (125 - b)
    return fp


def fkp_fingerprint(words, fkp_bits: int) -> int:
    fp = 0
    used = 0
    for w in words:
        nb = min(fkp_bits, FP_BITS - used)
        if nb <= 0:
            break
        v = (int(w) >> (64 - fkp_bits)) >> (fkp_bits - nb)
        fp |= v << (126 - used - nb)
        used += nb
    return fp


def apply_mask(fp: int, mask_k: int) -> int:
    if mask_k <= 0:
        return fp
    return fp & ~((1 << mask_k) - 1)


def fingerprint_int(
    words, variant: int, proj_rows=(), proj_offs=(), fkp_bits: int = 0, mask_k: int = 0
) -> int:
    if variant == V_GATHER:
        fp = gather_fingerprint(words, proj_rows, proj_offs)
    elif variant == V_MUELLER:
        fp = mueller_fingerprint(words)
    elif variant == V_FKP:
        fp = fkp_fingerprint(words, fkp_bits)
    else:
        raise ValueError(f"unknown fingerprint variant {variant}")
    return apply_mask(fp, mask_k)


def fkp_bits_per_row(n_rows: int) -> int:
    """Per-row prefix width bringing n_rows * width as close to 126 as possible."""
    lo = max(1, FP_BITS // n_rows)
    hi = lo + 1
    if abs(hi * n_rows - FP_BITS) < abs(lo * n_rows - FP_BITS):
        lo = hi
    return min(lo, 64)


# --- backend selection ------------------------------------------------------

from . import _kernels_py  # noqa: E402

_forced = os.environ.get("LTLLEARN_BACKEND", "").strip().lower()
_compiled = None
if _forced != "python":
    try:
        from . import _speedups as _compiled  # type: ignore
    except ImportError:
        _compiled = None
        if _forced == "compiled":
            raise

BACKEND = "compiled" if _compiled is not None else "python"


def make_core(
    masks,
    n_pos: int,
    err_max: int,
    variant: int,
    proj_rows=(),
    proj_offs=(),
    fkp_bits: int = 0,
    mask_k: int = 0,
    budget_bytes: int = 2 << 30,
    backend: str | None = None,
):
    """Instantiate a screening core (see _kernels_py.PyCore for the contract)."""
    which = backend or BACKEND
    if which == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled backend requested but not built")
        cls = _compiled.Core
    elif which == "python":
        cls = _kernels_py.PyCore
    else:
        raise ValueError(f"unknown backend {which!r}")
    return cls(
        masks,
        n_pos,
        err_max,
        variant,
        list(proj_rows),
        list(proj_offs),
        fkp_bits,
        mask_k,
        budget_bytes,
    )
