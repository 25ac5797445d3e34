"""Parameterised benchmark generators and the two cache-policy experiments.

Four families: uniform random specifications, formula-guided sampling,
extension-by-sampling (whose conservative variant has a known minimal cost,
the ground-truth device for measuring cache-induced extra cost), and
Hamming-ball specifications around a single positive trace.

Guided sampling draws candidate traces and accepts them only after the
word-level evaluator classifies them, so outputs are separated by the guide
formula by construction; a score-guided local search keeps the acceptance
rate workable for formulas whose satisfying (or falsifying) traces are rare
at the requested length.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from .bitsem import WORD, eval_trace_cs
from .cache import HashScheme
from .enumerator import (
    CeilingReached,
    LearnerConfig,
    OutOfMemory,
    Solved,
    TimeoutExceeded,
    enum_learn,
)
from .formula import Formula, cost as formula_cost
from .traces import Alphabet, Specification, hamming_ball


class GenerationError(RuntimeError):
    pass


def _spawn(seed, n):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def _uniform_trace(rng, n_chars: int, length: int) -> tuple:
    return tuple(int(c) for c in rng.integers(0, n_chars, size=length))


def gen_simple(alphabet: Alphabet, k: int, lo: int, hi: int, seed: int) -> Specification:
    """2k distinct traces drawn uniformly from all traces with length in
    [lo, hi], split k/k into positives and negatives."""
    if not 0 <= lo <= hi:
        raise GenerationError("need 0 <= lo <= hi")
    n_chars = alphabet.n_chars
    total = sum(n_chars**l for l in range(lo, hi + 1))
    if total < 2 * k:
        raise GenerationError(f"only {total} distinct traces exist in [{lo}, {hi}]")
    rng = np.random.default_rng(seed)
    lengths = np.arange(lo, hi + 1)
    weights = np.array([float(n_chars**l) for l in lengths])
    weights /= weights.sum()
    seen = set()
    out = []
    guard = 0
    while len(out) < 2 * k:
        guard += 1
        if guard > 1000 * (2 * k + 10):
            raise GenerationError("rejection budget exhausted while deduplicating")
        length = int(rng.choice(lengths, p=weights))
        tr = _uniform_trace(rng, n_chars, length)
        if tr in seen:
            continue
        seen.add(tr)
        out.append(tr)
    return Specification(tuple(out[:k]), tuple(out[k:]))


def _sample_classified(f, want: bool, alphabet, lo, hi, rng, budget):
    """One trace with the requested verdict, by uniform draws repaired with a
    score-guided random walk (more satisfied positions is better for a
    positive target, fewer for a negative one)."""

    def verdict_and_score(tr):
        cs = eval_trace_cs(f, tr)
        top = cs >> (WORD - 1) & 1
        pop = bin(cs).count("1")
        if want:
            return bool(top), pop
        return not top, len(tr) - pop

    n_chars = alphabet.n_chars
    spent = 0
    while spent < budget:
        length = int(rng.integers(lo, hi + 1))
        tr = list(_uniform_trace(rng, n_chars, length))
        ok, score = verdict_and_score(tr)
        spent += 1
        if ok:
            return tuple(tr)
        for _ in range(8 * max(1, length)):
            spent += 1
            if spent >= budget:
                break
            pos = int(rng.integers(0, length))
            old = tr[pos]
            tr[pos] = int((old + 1 + rng.integers(0, n_chars - 1)) % n_chars)
            ok, new_score = verdict_and_score(tr)
            if ok:
                return tuple(tr)
            if new_score >= score:
                score = new_score
            else:
                tr[pos] = old
    return None


def gen_guided(
    alphabet: Alphabet,
    f: Formula,
    k: int,
    lo: int,
    hi: int,
    seed: int,
    budget_per_trace: int = 20_000,
) -> Specification:
    """k satisfying and k falsifying traces of the formula, lengths in [lo, hi]."""
    rng = np.random.default_rng(seed)
    sides = {True: [], False: []}
    seen = {True: set(), False: set()}
    for want in (True, False):
        while len(sides[want]) < k:
            tr = _sample_classified(f, want, alphabet, lo, hi, rng, budget_per_trace)
            if tr is None:
                kind = "satisfying" if want else "falsifying"
                raise GenerationError(
                    f"budget exhausted looking for a {kind} trace of length in "
                    f"[{lo}, {hi}]; the formula may admit none"
                )
            if tr in seen[want]:
                continue
            seen[want].add(tr)
            sides[want].append(tr)
    return Specification(tuple(sides[True]), tuple(sides[False]))


@dataclass(frozen=True)
class SampleBenchResult:
    spec: Specification
    seed_spec: Specification
    seed_formula: Formula
    seed_cost: int
    conservative: bool


def gen_samplebench(
    i: int, k: int, conservative: bool, seed: int, alphabet: Alphabet | None = None
) -> SampleBenchResult:
    """Extension by sampling: learn a minimal until-free NNF formula for a
    small random specification, then extend it with k guided traces per side
    at length 63.  The conservative variant keeps the original traces, so its
    minimal cost stays that of the small specification."""
    if i > 8:
        raise GenerationError("seed specifications above i=8 leave exact-admission territory")
    alphabet = alphabet or Alphabet.default(2)
    rngs = _spawn(seed, 10)
    for attempt in range(5):
        rng_simple, rng_guided = rngs[2 * attempt], rngs[2 * attempt + 1]
        spec0 = gen_simple(alphabet, i, 2, 5, int(rng_simple.integers(0, 2**63)))
        cfg = LearnerConfig(require_nnf=True, forbid_until=True)
        out = enum_learn(spec0, alphabet, cfg)
        if not isinstance(out, Solved):
            continue  # no cheap fragment formula for this draw; redraw
        phi, phi_cost = out.formula, out.cost
        sampled = gen_guided(
            alphabet, phi, k, 63, 63, int(rng_guided.integers(0, 2**63))
        )
        if conservative:
            drop_p = set(spec0.pos) | set(spec0.neg)
            pos = spec0.pos + tuple(t for t in sampled.pos if t not in drop_p)
            neg = spec0.neg + tuple(t for t in sampled.neg if t not in drop_p)
            spec = Specification(pos, neg)
        else:
            spec = sampled
        return SampleBenchResult(spec, spec0, phi, phi_cost, conservative)
    raise GenerationError("no learnable seed specification after several draws")


def gen_hamming(alphabet: Alphabet, l: int, delta: int, seed: int) -> Specification:
    """One uniform positive trace of length l against every trace at Hamming
    distance exactly delta from it."""
    rng = np.random.default_rng(seed)
    tr = _uniform_trace(rng, alphabet.n_chars, l)
    ball = sorted(hamming_ball(tr, delta, alphabet))
    return Specification((tr,), tuple(ball))


# ---------------------------------------------------------------------------
# Experiments.


MASKING_KS = tuple(range(1, 127, 5))  # 26-point sweep


def _run_once(spec, alphabet, cfg):
    t0 = time.perf_counter()
    try:
        out = enum_learn(spec, alphabet, cfg)
    except TimeoutExceeded:
        return {"status": "timeout", "cost": None, "wall_ms": _ms(t0)}
    if isinstance(out, OutOfMemory):
        return {"status": "oom", "cost": None, "wall_ms": _ms(t0)}
    status = "solved" if isinstance(out, Solved) else "ceiling"
    return {
        "status": status,
        "cost": out.cost if isinstance(out, Solved) else out.stats.ceiling,
        "formula": out.formula,
        "precise": out.stats.precise,
        "wall_ms": _ms(t0),
    }


def _ms(t0):
    return round((time.perf_counter() - t0) * 1e3, 3)


def run_masking_sweep(
    spec: Specification,
    alphabet: Alphabet,
    cfg: LearnerConfig,
    ks=MASKING_KS,
) -> list[dict]:
    """One learner run per masked-bit count; failures become table rows."""
    rows = []
    for k in ks:
        row_cfg = replace(cfg, hash=replace(cfg.hash, mask_bits=int(k)))
        row = _run_once(spec, alphabet, row_cfg)
        row.pop("formula", None)
        row["k"] = int(k)
        rows.append(row)
    return rows


def run_ruc_experiment(
    n_seeds: int,
    ext_sizes=(0, 8, 16, 24),
    base_seed: int = 0,
    budget_bytes: int = 256 << 20,
    deadline_s: float | None = None,
) -> dict:
    """Compare hash schemes on conservative extensions with known minimal cost.

    Per seed and extension size, the same specification is learned once per
    scheme (until-free NNF, matching the seed formula's fragment); extra cost
    is the learned cost minus the known minimum, averaged over solved runs.
    """
    rows = []
    for s in range(n_seeds):
        for ext in ext_sizes:
            sb = gen_samplebench(8, ext, True, base_seed * 100003 + s * 1009 + ext)
            for hash_variant in ("mueller", "fkp"):
                cfg = LearnerConfig(
                    require_nnf=True,
                    forbid_until=True,
                    hash=HashScheme(hash_variant),
                    budget_bytes=budget_bytes,
                    deadline=None
                    if deadline_s is None
                    else time.monotonic() + deadline_s,
                )
                row = _run_once(sb.spec, Alphabet.default(2), cfg)
                row.pop("formula", None)
                row.update(
                    seed=s,
                    ext=ext,
                    hash=hash_variant,
                    minimal=sb.seed_cost,
                    n_pos=len(sb.spec.pos),
                    n_neg=len(sb.spec.neg),
                )
                if row["status"] == "solved":
                    row["extra"] = row["cost"] - sb.seed_cost
                rows.append(row)
    return {"rows": rows, "summary": summarize_ruc(rows)}


def summarize_ruc(rows) -> list[dict]:
    out = []
    for hash_variant in ("mueller", "fkp"):
        for ext in sorted({r["ext"] for r in rows}):
            batch = [r for r in rows if r["hash"] == hash_variant and r["ext"] == ext]
            solved = [r for r in batch if r["status"] == "solved"]
            out.append(
                {
                    "hash": hash_variant,
                    "ext": ext,
                    "runs": len(batch),
                    "solved": len(solved),
                    "oom_rate": sum(r["status"] == "oom" for r in batch) / len(batch),
                    "mean_extra": (
                        sum(r["extra"] for r in solved) / len(solved) if solved else None
                    ),
                }
            )
    return out
