"""Meet-in-the-middle key search against 2-key triple encryption.

One iteration fixes a guess ``a`` for the inner value e_K1(P) of some known
pair and does two passes over the whole key space:

* Table 2 build: P_i = d_i(a) for every i; each Table 1 hit on P_i gives an
  entry (B = d_i(C), i).  With complementation, hits on ~P_i give entries for
  the complemented guess ~a.
* K2 scan: B_j = d_j(a) for every j; each Table 2 hit yields a candidate
  (i, j) which is checked on reserved pairs of its label.

The passes are vectorised across the key space and across a small batch of
consecutive ``a`` values.  Everything reported is per iteration, so results
do not depend on the batch size or on the number of worker threads.
"""

from __future__ import annotations

import enum
import time
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .cipher import (CipherSpec, TwoKey, complement, decrypt, decrypt_all_keys,
                     tdea2_decrypt, tdea2_encrypt)
from .corpus import CorpusManifest, TableOne
from .errors import ConfigError
from .sequence import APermutation


class Variant(str, enum.Enum):
    BASIC = "basic"
    MULTIKEY = "multikey"
    COMPLEMENT = "complement"
    PARTIAL = "partial"
    COMPLEMENT_PARTIAL = "complement-partial"

    @property
    def uses_complement(self) -> bool:
        return self in (Variant.COMPLEMENT, Variant.COMPLEMENT_PARTIAL)

    @property
    def uses_partial(self) -> bool:
        return self in (Variant.PARTIAL, Variant.COMPLEMENT_PARTIAL)


class Policy(str, enum.Enum):
    FULL = "full-bit"
    MASKED = "masked-bit"


@dataclass
class AttackConfig:
    spec: CipherSpec
    variant: Variant = Variant.BASIC
    max_iterations: int = 1 << 16
    a_seed: object = 0
    thread_count: int = 1
    verification_policy: Policy = Policy.FULL
    check_pairs: int = 2
    chunk_size: int = 16
    w: int = 0  # unknown plaintext bits, only used for the cost prediction

    def __post_init__(self):
        self.variant = Variant(self.variant)
        self.verification_policy = Policy(self.verification_policy)
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be >= 1")
        if self.thread_count < 1:
            raise ConfigError("thread_count must be >= 1")
        if self.check_pairs < 1:
            raise ConfigError("check_pairs must be >= 1")
        if self.chunk_size < 1:
            raise ConfigError("chunk_size must be >= 1")
        if self.variant.uses_complement and not self.spec.has_complementation:
            raise ConfigError("complement variants need a cipher with the complementation property")


class TableTwoEntry(NamedTuple):
    b_val: int
    i: int
    s: int
    f: int
    origin: tuple = ()  # the Table 1 record behind this entry


class TableTwo:
    """Multimap B -> entries, split by flag for the two lookups of the scan."""

    def __init__(self, entries=()):
        self.by_flag = (defaultdict(list), defaultdict(list))
        self.size = 0
        for e in entries:
            self.add(e)

    def add(self, e: TableTwoEntry):
        self.by_flag[e.f][e.b_val].append(e)
        self.size += 1

    def lookup(self, b_val: int, f: int = 0) -> list:
        return self.by_flag[f].get(b_val, [])

    def entries(self):
        for d in self.by_flag:
            for lst in d.values():
                yield from lst

    def __len__(self):
        return self.size


class IterationOutcome(NamedTuple):
    a: int
    table2_size: int
    candidates_tested: int
    success: Optional[tuple]  # (TwoKey, label)
    cipher_ops: int = 0
    table1_hits: int = 0
    midpoint_ops: int = 0
    verify_ops: int = 0
    max_midpoint_cost: int = 0


@dataclass
class AttackReport:
    outcome: Optional[tuple]
    iterations_used: int
    total_cipher_ops: int
    table2_sizes: list
    elapsed: float
    predicted_iterations: float
    predicted_ops: float
    n: int = 0
    table1_entries: int = 0
    candidates_tested: int = 0
    table1_hits: int = 0
    midpoint_ops: int = 0
    verify_ops: int = 0
    max_midpoint_cost: int = 0
    spec: Optional[CipherSpec] = None
    variant: str = "basic"
    a_seed: object = 0
    extra: dict = field(default_factory=dict)

    @property
    def success(self) -> bool:
        return self.outcome is not None

    def to_dict(self, include_time: bool = False) -> dict:
        spec = self.spec
        kw = (spec.key_bits + 3) // 4 if spec else 0
        d = {
            "spec": spec.to_dict() if spec else None,
            "variant": self.variant,
            "a_seed": self.a_seed,
            "success": self.success,
            "recovered_key": None,
            "label": None,
            "iterations_used": self.iterations_used,
            "total_cipher_ops": self.total_cipher_ops,
            "ops_per_iteration": (self.total_cipher_ops / self.iterations_used
                                  if self.iterations_used else 0.0),
            "n": self.n,
            "table1_entries": self.table1_entries,
            "table1_hits": self.table1_hits,
            "candidates_tested": self.candidates_tested,
            "midpoint_ops": self.midpoint_ops,
            "verify_ops": self.verify_ops,
            "max_midpoint_cost": self.max_midpoint_cost,
            "predicted_iterations": self.predicted_iterations,
            "predicted_ops": self.predicted_ops,
            "table2_sizes": list(self.table2_sizes),
        }
        if self.outcome is not None:
            kk, s = self.outcome
            d["recovered_key"] = {"k1": f"{kk.k1:0{kw}x}", "k2": f"{kk.k2:0{kw}x}"}
            d["label"] = s
        d.update(self.extra)
        if include_time:
            d["elapsed_seconds"] = self.elapsed
        return d


# ---------------------------------------------------------------------------
# verification


def check_pairs_for(manifest: CorpusManifest, s: int, exclude, count: int) -> list:
    pairs = [cp for cp in manifest.reserved.get(s, ()) if (cp.p, cp.c) != exclude]
    if len(pairs) < count:
        raise ConfigError(f"label {s} has {len(pairs)} usable check pairs, need {count}")
    return pairs[:count]


def _verify(spec, kk, pairs, policy):
    ops = 0
    for cp in pairs:
        ops += 3
        if policy is Policy.FULL:
            if cp.mask != spec.block_mask:
                raise ConfigError("full-bit verification needs fully known check pairs")
            if tdea2_encrypt(spec, kk, cp.p) != cp.c:
                return False, ops
        elif (tdea2_decrypt(spec, kk, cp.c) ^ cp.p) & cp.mask:
            return False, ops
    return True, ops


def verify_candidate(kk: TwoKey, s: int, manifest: CorpusManifest, policy=Policy.FULL,
                     exclude=None, check_pairs: int = 2) -> bool:
    """Check a candidate key on ``check_pairs`` reserved pairs of label ``s``.

    ``exclude`` is the (p, c) pair that produced the candidate; it is skipped.
    With the masked-bit policy only the known plaintext bits are compared.
    """
    pairs = check_pairs_for(manifest, s, exclude, check_pairs)
    return _verify(manifest.spec, kk, pairs, Policy(policy))[0]


# ---------------------------------------------------------------------------
# generic two-pass core, shared with the MAC attack


class Problem:
    """What an attack target supplies to the core loop.

    ``key_pass`` maps a batch of guesses over the whole key space (decrypt
    for blocks, encrypt for MACs); ``lookup`` reads Table 1; ``midpoint``
    turns a Table 1 hit under a key into the Table 2 value; ``verify``
    checks a candidate two-key.
    """

    def __init__(self, spec: CipherSpec, table1):
        self.spec = spec
        self.table1 = table1

    def key_pass(self, a_vals):
        raise NotImplementedError

    def lookup(self, value):
        raise NotImplementedError

    def midpoint(self, key, entry, value):
        """Return (B, origin, cipher ops)."""
        raise NotImplementedError

    def verify(self, kk, s, origin):
        """Return (ok, cipher ops)."""
        raise NotImplementedError


class BlockProblem(Problem):
    def __init__(self, spec, table1: TableOne, manifest: CorpusManifest,
                 policy=Policy.FULL, check_pairs=2):
        super().__init__(spec, table1)
        self.manifest = manifest
        self.policy = Policy(policy)
        self.check_pairs = check_pairs

    def key_pass(self, a_vals):
        return decrypt_all_keys(self.spec, a_vals)

    def lookup(self, value):
        return self.table1.lookup(value)

    def midpoint(self, key, entry, value):
        c, s, _partial = entry
        return decrypt(self.spec, key, c), (value, c), 1

    def verify(self, kk, s, origin):
        pairs = check_pairs_for(self.manifest, s, origin, self.check_pairs)
        return _verify(self.spec, kk, pairs, self.policy)


def table2_batch(problem: Problem, a_vals, use_complement: bool):
    """Build one Table 2 per value in ``a_vals``.

    Returns (tables, per-row stats) where each stat is (hits, midpoint ops,
    max ops for one hit).
    """
    spec = problem.spec
    kmask, bmask = spec.key_mask, spec.block_mask
    x = problem.key_pass(a_vals)
    found = [np.nonzero(problem.table1.contains_many(x))]
    if use_complement:
        xc = x ^ spec.dtype(bmask)
        found.append(np.nonzero(problem.table1.contains_many(xc)))
    rows = np.concatenate([fd[0] for fd in found])
    cols = np.concatenate([fd[1] for fd in found])
    flags = np.concatenate([np.full(len(fd[0]), f) for f, fd in enumerate(found)])
    order = np.lexsort((flags, cols, rows))
    tables = [TableTwo() for _ in range(len(a_vals))]
    stats = [[0, 0, 0] for _ in range(len(a_vals))]
    for idx in order:
        r, i, f = int(rows[idx]), int(cols[idx]), int(flags[idx])
        value = int(x[r, i])
        if f:
            # ~P_i = d_~i(~a): the record belongs to key ~i and guess ~a.  The
            # entry must hold d_~i(C), the value the K2 scan meets as ~B_j.
            value ^= bmask
            key = complement(i, spec.key_bits)
        else:
            key = i
        for entry in problem.lookup(value):
            b_val, origin, ops = problem.midpoint(key, entry, value)
            tables[r].add(TableTwoEntry(b_val, key, entry[1], f, origin))
            st = stats[r]
            st[0] += 1
            st[1] += ops
            st[2] = max(st[2], ops)
    return tables, stats


def _flag_keys(tables, f):
    keys = set()
    for t in tables:
        keys.update(t.by_flag[f])
    return np.fromiter(keys, dtype=np.uint64, count=len(keys))


def scan_batch(problem: Problem, a_vals, tables, use_complement: bool):
    """Run the K2 scan for each value in ``a_vals`` against its Table 2.

    Returns per-row (success, candidates tested, verify ops).
    """
    spec = problem.spec
    bmask = spec.block_mask
    y = problem.key_pass(a_vals)
    hits = []
    for f in ((0, 1) if use_complement else (0,)):
        keys = _flag_keys(tables, f)
        if not len(keys):
            continue
        probe = y ^ spec.dtype(bmask) if f else y
        rr, jj = np.nonzero(np.isin(probe, keys.astype(y.dtype)))
        hits.extend((int(r), int(j), f) for r, j in zip(rr, jj))
    hits.sort()
    results = [[None, 0, 0] for _ in range(len(a_vals))]
    for r, j, f in hits:
        res = results[r]
        if res[0] is not None:
            continue
        b_val = int(y[r, j]) ^ (bmask if f else 0)
        k2 = complement(j, spec.key_bits) if f else j
        for e in tables[r].lookup(b_val, f):
            kk = TwoKey(e.i, k2)
            ok, ops = problem.verify(kk, e.s, e.origin)
            res[1] += 1
            res[2] += ops
            if ok:
                res[0] = (kk, e.s)
                break
    return results


def run_iterations(problem: Problem, a_vals, use_complement: bool) -> list:
    """Evaluate a batch of guesses; one IterationOutcome per value."""
    a_vals = np.asarray(a_vals, dtype=np.uint64)
    tables, tstats = table2_batch(problem, a_vals, use_complement)
    scans = scan_batch(problem, a_vals, tables, use_complement)
    sweep = 2 * problem.spec.key_count
    out = []
    for a, t, (hits, mops, mmax), (succ, ncand, vops) in zip(a_vals, tables, tstats, scans):
        out.append(IterationOutcome(int(a), len(t), ncand, succ, sweep + mops + vops,
                                    hits, mops, vops, mmax))
    return out


def build_table2(a: int, t1: TableOne, spec: CipherSpec, use_complement: bool = False,
                 manifest: Optional[CorpusManifest] = None) -> TableTwo:
    """Table 2 for a single guess ``a``."""
    problem = BlockProblem(spec, t1, manifest or CorpusManifest(spec))
    tables, _ = table2_batch(problem, [a], use_complement)
    return tables[0]


def scan_k2(a: int, t2: TableTwo, manifest: CorpusManifest, spec: CipherSpec,
            use_complement: bool = False, policy=Policy.FULL, check_pairs: int = 2,
            t1: Optional[TableOne] = None) -> IterationOutcome:
    """K2 scan for one guess against a prebuilt Table 2."""
    problem = BlockProblem(spec, t1, manifest, policy, check_pairs)
    succ, ncand, vops = scan_batch(problem, [a], [t2], use_complement)[0]
    return IterationOutcome(a, len(t2), ncand, succ, spec.key_count + vops, 0, 0, vops, 0)


def iterate(problem: Problem, config: AttackConfig, use_complement: bool):
    """Yield IterationOutcomes in A-sequence order until success or the cap.

    With several threads, consecutive batches are evaluated concurrently but
    consumed in order, so the output is the same as single-threaded.
    """
    seq = APermutation(problem.spec.block_bits, config.a_seed)
    limit = min(config.max_iterations, len(seq))
    starts = range(0, limit, config.chunk_size)

    def work(start):
        return run_iterations(problem, seq.block(start, min(config.chunk_size, limit - start)),
                              use_complement)

    if config.thread_count == 1:
        for start in starts:
            for out in work(start):
                yield out
                if out.success:
                    return
        return
    with ThreadPoolExecutor(config.thread_count) as pool:
        pending = []
        it = iter(starts)
        for start in it:
            pending.append(pool.submit(work, start))
            if len(pending) >= config.thread_count:
                break
        while pending:
            batch = pending.pop(0).result()
            nxt = next(it, None)
            if nxt is not None:
                pending.append(pool.submit(work, nxt))
            for out in batch:
                yield out
                if out.success:
                    for fut in pending:
                        fut.cancel()
                    return


def summarize(outcomes, problem: Problem, config: AttackConfig, elapsed: float,
              prediction, n: int) -> AttackReport:
    last = outcomes[-1] if outcomes else None
    return AttackReport(
        outcome=last.success if last else None,
        iterations_used=len(outcomes),
        total_cipher_ops=sum(o.cipher_ops for o in outcomes),
        table2_sizes=[o.table2_size for o in outcomes],
        elapsed=elapsed,
        predicted_iterations=float(prediction.expected_iterations),
        predicted_ops=float(prediction.expected_cipher_ops),
        n=n,
        table1_entries=len(problem.table1),
        candidates_tested=sum(o.candidates_tested for o in outcomes),
        table1_hits=sum(o.table1_hits for o in outcomes),
        midpoint_ops=sum(o.midpoint_ops for o in outcomes),
        verify_ops=sum(o.verify_ops for o in outcomes),
        max_midpoint_cost=max((o.max_midpoint_cost for o in outcomes), default=0),
        spec=problem.spec,
        variant=config.variant.value,
        a_seed=config.a_seed,
    )


def attack(config: AttackConfig, t1: TableOne, manifest: CorpusManifest) -> AttackReport:
    """Iterate guesses for the inner value until one recovers a key of some label."""
    from .analysis import predict_cost

    spec = config.spec
    if manifest.spec != spec or t1.block_bits != spec.block_bits:
        raise ConfigError("corpus, manifest and attack config use different cipher specs")
    for s in manifest.labels:
        have = len(manifest.reserved.get(s, ()))
        if have < config.check_pairs + 1:
            raise ConfigError(f"label {s} reserves {have} check pairs, need {config.check_pairs + 1}")
    problem = BlockProblem(spec, t1, manifest, config.verification_policy, config.check_pairs)
    n = len({(c, s) for _, entries in t1.items() for c, s, _ in entries})
    prediction = predict_cost(n, spec.key_bits, spec.block_bits, config.variant, w=config.w)
    t0 = time.perf_counter()
    outcomes = list(iterate(problem, config, config.variant.uses_complement))
    return summarize(outcomes, problem, config, time.perf_counter() - t0, prediction, n)
