"""ANSI Retail MAC (CBC-MAC with a final decrypt/encrypt) and key recovery for it.

MAC = e_K1(d_K2(H_q)) with H the single-key CBC chain under K1.  Guessing
a = d_K1(M) turns the problem into the block attack with both key-space
passes run in the encrypt direction: M_i = e_i(a) is looked up in a table of
MACs, and B_j = e_j(a) is matched against the recomputed chain values H_q.
"""

from __future__ import annotations

import random
import time
from collections import defaultdict
from dataclasses import dataclass, field
from itertools import product
from typing import Optional

import numpy as np

from .cipher import CipherSpec, TwoKey, decrypt, encrypt, encrypt_all_keys
from .corpus import DENSE_INDEX_BITS, W_MAX, _distinct_values
from .engine import AttackConfig, AttackReport, Problem, iterate, summarize
from .errors import ConfigError, InvalidInput

R_DEFAULT = 6


@dataclass(frozen=True)
class MacMessage:
    blocks: tuple

    def __post_init__(self):
        if not self.blocks:
            raise InvalidInput("a MAC message has at least one block")

    @property
    def q(self) -> int:
        return len(self.blocks)


@dataclass(frozen=True)
class MacRecord:
    msg: MacMessage
    m: int
    s: int
    from_partial: bool = False


@dataclass
class MacManifest:
    spec: CipherSpec
    keys: dict = field(default_factory=dict)       # label -> TwoKey
    reserved: dict = field(default_factory=dict)   # label -> [MacRecord]
    seed: object = None
    r: int = R_DEFAULT

    @property
    def labels(self):
        return sorted(self.keys)


def _check_q(q, r):
    if q > (1 << r):
        raise ConfigError(f"message of {q} blocks exceeds the bound 2^{r}")


def pad_and_split(raw: bytes, spec: CipherSpec, r: int = R_DEFAULT,
                  zero_pad: bool = False) -> MacMessage:
    """Pad ``raw`` and cut it into b-bit blocks.

    Default padding appends a single 1 bit and then zeros up to the block
    boundary, which is injective.  ``zero_pad`` only appends zeros (and maps
    the empty string to one zero block); it is not injective.
    """
    b = spec.block_bits
    nbits = 8 * len(raw)
    value = int.from_bytes(raw, "big")
    if zero_pad:
        total = max(b, -(-nbits // b) * b)
        value <<= total - nbits
    else:
        total = -(-(nbits + 1) // b) * b
        value = ((value << 1) | 1) << (total - nbits - 1)
    q = total // b
    _check_q(q, r)
    mask = spec.block_mask
    return MacMessage(tuple((value >> (b * (q - 1 - t))) & mask for t in range(q)))


def cbc_chain(spec: CipherSpec, key: int, blocks) -> int:
    """Final CBC value H_q under a single key (q encryptions)."""
    h = 0
    for d in blocks:
        h = encrypt(spec, key, d ^ h)
    return h


def retail_mac(spec: CipherSpec, kk: TwoKey, msg: MacMessage) -> int:
    if msg.q < 1:
        raise InvalidInput("empty message")
    return encrypt(spec, kk.k1, decrypt(spec, kk.k2, cbc_chain(spec, kk.k1, msg.blocks)))


def generate_mac_corpus(spec: CipherSpec, num_keys: int, records_per_key: int, q_max: int = 8,
                        seed=0, r: int = R_DEFAULT, reserve: int = 3):
    """Random distinct messages of 1..q_max blocks, MACed under ``num_keys`` two-keys."""
    if num_keys < 1 or records_per_key < 3:
        raise ConfigError("need num_keys >= 1 and records_per_key >= 3")
    _check_q(q_max, r)
    rng = random.Random(seed)
    k = spec.key_bits
    manifest = MacManifest(spec=spec, seed=seed, r=r)
    records, seen = [], set()
    for s, v in enumerate(_distinct_values(rng, 2 * k, num_keys)):
        kk = TwoKey(v >> k, v & spec.key_mask)
        manifest.keys[s] = kk
        group = []
        while len(group) < records_per_key:
            q = rng.randint(1, q_max)
            msg = MacMessage(tuple(rng.getrandbits(spec.block_bits) for _ in range(q)))
            if msg in seen:
                continue
            seen.add(msg)
            group.append(MacRecord(msg, retail_mac(spec, kk, msg), s))
        manifest.reserved[s] = group[:reserve]
        records.extend(group)
    return records, manifest


def expand_partial_message(known: MacMessage, masks, m: int, s: int, spec: CipherSpec,
                           w_max: int = W_MAX) -> list:
    """Every completion of a message whose bits outside ``masks`` are unknown."""
    if len(masks) != known.q:
        raise InvalidInput("one mask per block required")
    free = [(t, pos) for t, mk in enumerate(masks) for pos in range(spec.block_bits)
            if not (mk >> pos) & 1]
    if len(free) > w_max:
        raise ConfigError(f"w={len(free)} exceeds w_max={w_max}")
    base = [d & mk for d, mk in zip(known.blocks, masks)]
    out = []
    for bits in product((0, 1), repeat=len(free)):
        blocks = list(base)
        for (t, pos), bit in zip(free, bits):
            blocks[t] |= bit << pos
        out.append(MacRecord(MacMessage(tuple(blocks)), m, s, True))
    return out


class MacTableOne:
    """Immutable multimap: MAC value -> [(msg, s), ...]."""

    def __init__(self, records, block_bits: int):
        table = defaultdict(list)
        n = 0
        for rec in records:
            table[rec.m].append((rec.msg, rec.s))
            n += 1
        if n == 0:
            raise InvalidInput("MAC Table 1 needs at least one record")
        self._table = {m: tuple(v) for m, v in table.items()}
        self.n_total = n
        self.block_bits = block_bits
        self.stored_blocks = sum(msg.q for v in self._table.values() for msg, _ in v)
        keys = np.fromiter(self._table, dtype=np.uint64, count=len(self._table))
        if block_bits <= DENSE_INDEX_BITS:
            self._bitmap = np.zeros(1 << block_bits, dtype=bool)
            self._bitmap[keys.astype(np.intp)] = True
            self._sorted = None
        else:
            self._bitmap, self._sorted = None, np.sort(keys)

    def lookup(self, m: int) -> tuple:
        return self._table.get(m, ())

    def items(self):
        return self._table.items()

    def __len__(self):
        return self.n_total

    def contains_many(self, values: np.ndarray) -> np.ndarray:
        if self._bitmap is not None:
            return self._bitmap[values.astype(np.intp)]
        v = values.astype(np.uint64)
        idx = np.searchsorted(self._sorted, v)
        idx[idx == len(self._sorted)] = 0
        return self._sorted[idx] == v


def build_mac_table1(records, spec: CipherSpec) -> MacTableOne:
    return MacTableOne(records, spec.block_bits)


def _mac_check_records(manifest, s, origin, count):
    recs = [rec for rec in manifest.reserved.get(s, ()) if (rec.msg, rec.m) != origin]
    if len(recs) < count:
        raise ConfigError(f"label {s} has {len(recs)} usable check records, need {count}")
    return recs[:count]


class MacProblem(Problem):
    def __init__(self, spec, table1: MacTableOne, manifest: MacManifest, check_pairs=2):
        super().__init__(spec, table1)
        self.manifest = manifest
        self.check_pairs = check_pairs

    def key_pass(self, a_vals):
        return encrypt_all_keys(self.spec, a_vals)

    def lookup(self, value):
        return self.table1.lookup(value)

    def midpoint(self, key, entry, value):
        msg, _s = entry
        return cbc_chain(self.spec, key, msg.blocks), (msg, value), msg.q

    def verify(self, kk, s, origin):
        ops = 0
        for rec in _mac_check_records(self.manifest, s, origin, self.check_pairs):
            ops += rec.msg.q + 2
            if retail_mac(self.spec, kk, rec.msg) != rec.m:
                return False, ops
        return True, ops


def mac_attack(config: AttackConfig, t1: MacTableOne, manifest: MacManifest,
               problem: Optional[Problem] = None) -> AttackReport:
    """Recover one label's MAC key pair by iterating guesses for d_K1(M)."""
    from .analysis import predict_cost

    spec = config.spec
    if manifest.spec != spec or t1.block_bits != spec.block_bits:
        raise ConfigError("MAC corpus, manifest and config use different cipher specs")
    for s in manifest.labels:
        if len(manifest.reserved.get(s, ())) < config.check_pairs + 1:
            raise ConfigError(f"label {s} reserves too few check records")
    problem = problem or MacProblem(spec, t1, manifest, config.check_pairs)
    n = len({(m, s) for m, entries in t1.items() for _, s in entries})
    prediction = predict_cost(n, spec.key_bits, spec.block_bits, config.variant, r=manifest.r)
    t0 = time.perf_counter()
    outcomes = list(iterate(problem, config, config.variant.uses_complement))
    report = summarize(outcomes, problem, config, time.perf_counter() - t0, prediction, n)
    report.extra = {
        "r": manifest.r,
        "max_q": max(msg.q for _, entries in t1.items() for msg, _ in entries),
        "chain_ops": report.midpoint_ops,
        "max_chain_cost_per_hit": report.max_midpoint_cost,
    }
    return report
