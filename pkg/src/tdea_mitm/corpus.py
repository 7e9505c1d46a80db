"""Known-plaintext corpora, partial-plaintext expansion and the Table 1 index."""

from __future__ import annotations

import random
import sys
from collections import defaultdict
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .cipher import CipherSpec, Family, TwoKey, crypt_batch, tdea2_encrypt
from .errors import ConfigError, InvalidInput

W_MAX = 16
RESERVED_PER_LABEL = 3
# dense membership bitmap up to this block width, sorted-array search above it
DENSE_INDEX_BITS = 24


@dataclass(frozen=True)
class PcRecord:
    p: int
    c: int
    s: int
    from_partial: bool = False


@dataclass(frozen=True)
class PartialObservation:
    c: int
    known_bits: int
    mask: int
    s: int
    block_bits: int

    @property
    def w(self) -> int:
        return self.block_bits - bin(self.mask).count("1")

    def __post_init__(self):
        if self.known_bits & ~self.mask:
            raise InvalidInput("known_bits has bits set outside the mask")


@dataclass(frozen=True)
class CheckPair:
    """A verification pair.  ``mask`` marks the known plaintext bits (all ones if genuine)."""

    p: int
    c: int
    mask: int


@dataclass
class CorpusManifest:
    """Ground truth held alongside a corpus: the generating keys and check pairs."""

    spec: CipherSpec
    keys: dict = field(default_factory=dict)       # label -> TwoKey
    reserved: dict = field(default_factory=dict)   # label -> [CheckPair]
    seed: object = None

    @property
    def labels(self):
        return sorted(self.keys)


def _distinct_values(rng: random.Random, bits: int, count: int) -> list:
    if count > (1 << bits):
        raise ConfigError(f"cannot draw {count} distinct values from {bits} bits")
    if (1 << bits) <= sys.maxsize:
        return rng.sample(range(1 << bits), count)
    seen, out = set(), []
    while len(out) < count:
        v = rng.getrandbits(bits)
        if v not in seen:
            seen.add(v)
            out.append(v)
    return out


def tdea2_encrypt_many(spec: CipherSpec, kk: TwoKey, blocks) -> list:
    if spec.family is Family.DES:
        return [tdea2_encrypt(spec, kk, p) for p in blocks]
    x = np.asarray(blocks, dtype=np.uint64)
    k1 = np.full(x.shape, kk.k1)
    k2 = np.full(x.shape, kk.k2)
    y = crypt_batch(spec, k1, x)
    y = crypt_batch(spec, k2, y, inverse=True)
    y = crypt_batch(spec, k1, y)
    return [int(v) for v in y]


def generate_corpus(spec: CipherSpec, num_keys: int, pairs_per_key: int, seed=0,
                    reserve: int = RESERVED_PER_LABEL):
    """Draw ``num_keys`` distinct two-keys and ``pairs_per_key`` known pairs for each.

    Labels are 0 .. num_keys-1.  The first ``reserve`` pairs of every label are
    recorded in the manifest as check pairs; they stay in the record list too.
    """
    if num_keys < 1:
        raise ConfigError("num_keys must be >= 1")
    if pairs_per_key < 3:
        raise ConfigError("pairs_per_key must be >= 3 so candidates can be checked")
    rng = random.Random(seed)
    k = spec.key_bits
    manifest = CorpusManifest(spec=spec, seed=seed)
    records = []
    for s, v in enumerate(_distinct_values(rng, 2 * k, num_keys)):
        kk = TwoKey(v >> k, v & spec.key_mask)
        ps = _distinct_values(rng, spec.block_bits, pairs_per_key)
        cs = tdea2_encrypt_many(spec, kk, ps)
        manifest.keys[s] = kk
        manifest.reserved[s] = [CheckPair(p, c, spec.block_mask)
                                for p, c in zip(ps[:reserve], cs[:reserve])]
        records.extend(PcRecord(p, c, s) for p, c in zip(ps, cs))
    return records, manifest


def obscure(records, manifest: CorpusManifest, w: int, fraction: float = 0.5, seed=0):
    """Hide ``w`` random plaintext bits of a fraction of each label's records.

    Reserved check pairs are never obscured.  Returns (kept genuine records,
    partial observations).
    """
    b = manifest.spec.block_bits
    if not 0 <= w <= b:
        raise ConfigError(f"w={w} outside 0..{b}")
    rng = random.Random(seed)
    reserved = {(cp.p, cp.c) for pairs in manifest.reserved.values() for cp in pairs}
    by_label = defaultdict(list)
    for r in records:
        by_label[r.s].append(r)
    kept, obs = [], []
    for s in sorted(by_label):
        group = by_label[s]
        eligible = [r for r in group if (r.p, r.c) not in reserved]
        n_hide = min(round(fraction * len(group)), len(eligible))
        chosen = set(rng.sample(range(len(eligible)), n_hide))
        for idx, r in enumerate(eligible):
            if idx in chosen:
                hidden = 0
                for pos in rng.sample(range(b), w):
                    hidden |= 1 << pos
                mask = manifest.spec.block_mask & ~hidden
                obs.append(PartialObservation(r.c, r.p & mask, mask, s, b))
            else:
                kept.append(r)
        kept.extend(r for r in group if (r.p, r.c) in reserved)
    return kept, obs


def expand_partial(obs: PartialObservation, w_max: int = W_MAX) -> list:
    """All 2^w plaintext completions of ``obs``, each paired with its ciphertext."""
    w = obs.w
    if w > w_max:
        raise ConfigError(f"w={w} exceeds w_max={w_max}; refusing 2^{w} expansion")
    free = [pos for pos in range(obs.block_bits) if not (obs.mask >> pos) & 1]
    out = []
    for bits in product((0, 1), repeat=w):
        p = obs.known_bits
        for pos, bit in zip(free, bits):
            p |= bit << pos
        out.append(PcRecord(p, obs.c, obs.s, True))
    return out


class TableOne:
    """Immutable multimap: plaintext -> [(c, s, from_partial), ...]."""

    def __init__(self, records, block_bits: int):
        table = defaultdict(list)
        n = 0
        for r in records:
            table[r.p].append((r.c, r.s, r.from_partial))
            n += 1
        if n == 0:
            raise InvalidInput("Table 1 needs at least one record")
        self._table = {p: tuple(v) for p, v in table.items()}
        self.n_total = n
        self.block_bits = block_bits
        keys = np.fromiter(self._table, dtype=np.uint64, count=len(self._table))
        if block_bits <= DENSE_INDEX_BITS:
            bitmap = np.zeros(1 << block_bits, dtype=bool)
            bitmap[keys.astype(np.intp)] = True
            self._bitmap, self._sorted = bitmap, None
        else:
            self._bitmap, self._sorted = None, np.sort(keys)

    def lookup(self, p: int) -> tuple:
        return self._table.get(p, ())

    def items(self):
        return self._table.items()

    def __len__(self):
        return self.n_total

    def __contains__(self, p):
        return p in self._table

    @property
    def distinct_plaintexts(self) -> int:
        return len(self._table)

    def contains_many(self, values: np.ndarray) -> np.ndarray:
        """Vectorised membership test over an array of blocks."""
        if self._bitmap is not None:
            return self._bitmap[values.astype(np.intp)]
        v = values.astype(np.uint64)
        idx = np.searchsorted(self._sorted, v)
        idx[idx == len(self._sorted)] = 0
        return self._sorted[idx] == v


def build_table1(records, spec: CipherSpec) -> TableOne:
    return TableOne(records, spec.block_bits)
