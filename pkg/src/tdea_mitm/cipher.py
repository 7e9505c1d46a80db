"""Cipher abstraction: DES, 2-key triple encryption, and a scaled Feistel family.

Blocks and keys are plain Python ints holding the low ``block_bits`` /
``key_bits`` bits.  Besides the scalar API there is a numpy path that
evaluates one block under *every* key at once; the attack loops are built on
it.  The scalar and vector MiniFeistel paths are written separately so each
can be checked against the other.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from . import des
from .errors import InvalidInput

# key-space bound for the exhaustive numpy paths (2^24 round-key columns)
MAX_ENUM_KEY_BITS = 24


class Family(str, enum.Enum):
    DES = "des"
    MINI = "minifeistel"


@dataclass(frozen=True)
class CipherSpec:
    family: Family = Family.MINI
    block_bits: int = 20
    key_bits: int = 12
    rounds: int = 8

    def __post_init__(self):
        fam = Family(self.family)
        object.__setattr__(self, "family", fam)
        if fam is Family.DES:
            if (self.block_bits, self.key_bits) != (64, 56):
                raise InvalidInput("DES is fixed at block_bits=64, key_bits=56")
            object.__setattr__(self, "rounds", 16)
            return
        if not 16 <= self.block_bits <= 64 or self.block_bits % 2:
            raise InvalidInput(f"block_bits must be even and in 16..64, got {self.block_bits}")
        if not 8 <= self.key_bits <= 56:
            raise InvalidInput(f"key_bits must be in 8..56, got {self.key_bits}")
        if self.rounds < 2:
            raise InvalidInput(f"rounds must be >= 2, got {self.rounds}")

    @classmethod
    def des(cls) -> "CipherSpec":
        return cls(Family.DES, 64, 56, 16)

    @classmethod
    def mini(cls, block_bits=20, key_bits=12, rounds=8) -> "CipherSpec":
        return cls(Family.MINI, block_bits, key_bits, rounds)

    @property
    def has_complementation(self) -> bool:
        # both families have it by construction
        return True

    @property
    def block_mask(self) -> int:
        return (1 << self.block_bits) - 1

    @property
    def key_mask(self) -> int:
        return (1 << self.key_bits) - 1

    @property
    def key_count(self) -> int:
        return 1 << self.key_bits

    @property
    def dtype(self):
        return np.uint32 if self.block_bits <= 32 else np.uint64

    def to_dict(self) -> dict:
        return {
            "family": self.family.value,
            "block_bits": self.block_bits,
            "key_bits": self.key_bits,
            "rounds": self.rounds,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CipherSpec":
        fam = Family(d.get("family", "minifeistel"))
        if fam is Family.DES:
            return cls.des()
        return cls(fam, int(d.get("block_bits", 20)), int(d.get("key_bits", 12)),
                   int(d.get("rounds", 8)))


class TwoKey(NamedTuple):
    k1: int
    k2: int


def complement(x: int, width: int) -> int:
    """Bitwise NOT of ``x`` restricted to its low ``width`` bits."""
    return ~x & ((1 << width) - 1)


def check_key(spec: CipherSpec, key: int) -> None:
    if not 0 <= key <= spec.key_mask:
        raise InvalidInput(f"key {key:#x} out of range for {spec.key_bits}-bit keys")


def check_block(spec: CipherSpec, block: int) -> None:
    if not 0 <= block <= spec.block_mask:
        raise InvalidInput(f"block {block:#x} out of range for {spec.block_bits}-bit blocks")


# ---------------------------------------------------------------------------
# MiniFeistel
#
# Balanced Feistel on two h-bit halves.  Round key r is the master key
# rotated left by a round-dependent offset, repeated to h bits when k < h and
# truncated otherwise, so every round-key bit is a copy of one key bit.  The
# round function only sees (R xor roundkey xor const); complementing R and the
# key together leaves it unchanged, which gives the complementation property.

_GOLDEN = 0x9E3779B97F4A7C15


@dataclass(frozen=True)
class _MiniParams:
    half: int
    mask: int
    mul1: int
    mul2: int
    shift1: int
    shift2: int
    consts: tuple
    offsets: tuple


@lru_cache(maxsize=None)
def _mini_params(spec: CipherSpec) -> _MiniParams:
    h = spec.block_bits // 2
    mask = (1 << h) - 1
    mul1 = ((0xB5AD4ECEDA1CE2A9 >> (64 - h)) | 1) & mask
    mul2 = ((0xD6E8FEB86659FD93 >> (64 - h)) | 1) & mask
    consts = tuple(((_GOLDEN * (r + 1)) & (2**64 - 1)) >> (64 - h) for r in range(spec.rounds))
    offsets = tuple((5 * r) % spec.key_bits for r in range(spec.rounds))
    return _MiniParams(h, mask, mul1, mul2, (h + 1) // 2, max(1, h // 3), consts, offsets)


def _rotl(x: int, n: int, width: int) -> int:
    if n == 0:
        return x
    return ((x << n) | (x >> (width - n))) & ((1 << width) - 1)


def mini_round_keys(spec: CipherSpec, key: int) -> tuple:
    """Round keys with the round constants already folded in."""
    prm = _mini_params(spec)
    k = spec.key_bits
    out = []
    for r in range(spec.rounds):
        rot = _rotl(key, prm.offsets[r], k)
        ext = 0
        for t in range(-(-prm.half // k)):
            ext |= rot << (k * t)
        out.append((ext & prm.mask) ^ prm.consts[r])
    return tuple(out)


def _mini_f(prm: _MiniParams, x: int) -> int:
    x = (x * prm.mul1) & prm.mask
    x ^= x >> prm.shift1
    x = (x * prm.mul2) & prm.mask
    x ^= x >> prm.shift2
    return x


def _mini_encrypt(spec, key, p):
    prm = _mini_params(spec)
    left, right = p >> prm.half, p & prm.mask
    for rk in mini_round_keys(spec, key):
        left, right = right, left ^ _mini_f(prm, right ^ rk)
    return (left << prm.half) | right


def _mini_decrypt(spec, key, c):
    prm = _mini_params(spec)
    left, right = c >> prm.half, c & prm.mask
    for rk in reversed(mini_round_keys(spec, key)):
        left, right = right ^ _mini_f(prm, left ^ rk), left
    return (left << prm.half) | right


# ---------------------------------------------------------------------------
# scalar API


def encrypt(spec: CipherSpec, key: int, p: int) -> int:
    check_key(spec, key)
    check_block(spec, p)
    if spec.family is Family.DES:
        return des.des_encrypt(key, p)
    return _mini_encrypt(spec, key, p)


def decrypt(spec: CipherSpec, key: int, c: int) -> int:
    check_key(spec, key)
    check_block(spec, c)
    if spec.family is Family.DES:
        return des.des_decrypt(key, c)
    return _mini_decrypt(spec, key, c)


def tdea2_encrypt(spec: CipherSpec, kk: TwoKey, p: int) -> int:
    """e_K1(d_K2(e_K1(p)))."""
    k1, k2 = kk
    return encrypt(spec, k1, decrypt(spec, k2, encrypt(spec, k1, p)))


def tdea2_decrypt(spec: CipherSpec, kk: TwoKey, c: int) -> int:
    k1, k2 = kk
    return decrypt(spec, k1, encrypt(spec, k2, decrypt(spec, k1, c)))


# ---------------------------------------------------------------------------
# vector API


def _round_keys_of(spec: CipherSpec, keys: np.ndarray) -> np.ndarray:
    """Round keys (constants folded) for an array of keys; shape (rounds, *keys.shape)."""
    prm = _mini_params(spec)
    k = spec.key_bits
    keys = keys.astype(np.uint64)
    kmask = np.uint64(spec.key_mask)
    table = np.empty((spec.rounds,) + keys.shape, dtype=spec.dtype)
    for r in range(spec.rounds):
        off = prm.offsets[r]
        if off:
            rot = ((keys << np.uint64(off)) | (keys >> np.uint64(k - off))) & kmask
        else:
            rot = keys
        ext = np.zeros_like(keys)
        for t in range(-(-prm.half // k)):
            ext |= rot << np.uint64(k * t)
        table[r] = (ext & np.uint64(prm.mask)) ^ np.uint64(prm.consts[r])
    return table


@lru_cache(maxsize=8)
def round_key_table(spec: CipherSpec) -> np.ndarray:
    """Array of shape (rounds, 2^k): round keys (constants folded) for every key."""
    if spec.family is not Family.MINI:
        raise InvalidInput("round key tables exist only for MiniFeistel")
    if spec.key_bits > MAX_ENUM_KEY_BITS:
        raise InvalidInput(f"key_bits={spec.key_bits} too large to enumerate")
    table = _round_keys_of(spec, np.arange(spec.key_count, dtype=np.uint64))
    table.setflags(write=False)
    return table


def _feistel_vec(spec, blocks, rks, inverse):
    """Run MiniFeistel on broadcast arrays: ``blocks`` against round-key rows ``rks``."""
    prm = _mini_params(spec)
    dt = spec.dtype
    shape = np.broadcast_shapes(np.shape(blocks), rks.shape[1:])
    blocks = np.asarray(blocks, dtype=dt)
    h, mask = dt(prm.half), dt(prm.mask)
    m1, m2 = dt(prm.mul1), dt(prm.mul2)
    s1, s2 = dt(prm.shift1), dt(prm.shift2)
    left = np.empty(shape, dt)
    right = np.empty(shape, dt)
    left[...] = blocks >> h
    right[...] = blocks & mask
    x = np.empty(shape, dt)
    tmp = np.empty(shape, dt)
    order = range(spec.rounds - 1, -1, -1) if inverse else range(spec.rounds)
    for r in order:
        # encryption mixes into left from right; decryption the reverse
        src, dst = (left, right) if inverse else (right, left)
        np.bitwise_xor(src, rks[r], out=x)
        np.multiply(x, m1, out=x)
        np.bitwise_and(x, mask, out=x)
        np.right_shift(x, s1, out=tmp)
        np.bitwise_xor(x, tmp, out=x)
        np.multiply(x, m2, out=x)
        np.bitwise_and(x, mask, out=x)
        np.right_shift(x, s2, out=tmp)
        np.bitwise_xor(x, tmp, out=x)
        np.bitwise_xor(dst, x, out=dst)
        left, right = right, left
    np.left_shift(left, h, out=left)
    np.bitwise_or(left, right, out=left)
    return left


def _crypt_all_keys(spec, blocks, inverse):
    blocks = np.asarray(blocks, dtype=np.uint64).reshape(-1, 1)
    table = round_key_table(spec)
    return _feistel_vec(spec, blocks.astype(spec.dtype), table[:, None, :], inverse)


def encrypt_all_keys(spec: CipherSpec, blocks) -> np.ndarray:
    """Row r, column i holds e_i(blocks[r])."""
    return _crypt_all_keys(spec, blocks, inverse=False)


def decrypt_all_keys(spec: CipherSpec, blocks) -> np.ndarray:
    """Row r, column i holds d_i(blocks[r])."""
    return _crypt_all_keys(spec, blocks, inverse=True)


def crypt_batch(spec: CipherSpec, keys, blocks, inverse=False) -> np.ndarray:
    """Elementwise e_key(block) (or d_key) over broadcast ``keys`` / ``blocks`` arrays."""
    keys = np.asarray(keys)
    blocks = np.asarray(blocks)
    if spec.family is Family.DES:
        fn = des.des_decrypt if inverse else des.des_encrypt
        kb, bb = np.broadcast_arrays(keys, blocks)
        out = np.fromiter((fn(int(k), int(b)) for k, b in zip(kb.ravel(), bb.ravel())),
                          dtype=np.uint64, count=kb.size)
        return out.reshape(kb.shape)
    if spec.key_bits <= MAX_ENUM_KEY_BITS:
        rks = round_key_table(spec)[:, keys.astype(np.intp)]
    else:
        rks = _round_keys_of(spec, keys)
    return _feistel_vec(spec, blocks.astype(spec.dtype), rks, inverse)


# named MiniFeistel parameter sets used by experiments and self-checks
PROFILES = {
    "toy": CipherSpec.mini(20, 12, 8),
    "tiny": CipherSpec.mini(16, 8, 8),
    "mid": CipherSpec.mini(32, 16, 10),
    "wide": CipherSpec.mini(64, 56, 16),
}
