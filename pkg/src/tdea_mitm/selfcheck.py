"""Cipher self-checks: DES known answers and the complementation property."""

import random

import numpy as np

from .cipher import PROFILES, CipherSpec, complement, decrypt, encrypt, encrypt_all_keys
from .formats import read_des_vectors


def des_vector_failures(path=None) -> list:
    spec = CipherSpec.des()
    bad = []
    for k, p, c in read_des_vectors(path):
        if encrypt(spec, k, p) != c or decrypt(spec, k, c) != p:
            bad.append((k, p, c))
    return bad


def reference_des():
    """Encrypt function from the ``cryptography`` package, or None if unavailable."""
    try:
        import warnings

        from cryptography.hazmat.decrepit.ciphers.algorithms import TripleDES
        from cryptography.hazmat.primitives.ciphers import Cipher, modes
    except ImportError:
        return None
    from .des import expand_key

    def ref(key56, p):
        kb = expand_key(key56).to_bytes(8, "big") * 3
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            enc = Cipher(TripleDES(kb), modes.ECB()).encryptor()
        return int.from_bytes(enc.update(p.to_bytes(8, "big")) + enc.finalize(), "big")

    return ref


def des_random_mismatches(count=1000, seed=0):
    ref = reference_des()
    if ref is None:
        return None
    spec = CipherSpec.des()
    rng = random.Random(seed)
    bad = 0
    for _ in range(count):
        k, p = rng.getrandbits(56), rng.getrandbits(64)
        c = encrypt(spec, k, p)
        if c != ref(k, p) or decrypt(spec, k, c) != p:
            bad += 1
    return bad


def complementation_failures(spec: CipherSpec, samples=10_000, seed=0) -> int:
    rng = random.Random(seed)
    b, k = spec.block_bits, spec.key_bits
    bad = 0
    for _ in range(samples):
        key, p = rng.getrandbits(k), rng.getrandbits(b)
        if complement(encrypt(spec, key, p), b) != encrypt(spec, complement(key, k),
                                                           complement(p, b)):
            bad += 1
    return bad


def exhaustive_complementation_failures(spec: CipherSpec, rows=4096) -> int:
    """Check every (key, block) pair; row index ~p is N-1-p, so it is a reversal."""
    n = 1 << spec.block_bits
    mask = spec.dtype(spec.block_mask)
    bad = 0
    for lo in range(0, n // 2, rows):
        hi = min(lo + rows, n // 2)
        direct = encrypt_all_keys(spec, np.arange(lo, hi))
        mirrored = encrypt_all_keys(spec, np.arange(n - hi, n - lo))[::-1, ::-1]
        bad += int(np.count_nonzero((direct ^ mask) != mirrored))
    return bad


def run_all(samples=10_000, random_des=1000, extra_exhaustive=True) -> list:
    """List of (name, passed, detail) lines."""
    out = []
    bad = des_vector_failures()
    out.append(("des-known-answer", not bad, f"{len(bad)} mismatches"))
    mism = des_random_mismatches(random_des)
    if mism is None:
        out.append(("des-random-vs-reference", True, "skipped: cryptography not installed"))
    else:
        out.append(("des-random-vs-reference", mism == 0, f"{mism}/{random_des} mismatches"))
    for name, spec in [("des", CipherSpec.des())] + sorted(PROFILES.items()):
        fails = complementation_failures(spec, samples)
        out.append((f"complementation-{name}", fails == 0, f"{fails}/{samples} failures"))
    if extra_exhaustive:
        fails = exhaustive_complementation_failures(PROFILES["tiny"])
        out.append(("complementation-exhaustive-b16-k8", fails == 0, f"{fails} failures"))
    return out
