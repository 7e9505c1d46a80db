"""Analytic cost model and an exhaustive-search ground-truth oracle."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .cipher import CipherSpec, TwoKey, decrypt_all_keys, encrypt_all_keys, tdea2_encrypt
from .errors import ConfigError, InvalidInput

ORACLE_MAX_KEY_BITS = 28  # bound on 2k
# "n << 2^(k-w)" is read as a margin of at least 2^4
VALIDITY_MARGIN_BITS = 4


def _log2(x) -> float:
    x = Fraction(x)
    if x > 0 and x.numerator & (x.numerator - 1) == 0 and x.denominator & (x.denominator - 1) == 0:
        return x.numerator.bit_length() - x.denominator.bit_length()
    return math.log2(x)


@dataclass
class CostPrediction:
    expected_iterations: Fraction
    expected_cipher_ops: Fraction
    expected_table2_size: Fraction
    table1_storage_entries: int
    variant: str
    storage_bytes: Optional[int] = None
    warnings: list = field(default_factory=list)

    @property
    def log2_iterations(self):
        return _log2(self.expected_iterations)

    @property
    def log2_ops(self):
        return _log2(self.expected_cipher_ops)

    @property
    def log2_storage(self):
        return _log2(self.table1_storage_entries)

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "expected_iterations": float(self.expected_iterations),
            "log2_expected_iterations": self.log2_iterations,
            "expected_cipher_ops": float(self.expected_cipher_ops),
            "log2_expected_cipher_ops": self.log2_ops,
            "expected_table2_size": float(self.expected_table2_size),
            "table1_storage_entries": self.table1_storage_entries,
            "log2_table1_storage_entries": self.log2_storage,
            "storage_bytes": self.storage_bytes,
            "warnings": list(self.warnings),
        }


def predict_cost(n: int, k: int, b: int, variant="basic", w: int = 0,
                 r: Optional[int] = None) -> CostPrediction:
    """Expected cost of the attack with ``n`` known pairs (exact rationals).

    ``w`` is the number of unknown plaintext bits per partial observation
    (counted against every one of the n observations, an upper bound);
    ``r`` switches to the MAC setting with messages of at most 2^r blocks.
    """
    from .engine import Variant

    variant = Variant(variant)
    if n < 1:
        raise InvalidInput("n must be >= 1")
    if k < 1 or b < 1:
        raise InvalidInput("k and b must be positive")
    doubling = 2 if variant.uses_complement else 1
    expand = (1 << w) if variant.uses_partial else 1
    iterations = Fraction(1 << b, n * doubling)
    ops = iterations * 2 * (1 << k)
    t2 = Fraction(n * expand * doubling * (1 << k), 1 << b)
    warnings = []
    if r is not None:
        storage = n * (1 << r)
        nbytes = storage * b // 8
    else:
        storage = n * expand
        nbytes = storage * 2 * b // 8
    if variant.uses_partial and n * (1 << (w + VALIDITY_MARGIN_BITS)) > (1 << k):
        warnings.append(f"n*2^w = 2^{_log2(n * (1 << w)):.1f} is not << 2^k; "
                        "Table 1 build and false-pair hits are no longer negligible")
    return CostPrediction(iterations, ops, t2, storage, variant.value, nbytes, warnings)


def _check_records(records):
    pairs = [(r.p, r.c) if hasattr(r, "p") else tuple(r) for r in records]
    if len(pairs) < 2:
        raise InvalidInput("the oracle needs at least two records")
    return pairs


def brute_force_oracle(records, spec: CipherSpec, workers: int = 1,
                       chunk: int = 64) -> list:
    """Every two-key consistent with all ``records`` (one label), by full search.

    Every one of the 2^(2k) two-keys is tested on the first record; survivors
    are filtered against the rest one at a time.  Output is sorted, so it does
    not depend on ``workers``.
    """
    if 2 * spec.key_bits > ORACLE_MAX_KEY_BITS:
        raise ConfigError(f"exhaustive search over 2^{2 * spec.key_bits} keys refused "
                          f"(limit 2^{ORACLE_MAX_KEY_BITS})")
    pairs = _check_records(records)
    p0, c0 = pairs[0]
    inner = encrypt_all_keys(spec, [p0])[0]
    # e_K1(x) == c0  <=>  x == d_K1(c0); comparing there saves the outer pass
    target = decrypt_all_keys(spec, [c0])[0]

    def search(lo):
        hi = min(lo + chunk, spec.key_count)
        mid = decrypt_all_keys(spec, inner[lo:hi])   # rows K1, columns K2
        rows, cols = np.nonzero(mid == target[lo:hi, None])
        return [TwoKey(int(lo + r), int(c)) for r, c in zip(rows, cols)]

    starts = range(0, spec.key_count, chunk)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            found = [kk for part in pool.map(search, starts) for kk in part]
    else:
        found = [kk for lo in starts for kk in search(lo)]
    survivors = [kk for kk in found
                 if all(tdea2_encrypt(spec, kk, p) == c for p, c in pairs[1:])]
    return sorted(survivors)
