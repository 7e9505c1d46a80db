"""Meet-in-the-middle key recovery workbench for 2-key triple encryption."""

from .cipher import PROFILES, CipherSpec, Family, TwoKey, decrypt, encrypt, tdea2_encrypt
from .corpus import build_table1, generate_corpus
from .engine import AttackConfig, Policy, Variant, attack

__version__ = "0.1.0"

__all__ = [
    "PROFILES", "CipherSpec", "Family", "TwoKey", "encrypt", "decrypt", "tdea2_encrypt",
    "build_table1", "generate_corpus", "AttackConfig", "Policy", "Variant", "attack",
]
