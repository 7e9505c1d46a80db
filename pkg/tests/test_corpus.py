import random

import numpy as np
import pytest

from tdea_mitm.cipher import PROFILES, CipherSpec, tdea2_encrypt
from tdea_mitm.corpus import (PartialObservation, PcRecord, TableOne, build_table1,
                              expand_partial, generate_corpus, obscure)
from tdea_mitm.errors import ConfigError, InvalidInput


def test_generate_counts_and_encryption(toy):
    records, man = generate_corpus(toy, 4, 64, seed=3)
    assert len(records) == 256
    assert man.labels == [0, 1, 2, 3]
    assert len(set(man.keys.values())) == 4
    for r in records:
        assert tdea2_encrypt(toy, man.keys[r.s], r.p) == r.c
    for s, pairs in man.reserved.items():
        assert len(pairs) == 3
        for cp in pairs:
            assert cp.mask == toy.block_mask
            assert PcRecord(cp.p, cp.c, s) in records
    for s in man.labels:
        ps = [r.p for r in records if r.s == s]
        assert len(ps) == len(set(ps))


def test_generate_reproducible(toy):
    a = generate_corpus(toy, 2, 32, seed=99)
    b = generate_corpus(toy, 2, 32, seed=99)
    c = generate_corpus(toy, 2, 32, seed=100)
    assert a[0] == b[0] and a[1].keys == b[1].keys
    assert a[0] != c[0]


def test_generate_des():
    spec = CipherSpec.des()
    records, man = generate_corpus(spec, 1, 4, seed=1)
    kk = man.keys[0]
    assert all(tdea2_encrypt(spec, kk, r.p) == r.c for r in records)


def test_generate_rejects_small(toy):
    with pytest.raises(ConfigError):
        generate_corpus(toy, 1, 2)
    with pytest.raises(ConfigError):
        generate_corpus(toy, 0, 10)


def test_expand_partial_contains_truth(toy):
    rng = random.Random(0)
    for w in (0, 1, 4, 13):
        p = rng.getrandbits(20)
        hidden = sum(1 << pos for pos in rng.sample(range(20), w))
        mask = toy.block_mask & ~hidden
        obs = PartialObservation(0xABCDE, p & mask, mask, 0, 20)
        assert obs.w == w
        out = expand_partial(obs)
        assert len(out) == 1 << w
        assert len({r.p for r in out}) == 1 << w
        assert sum(r.p == p for r in out) == 1
        assert all(r.c == 0xABCDE and r.from_partial for r in out)
        assert all(r.p & mask == p & mask for r in out)


def test_expand_partial_refuses_wide():
    obs = PartialObservation(1, 0, 0xF, 0, 20)  # w=16
    assert len(expand_partial(obs, w_max=16)) == 1 << 16
    obs = PartialObservation(1, 0, 0x7, 0, 20)  # w=17
    with pytest.raises(ConfigError):
        expand_partial(obs)


def test_partial_observation_validation():
    with pytest.raises(InvalidInput):
        PartialObservation(0, 0b10, 0b01, 0, 20)


def test_obscure_fraction_and_reserved(toy):
    records, man = generate_corpus(toy, 2, 64, seed=5)
    kept, obs = obscure(records, man, 4, 0.5, seed=1)
    assert len(kept) + len(obs) == len(records)
    assert len(obs) == 64
    reserved = {(cp.p, cp.c) for pairs in man.reserved.values() for cp in pairs}
    assert reserved <= {(r.p, r.c) for r in kept}
    originals = {(r.c, r.s): r.p for r in records}
    for ob in obs:
        assert ob.w == 4
        assert originals[(ob.c, ob.s)] & ob.mask == ob.known_bits
    t1 = build_table1(kept + [r for ob in obs for r in expand_partial(ob)], toy)
    assert len(t1) == 64 + 64 * 16


def test_table_one_matches_linear_scan(toy):
    rng = random.Random(4)
    records = [PcRecord(rng.getrandbits(8), rng.getrandbits(20), rng.randrange(3))
               for _ in range(500)]
    t1 = build_table1(records, toy)
    assert len(t1) == 500
    for p in range(256):
        expect = sorted((r.c, r.s, r.from_partial) for r in records if r.p == p)
        assert sorted(t1.lookup(p)) == expect
        assert (p in t1) == bool(expect)
    assert t1.lookup(1 << 19) == ()


def test_table_one_duplicate_plaintext_labels(toy):
    records = [PcRecord(5, 10, 0), PcRecord(5, 11, 1), PcRecord(5, 10, 0)]
    t1 = build_table1(records, toy)
    assert t1.lookup(5) == ((10, 0, False), (11, 1, False), (10, 0, False))
    assert t1.distinct_plaintexts == 1


@pytest.mark.parametrize("b", [20, 32])
def test_contains_many_dense_and_sorted(b):
    spec = PROFILES["toy"] if b == 20 else PROFILES["mid"]
    rng = random.Random(b)
    ps = [rng.getrandbits(b) for _ in range(300)]
    t1 = TableOne([PcRecord(p, 0, 0) for p in ps], b)
    probe = np.array(ps[:50] + [rng.getrandbits(b) for _ in range(200)] + [spec.block_mask],
                     dtype=np.uint64)
    got = t1.contains_many(probe)
    assert list(got) == [int(v) in set(ps) for v in probe]


def test_empty_table_rejected(toy):
    with pytest.raises(InvalidInput):
        build_table1([], toy)
