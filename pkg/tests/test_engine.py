import random

import numpy as np
import pytest

from tdea_mitm.cipher import PROFILES, TwoKey, complement, decrypt, encrypt, tdea2_encrypt
from tdea_mitm.corpus import CheckPair, CorpusManifest, build_table1, generate_corpus
from tdea_mitm.engine import (AttackConfig, BlockProblem, Policy, TableTwo, Variant, attack,
                              build_table2, run_iterations, scan_k2, table2_batch,
                              verify_candidate)
from tdea_mitm.errors import ConfigError
from tdea_mitm.sequence import APermutation


@pytest.fixture(scope="module")
def corpus(toy):
    records, man = generate_corpus(toy, 1, 256, seed=21)
    return records, man, build_table1(records, toy)


def one_iteration(spec, t1, man, a, complemented=False):
    problem = BlockProblem(spec, t1, man)
    return run_iterations(problem, [a], complemented)[0]


def naive_table2(spec, t1, a):
    """f=0 entries by a plain loop over every key."""
    out = set()
    for i in range(spec.key_count):
        for c, s, _ in t1.lookup(decrypt(spec, i, a)):
            out.add((decrypt(spec, i, c), i, s))
    return out


def test_table2_matches_naive_loop(toy, corpus):
    _, man, t1 = corpus
    seq = APermutation(20, 5)
    for idx in range(6):
        a = seq.value(idx)
        t2 = build_table2(a, t1, toy)
        got = {(e.b_val, e.i, e.s) for e in t2.entries()}
        assert got == naive_table2(toy, t1, a)
        assert all(e.f == 0 for e in t2.entries())


def test_complement_entries_equal_plain_entries_of_complemented_guess(tiny):
    # exhaustive over every guess at b=16, k=8
    records, man = generate_corpus(tiny, 1, 64, seed=2)
    t1 = build_table1(records, tiny)
    problem = BlockProblem(tiny, t1, man)
    mask = tiny.block_mask
    for lo in range(0, 1 << 16, 4096):
        a_vals = np.arange(lo, lo + 4096, dtype=np.uint64)
        with_c, _ = table2_batch(problem, a_vals, True)
        plain, _ = table2_batch(problem, a_vals ^ np.uint64(mask), False)
        for tc, tp in zip(with_c, plain):
            f1 = sorted((e.b_val, e.i, e.s) for e in tc.entries() if e.f == 1)
            f0 = sorted((e.b_val, e.i, e.s) for e in tp.entries())
            assert f1 == f0


def test_mean_table2_size(toy, corpus):
    _, man, t1 = corpus
    problem = BlockProblem(toy, t1, man)
    a_vals = APermutation(20, 8).block(0, 400)
    plain, _ = table2_batch(problem, a_vals, False)
    comp, _ = table2_batch(problem, a_vals, True)
    # n * 2^k / 2^b = 1, doubled with complementation
    assert 0.8 <= np.mean([len(t) for t in plain]) <= 1.2
    assert 1.7 <= np.mean([len(t) for t in comp]) <= 2.3


def test_empty_table2_yields_no_candidates(toy, corpus):
    _, man, _ = corpus
    out = scan_k2(123, TableTwo(), man, toy)
    assert out.success is None and out.candidates_tested == 0


def test_planted_guess_succeeds(toy, corpus):
    records, man, t1 = corpus
    kk = man.keys[0]
    for r in records[:20]:
        a = encrypt(toy, kk.k1, r.p)
        out = one_iteration(toy, t1, man, a)
        assert out.success == (kk, 0)
        assert out.table2_size >= 1


def test_planted_complemented_guess(toy, corpus):
    records, man, t1 = corpus
    kk = man.keys[0]
    for r in records[:20]:
        a = complement(encrypt(toy, kk.k1, r.p), 20)
        assert one_iteration(toy, t1, man, a, complemented=True).success == (kk, 0)
        # the guess ~a also works, through the plain half of the lookup
        assert one_iteration(toy, t1, man, a ^ toy.block_mask, True).success == (kk, 0)


def test_ops_per_iteration(toy, corpus):
    _, man, t1 = corpus
    problem = BlockProblem(toy, t1, man)
    outs = run_iterations(problem, APermutation(20, 1).block(0, 64), False)
    for o in outs:
        assert o.cipher_ops == 2 * 4096 + o.midpoint_ops + o.verify_ops
        assert o.midpoint_ops == o.table1_hits


def test_all_plaintexts_succeeds_first_iteration(tiny):
    records, man = generate_corpus(tiny, 1, 1 << 16, seed=4)
    t1 = build_table1(records, tiny)
    rep = attack(AttackConfig(tiny, max_iterations=1, a_seed=9), t1, man)
    assert rep.success and rep.outcome[0] == man.keys[0]
    assert rep.iterations_used == 1
    assert rep.predicted_iterations == 1.0


def test_exhaustion_reports_failure():
    spec = PROFILES["toy"]
    records, man = generate_corpus(spec, 1, 8, seed=1)
    rep = attack(AttackConfig(spec, max_iterations=5), build_table1(records, spec), man)
    assert not rep.success
    assert rep.iterations_used == 5
    assert rep.to_dict()["recovered_key"] is None


def test_multikey_recovers_some_label(toy):
    records, man = generate_corpus(toy, 16, 16, seed=8)
    rep = attack(AttackConfig(toy, Variant.MULTIKEY, a_seed=2), build_table1(records, toy), man)
    kk, s = rep.outcome
    assert man.keys[s] == kk
    assert rep.n == 256


def test_determinism_threads_and_chunks(toy, corpus):
    _, man, t1 = corpus
    base = attack(AttackConfig(toy, a_seed=31), t1, man)
    assert base.success
    for threads, chunk in [(1, 1), (1, 7), (2, 16), (3, 5), (4, 64)]:
        rep = attack(AttackConfig(toy, a_seed=31, thread_count=threads, chunk_size=chunk),
                     t1, man)
        assert rep.to_dict() == base.to_dict()


def test_config_validation(toy, corpus):
    _, man, t1 = corpus
    with pytest.raises(ConfigError):
        AttackConfig(toy, max_iterations=0)
    with pytest.raises(ConfigError):
        AttackConfig(toy, thread_count=0)
    with pytest.raises(ConfigError):
        attack(AttackConfig(toy, check_pairs=3), t1, man)
    with pytest.raises(ConfigError):
        attack(AttackConfig(PROFILES["tiny"]), t1, man)


# --- verification ------------------------------------------------------------


def _manifest_with(spec, kk, pairs):
    return CorpusManifest(spec, {0: kk}, {0: pairs})


def test_verify_full_bit_rejects_wrong_keys(toy):
    rng = random.Random(1)
    kk = TwoKey(0x123, 0x456)
    pairs = [CheckPair(p, tdea2_encrypt(toy, kk, p), toy.block_mask)
             for p in rng.sample(range(1 << 20), 3)]
    man = _manifest_with(toy, kk, pairs)
    assert verify_candidate(kk, 0, man)
    wrong = sum(verify_candidate(TwoKey(rng.getrandbits(12), rng.getrandbits(12)), 0, man)
                for _ in range(3000))
    assert wrong == 0


def test_verify_excludes_origin(toy):
    kk = TwoKey(1, 2)
    pairs = [CheckPair(p, tdea2_encrypt(toy, kk, p), toy.block_mask) for p in (1, 2, 3)]
    man = _manifest_with(toy, kk, pairs)
    assert verify_candidate(kk, 0, man, exclude=(1, pairs[0].c))
    with pytest.raises(ConfigError):
        verify_candidate(kk, 0, man, exclude=(1, pairs[0].c), check_pairs=3)


def test_verify_masked_bit_acceptance_rate(toy):
    # 4 known bits per check pair, two pairs: wrong key passes with prob 2^-8
    rng = random.Random(2)
    kk = TwoKey(0x0AB, 0x9CD)
    mask = 0b1111 << 8
    pairs = []
    for p in rng.sample(range(1 << 20), 2):
        pairs.append(CheckPair(p & mask, tdea2_encrypt(toy, kk, p), mask))
    man = _manifest_with(toy, kk, pairs)
    assert verify_candidate(kk, 0, man, Policy.MASKED)
    with pytest.raises(ConfigError):
        verify_candidate(kk, 0, man, Policy.FULL)
    trials = 20_000
    accepted = sum(verify_candidate(TwoKey(rng.getrandbits(12), rng.getrandbits(12)), 0, man,
                                    Policy.MASKED) for _ in range(trials))
    # mean 78, sd ~8.8
    assert 40 <= accepted <= 125


def test_partial_corpus_attack(toy):
    from tdea_mitm.corpus import expand_partial, obscure

    records, man = generate_corpus(toy, 1, 256, seed=12)
    kept, obs = obscure(records, man, 4, 0.5, seed=3)
    full = kept + [r for ob in obs for r in expand_partial(ob)]
    t1 = build_table1(full, toy)
    assert len(t1) == 128 + 128 * 16
    rep = attack(AttackConfig(toy, Variant.PARTIAL, a_seed=4, w=4), t1, man)
    assert rep.outcome == (man.keys[0], 0)
    assert rep.n == 256

