import json

import pytest

from tdea_mitm.cli import main

TINY = ["--block-bits", "16", "--key-bits", "8"]


@pytest.fixture
def block_files(tmp_path):
    c, m = tmp_path / "c.txt", tmp_path / "m.json"
    assert main(["gen-corpus", *TINY, "--seed", "3", "--out", str(c), "--manifest", str(m)]) == 0
    return c, m


def test_gen_corpus_round_trip(block_files):
    from tdea_mitm.cipher import tdea2_encrypt
    from tdea_mitm.formats import read_corpus, read_manifest

    records, spec = read_corpus(block_files[0])
    man = read_manifest(block_files[1])
    assert len(records) == 256 and spec.block_bits == 16
    assert all(tdea2_encrypt(spec, man.keys[r.s], r.p) == r.c for r in records)


def test_attack_success_and_report(block_files, tmp_path, capsys):
    c, m = block_files
    out = tmp_path / "r.json"
    assert main(["attack", "--corpus", str(c), "--manifest", str(m), "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    man = json.loads(m.read_text())
    assert rep["success"] and rep["recovered_key"] == man["keys"]["0"]
    assert "elapsed_seconds" not in rep
    assert "recovered key" in capsys.readouterr().out


def test_attack_exhausted_exit_code(block_files):
    c, m = block_files
    assert main(["attack", "--corpus", str(c), "--manifest", str(m),
                 "--max-iterations", "1", "--a-seed", "5"]) == 2


def test_missing_required_field(capsys):
    assert main(["attack"]) == 1
    assert "'corpus'" in capsys.readouterr().err


def test_unknown_flag_is_usage_error(capsys):
    assert main(["attack", "--bogus"]) == 1
    assert main([]) == 1


def test_bad_config_value(tmp_path, block_files, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"corpus": str(block_files[0]), "manifest": str(block_files[1]),
                               "max_iterations": "lots"}))
    assert main(["attack", "--config", str(cfg)]) == 1
    assert "max_iterations" in capsys.readouterr().err


def test_config_file_and_flag_override(tmp_path, block_files):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"corpus": str(block_files[0]), "manifest": str(block_files[1]),
                               "max_iterations": 1, "a_seed": 5}))
    assert main(["attack", "--config", str(cfg)]) == 2
    assert main(["attack", "--config", str(cfg), "--max-iterations", "100000"]) == 0


def test_w_above_w_max_refused(tmp_path, capsys):
    rc = main(["gen-corpus", "--w", "17", "--out", str(tmp_path / "c"),
               "--manifest", str(tmp_path / "m")])
    assert rc == 1 and "w_max" in capsys.readouterr().err


def test_partial_gen_corpus(tmp_path):
    c, m = tmp_path / "c.txt", tmp_path / "m.json"
    assert main(["gen-corpus", "--w", "4", "--out", str(c), "--manifest", str(m)]) == 0
    from tdea_mitm.formats import read_corpus

    records, _ = read_corpus(c)
    assert len(records) == 128 + 128 * 16
    assert main(["attack", "--corpus", str(c), "--manifest", str(m),
                 "--variant", "partial", "--w", "4"]) == 0


def test_mac_attack_and_q_bound(tmp_path, capsys):
    c, m = tmp_path / "c.txt", tmp_path / "m.json"
    assert main(["gen-corpus", "--kind", "mac", *TINY, "--num-keys", "4", "--pairs-per-key",
                 "64", "--out", str(c), "--manifest", str(m)]) == 0
    assert main(["mac-attack", "--corpus", str(c), "--manifest", str(m)]) == 0
    capsys.readouterr()
    assert main(["mac-attack", "--corpus", str(c), "--manifest", str(m), "--r", "2"]) == 1
    assert "bound is 2^2" in capsys.readouterr().err


def test_predict_output(capsys, tmp_path):
    assert main(["predict", "--t", "32"]) == 0
    assert "expected cipher ops: 2^89" in capsys.readouterr().out
    assert main(["predict", "--t", "32", "--variant", "complement"]) == 0
    assert "2^88" in capsys.readouterr().out
    out = tmp_path / "p.json"
    assert main(["predict", "--n", "1", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["log2_expected_cipher_ops"] == 121
    assert main(["predict", "--n", "4", "--t", "2"]) == 1


def test_experiment_trials_zero(capsys):
    assert main(["experiment", "--trials", "0"]) == 1


def test_experiment_outputs(tmp_path):
    out, csv = tmp_path / "e.json", tmp_path / "e.csv"
    assert main(["experiment", *TINY, "--trials", "3", "--seed", "1", "--out", str(out),
                 "--csv", str(csv)]) == 0
    d = json.loads(out.read_text())
    assert d["trials"] == 3 and d["successes"] == 3
    assert all(t["oracle_confirmed"] for t in d["per_trial"])
    assert len(csv.read_text().splitlines()) == 4


def _run_twice(tmp_path, argv_fn):
    blobs = []
    for tag in ("a", "b"):
        d = tmp_path / tag
        d.mkdir()
        rc = main(argv_fn(d))
        blobs.append((rc, {p.name: p.read_bytes() for p in sorted(d.iterdir())}))
    return blobs


@pytest.mark.parametrize("name", ["gen-corpus", "attack", "mac-attack", "predict",
                                  "experiment"])
def test_byte_identical_reports(tmp_path, name):
    def argv(d):
        if name == "predict":
            return ["predict", "--t", "20", "--out", str(d / "r.json")]
        if name == "experiment":
            return ["experiment", *TINY, "--trials", "2", "--seed", "4",
                    "--out", str(d / "r.json"), "--csv", str(d / "r.csv")]
        kind = "mac" if name == "mac-attack" else "block"
        gen = ["gen-corpus", *TINY, "--kind", kind, "--seed", "9", "--out", str(d / "c.txt"),
               "--manifest", str(d / "m.json")]
        if name == "gen-corpus":
            return gen
        assert main(gen) == 0
        return [name, "--corpus", str(d / "c.txt"), "--manifest", str(d / "m.json"),
                "--a-seed", "2", "--out", str(d / "r.json")]

    (rc1, files1), (rc2, files2) = _run_twice(tmp_path, argv)
    assert rc1 == rc2 == 0
    assert files1 == files2


def test_threads_match_single(block_files, tmp_path):
    c, m = block_files
    reports = []
    for threads in (1, 3):
        out = tmp_path / f"r{threads}.json"
        assert main(["attack", "--corpus", str(c), "--manifest", str(m), "--a-seed", "7",
                     "--threads", str(threads), "--out", str(out)]) == 0
        reports.append(out.read_bytes())
    assert reports[0] == reports[1]


def test_verify_cipher(tmp_path, capsys):
    out = tmp_path / "v.json"
    assert main(["verify-cipher", "--samples", "500", "--random-des", "50",
                 "--out", str(out)]) == 0
    assert "FAIL" not in capsys.readouterr().out
    assert all(row["passed"] for row in json.loads(out.read_text()))


def test_missing_file(capsys, tmp_path):
    assert main(["attack", "--corpus", str(tmp_path / "nope"), "--manifest", "x"]) == 1
