"""Text file formats for corpora, manifests and reports.

Corpus lines are ``<hex p> <hex c> <label> <partial 0|1>``; MAC corpus lines
are ``<hex block>,<hex block>,... <hex mac> <label> <partial 0|1>``.  Hex
fields are zero-padded to the block width.  A ``#! spec {json}`` header line
records the cipher parameters; other ``#`` lines are comments.
"""

from __future__ import annotations

import json
from pathlib import Path

from .cipher import CipherSpec, TwoKey
from .corpus import CheckPair, CorpusManifest, PcRecord
from .errors import ConfigError
from .mac import MacManifest, MacMessage, MacRecord

GROUND_TRUTH_NOTE = "GROUND TRUTH - generating keys, for experiment verification only"


class FormatError(ConfigError):
    def __init__(self, path, line_no, msg):
        super().__init__(f"{path}:{line_no}: {msg}")
        self.line_no = line_no


def _hexw(bits: int) -> int:
    return (bits + 3) // 4


def _spec_header(spec: CipherSpec) -> str:
    return "#! spec " + json.dumps(spec.to_dict(), sort_keys=True)


def _read_lines(path):
    spec = None
    for no, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#! spec "):
            try:
                spec = CipherSpec.from_dict(json.loads(line[8:]))
            except (ValueError, TypeError) as exc:
                raise FormatError(path, no, f"bad spec header: {exc}") from None
            continue
        if line.startswith("#"):
            continue
        yield no, line.split(), spec


def _parse_int(path, no, text, base, what, limit=None):
    try:
        v = int(text, base)
    except ValueError:
        raise FormatError(path, no, f"{what} {text!r} is not a valid number") from None
    if v < 0 or (limit is not None and v > limit):
        raise FormatError(path, no, f"{what} {text!r} out of range")
    return v


def write_corpus(path, records, spec: CipherSpec):
    hw = _hexw(spec.block_bits)
    lines = ["# p c label partial", _spec_header(spec)]
    lines += [f"{r.p:0{hw}x} {r.c:0{hw}x} {r.s} {int(r.from_partial)}" for r in records]
    Path(path).write_text("\n".join(lines) + "\n")


def read_corpus(path, spec: CipherSpec = None):
    """Return (records, spec).  ``spec`` overrides the file header."""
    records = []
    for no, fields, header in _read_lines(path):
        use = spec or header
        if use is None:
            raise FormatError(path, no, "no spec header before the first record")
        if len(fields) != 4:
            raise FormatError(path, no, f"expected 4 fields, got {len(fields)}")
        p = _parse_int(path, no, fields[0], 16, "plaintext", use.block_mask)
        c = _parse_int(path, no, fields[1], 16, "ciphertext", use.block_mask)
        s = _parse_int(path, no, fields[2], 10, "label")
        flag = _parse_int(path, no, fields[3], 10, "partial flag", 1)
        records.append(PcRecord(p, c, s, bool(flag)))
        spec = use
    if not records:
        raise ConfigError(f"{path}: corpus contains no records")
    return records, spec


def write_mac_corpus(path, records, spec: CipherSpec):
    hw = _hexw(spec.block_bits)
    lines = ["# blocks mac label partial", _spec_header(spec)]
    for r in records:
        blocks = ",".join(f"{d:0{hw}x}" for d in r.msg.blocks)
        lines.append(f"{blocks} {r.m:0{hw}x} {r.s} {int(r.from_partial)}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_mac_corpus(path, spec: CipherSpec = None, r: int = None):
    records = []
    for no, fields, header in _read_lines(path):
        use = spec or header
        if use is None:
            raise FormatError(path, no, "no spec header before the first record")
        if len(fields) != 4:
            raise FormatError(path, no, f"expected 4 fields, got {len(fields)}")
        blocks = tuple(_parse_int(path, no, x, 16, "block", use.block_mask)
                       for x in fields[0].split(","))
        if r is not None and len(blocks) > (1 << r):
            raise FormatError(path, no, f"message has {len(blocks)} blocks, bound is 2^{r}")
        m = _parse_int(path, no, fields[1], 16, "MAC", use.block_mask)
        s = _parse_int(path, no, fields[2], 10, "label")
        flag = _parse_int(path, no, fields[3], 10, "partial flag", 1)
        records.append(MacRecord(MacMessage(blocks), m, s, bool(flag)))
        spec = use
    if not records:
        raise ConfigError(f"{path}: MAC corpus contains no records")
    return records, spec


def _keys_to_json(keys, spec):
    kw = _hexw(spec.key_bits)
    return {str(s): {"k1": f"{kk.k1:0{kw}x}", "k2": f"{kk.k2:0{kw}x}"}
            for s, kk in sorted(keys.items())}


def _keys_from_json(d):
    return {int(s): TwoKey(int(v["k1"], 16), int(v["k2"], 16)) for s, v in d.items()}


def manifest_to_dict(manifest: CorpusManifest) -> dict:
    hw = _hexw(manifest.spec.block_bits)
    return {
        "note": GROUND_TRUTH_NOTE,
        "kind": "block",
        "spec": manifest.spec.to_dict(),
        "seed": manifest.seed,
        "keys": _keys_to_json(manifest.keys, manifest.spec),
        "reserved": {str(s): [{"p": f"{cp.p:0{hw}x}", "c": f"{cp.c:0{hw}x}",
                               "mask": f"{cp.mask:0{hw}x}"} for cp in pairs]
                     for s, pairs in sorted(manifest.reserved.items())},
    }


def manifest_from_dict(d: dict) -> CorpusManifest:
    try:
        return CorpusManifest(
            spec=CipherSpec.from_dict(d["spec"]),
            keys=_keys_from_json(d["keys"]),
            reserved={int(s): [CheckPair(int(x["p"], 16), int(x["c"], 16), int(x["mask"], 16))
                               for x in pairs] for s, pairs in d["reserved"].items()},
            seed=d.get("seed"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed manifest: {exc!r}") from None


def mac_manifest_to_dict(manifest: MacManifest) -> dict:
    hw = _hexw(manifest.spec.block_bits)
    return {
        "note": GROUND_TRUTH_NOTE,
        "kind": "mac",
        "spec": manifest.spec.to_dict(),
        "seed": manifest.seed,
        "r": manifest.r,
        "keys": _keys_to_json(manifest.keys, manifest.spec),
        "reserved": {str(s): [{"blocks": [f"{d:0{hw}x}" for d in rec.msg.blocks],
                               "mac": f"{rec.m:0{hw}x}"} for rec in recs]
                     for s, recs in sorted(manifest.reserved.items())},
    }


def mac_manifest_from_dict(d: dict) -> MacManifest:
    try:
        return MacManifest(
            spec=CipherSpec.from_dict(d["spec"]),
            keys=_keys_from_json(d["keys"]),
            reserved={int(s): [MacRecord(MacMessage(tuple(int(b, 16) for b in x["blocks"])),
                                         int(x["mac"], 16), int(s)) for x in recs]
                      for s, recs in d["reserved"].items()},
            seed=d.get("seed"),
            r=int(d.get("r", 6)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed MAC manifest: {exc!r}") from None


def dump_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None


def write_manifest(path, manifest):
    if isinstance(manifest, MacManifest):
        dump_json(path, mac_manifest_to_dict(manifest))
    else:
        dump_json(path, manifest_to_dict(manifest))


def read_manifest(path):
    d = load_json(path)
    if d.get("kind") == "mac":
        return mac_manifest_from_dict(d)
    return manifest_from_dict(d)


def read_des_vectors(path=None):
    """(key56, plaintext, ciphertext) triples from a vector file of 64-bit hex keys."""
    from .des import strip_parity

    if path is None:
        path = Path(__file__).with_name("data") / "des_vectors.txt"
    out = []
    for no, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise FormatError(path, no, "expected key plaintext ciphertext")
        k, p, c = (int(x, 16) for x in parts)
        out.append((strip_parity(k), p, c))
    return out
