"""Command-line entry point.

Every subcommand accepts ``--config FILE`` (JSON); explicit flags override
values from the file.  Exit codes: 0 success, 1 usage or config error,
2 attack exhausted its iterations, 3 internal invariant failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field

from . import formats
from .analysis import predict_cost
from .cipher import CipherSpec
from .corpus import W_MAX, build_table1, expand_partial, generate_corpus, obscure
from .engine import AttackConfig, Policy, Variant, attack
from .errors import ConfigError, InvalidInput, InvariantError
from .experiment import ExperimentConfig, run_experiment
from .mac import R_DEFAULT, build_mac_table1, generate_mac_corpus, mac_attack

EXIT_OK, EXIT_USAGE, EXIT_EXHAUSTED, EXIT_INVARIANT = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


@dataclass
class RunConfig:
    """Merged settings for one subcommand: config-file values overlaid by flags."""

    subcommand: str
    values: dict = field(default_factory=dict)

    def get(self, name, default=None):
        v = self.values.get(name)
        return default if v is None else v

    def int(self, name, default=None, minimum=None):
        v = self.get(name, default)
        if v is None:
            raise ConfigError(f"config field '{name}' is required")
        try:
            v = int(v)
        except (TypeError, ValueError):
            raise ConfigError(f"config field '{name}' must be an integer, got {v!r}") from None
        if minimum is not None and v < minimum:
            raise ConfigError(f"config field '{name}' must be >= {minimum}, got {v}")
        return v

    def choice(self, name, enum_cls, default):
        v = self.get(name, default)
        try:
            return enum_cls(v)
        except ValueError:
            allowed = ", ".join(e.value for e in enum_cls)
            raise ConfigError(f"config field '{name}' must be one of {allowed}; got {v!r}") from None

    def spec(self) -> CipherSpec:
        d = dict(self.get("spec", {}) or {})
        for key in ("family", "block_bits", "key_bits", "rounds"):
            if self.values.get(key) is not None:
                d[key] = self.values[key]
        try:
            return CipherSpec.from_dict(d)
        except (InvalidInput, ValueError) as exc:
            raise ConfigError(f"config field 'spec': {exc}") from None


def _merge(args) -> RunConfig:
    values = {}
    if getattr(args, "config", None):
        values.update(formats.load_json(args.config))
    for k, v in vars(args).items():
        if k in ("config", "func", "command") or v is None:
            continue
        values[k] = v
    return RunConfig(args.command, values)


def _path(rc: RunConfig, name):
    p = rc.get(name)
    if not p:
        raise ConfigError(f"config field '{name}' is required")
    return p


def _emit(rc: RunConfig, report_dict, summary_lines):
    out = rc.get("out")
    if out:
        formats.dump_json(out, report_dict)
    for line in summary_lines:
        print(line)


# ---------------------------------------------------------------------------


def cmd_gen_corpus(args) -> int:
    rc = _merge(args)
    spec = rc.spec()
    kind = rc.get("kind", "block")
    num_keys = rc.int("num_keys", 1, 1)
    per_key = rc.int("pairs_per_key", 256, 3)
    seed = rc.int("seed", 0)
    out, man_path = _path(rc, "out"), _path(rc, "manifest")
    if kind == "mac":
        r = rc.int("r", R_DEFAULT, 0)
        records, manifest = generate_mac_corpus(spec, num_keys, per_key, rc.int("q_max", 8, 1),
                                                seed, r)
        formats.write_mac_corpus(out, records, spec)
    elif kind == "block":
        records, manifest = generate_corpus(spec, num_keys, per_key, seed)
        w = rc.int("w", 0, 0)
        if w:
            frac = float(rc.get("partial_fraction", 0.5))
            kept, observations = obscure(records, manifest, w, frac, seed=seed ^ 0x5A5A)
            records = list(kept)
            w_max = rc.int("w_max", W_MAX, 0)
            for ob in observations:
                records.extend(expand_partial(ob, w_max))
        formats.write_corpus(out, records, spec)
    else:
        raise ConfigError(f"config field 'kind' must be 'block' or 'mac', got {kind!r}")
    formats.write_manifest(man_path, manifest)
    print(f"wrote {len(records)} records to {out}; manifest (ground truth) to {man_path}")
    return EXIT_OK


def _attack_config(rc: RunConfig, spec) -> AttackConfig:
    return AttackConfig(
        spec=spec,
        variant=rc.choice("variant", Variant, "basic"),
        max_iterations=rc.int("max_iterations", 1 << 20, 1),
        a_seed=rc.int("a_seed", 0),
        thread_count=rc.int("threads", 1, 1),
        verification_policy=rc.choice("policy", Policy, "full-bit"),
        check_pairs=rc.int("check_pairs", 2, 1),
        w=rc.int("w", 0, 0),
    )


def _report_lines(report, elapsed_note=True):
    lines = []
    if report.success:
        kk, s = report.outcome
        kw = (report.spec.key_bits + 3) // 4
        lines.append(f"recovered key: k1={kk.k1:0{kw}x} k2={kk.k2:0{kw}x} label={s}")
    else:
        lines.append("no key recovered (iterations exhausted)")
    lines.append(f"iterations: {report.iterations_used} (predicted mean "
                 f"{report.predicted_iterations:.1f})")
    lines.append(f"cipher ops: {report.total_cipher_ops} (predicted {report.predicted_ops:.4g})")
    if elapsed_note:
        lines.append(f"elapsed: {report.elapsed:.2f}s")
    return lines


def cmd_attack(args) -> int:
    rc = _merge(args)
    records, file_spec = formats.read_corpus(_path(rc, "corpus"))
    spec = rc.spec() if (rc.get("spec") or rc.get("family") or rc.get("block_bits")) else file_spec
    manifest = formats.read_manifest(_path(rc, "manifest"))
    cfg = _attack_config(rc, spec)
    report = attack(cfg, build_table1(records, spec), manifest)
    _emit(rc, report.to_dict(), _report_lines(report))
    return EXIT_OK if report.success else EXIT_EXHAUSTED


def cmd_mac_attack(args) -> int:
    rc = _merge(args)
    manifest = formats.read_manifest(_path(rc, "manifest"))
    r = rc.int("r", manifest.r if hasattr(manifest, "r") else R_DEFAULT, 0)
    records, file_spec = formats.read_mac_corpus(_path(rc, "corpus"), r=r)
    spec = rc.spec() if (rc.get("spec") or rc.get("family") or rc.get("block_bits")) else file_spec
    manifest.r = r
    cfg = _attack_config(rc, spec)
    report = mac_attack(cfg, build_mac_table1(records, spec), manifest)
    lines = _report_lines(report)
    lines.append(f"r={r}; chain ops={report.extra['chain_ops']}; "
                 f"max chain cost per hit={report.extra['max_chain_cost_per_hit']}")
    _emit(rc, report.to_dict(), lines)
    return EXIT_OK if report.success else EXIT_EXHAUSTED


def cmd_predict(args) -> int:
    rc = _merge(args)
    if rc.get("n") is not None and rc.get("t") is not None:
        raise ConfigError("give only one of 'n' and 't'")
    n = rc.int("n", None, 1) if rc.get("n") is not None else 1 << rc.int("t", 32, 0)
    k = rc.int("key_bits", 56, 1)
    b = rc.int("block_bits", 64, 1)
    r = rc.int("r", 0, 0) if rc.get("r") is not None else None
    pred = predict_cost(n, k, b, rc.choice("variant", Variant, "basic"), rc.int("w", 0, 0), r)
    d = pred.to_dict()
    d.update({"n": n, "key_bits": k, "block_bits": b, "r": r})
    lines = [
        f"variant: {pred.variant}  n={_fmt(n)}  k={k}  b={b}",
        f"expected iterations: 2^{_fmt_log(pred.log2_iterations)}",
        f"expected cipher ops: 2^{_fmt_log(pred.log2_ops)}",
        f"Table 1 storage: 2^{_fmt_log(pred.log2_storage)} entries",
        f"expected Table 2 size: {float(pred.expected_table2_size):.6g}",
    ]
    lines += [f"warning: {w}" for w in pred.warnings]
    _emit(rc, d, lines)
    return EXIT_OK


def _fmt(n):
    return f"2^{n.bit_length() - 1}" if n & (n - 1) == 0 else f"{n}"


def _fmt_log(x):
    return f"{x}" if isinstance(x, int) else f"{x:.3f}"


def cmd_experiment(args) -> int:
    rc = _merge(args)
    trials = rc.int("trials", 50)
    if trials < 1:
        raise UsageError("experiment: error: --trials must be >= 1")
    cfg = ExperimentConfig(
        spec=rc.spec(),
        kind=rc.get("kind", "block"),
        variant=rc.choice("variant", Variant, "basic"),
        num_keys=rc.int("num_keys", 1, 1),
        pairs_per_key=rc.int("pairs_per_key", 256, 3),
        w=rc.int("w", 0, 0),
        partial_fraction=float(rc.get("partial_fraction", 0.5 if rc.get("w") else 0.0)),
        q_max=rc.int("q_max", 8, 1),
        r=rc.int("r", R_DEFAULT, 0),
        seed=rc.int("seed", 0),
        max_iterations=rc.int("max_iterations", 1 << 20, 1),
        thread_count=rc.int("threads", 1, 1),
        check_pairs=rc.int("check_pairs", 2, 1),
        policy=rc.choice("policy", Policy, "full-bit"),
        oracle=not rc.get("no_oracle", False),
    )
    result = run_experiment(cfg, trials)
    d = result.to_dict()
    d["config"] = {"spec": cfg.spec.to_dict(), "kind": cfg.kind, "variant": cfg.variant.value,
                   "num_keys": cfg.num_keys, "pairs_per_key": cfg.pairs_per_key, "w": cfg.w,
                   "partial_fraction": cfg.partial_fraction, "seed": cfg.seed,
                   "trials": trials}
    lines = [
        f"trials: {result.trials}, successes: {result.successes}",
        f"mean iterations: {result.mean_iterations:.1f} (median {result.median_iterations}), "
        f"predicted {result.predicted_iterations:.1f}, ratio {result.ratio:.3f}",
        f"95% CI for the mean: [{result.ci_low:.1f}, {result.ci_high:.1f}]",
    ]
    _emit(rc, d, lines)
    if rc.get("csv"):
        result.write_csv(rc.get("csv"))
    if rc.get("summary"):
        with open(rc.get("summary"), "w") as fh:
            fh.write("\n".join(lines) + "\n")
    return EXIT_OK


def cmd_verify_cipher(args) -> int:
    from .selfcheck import run_all

    rc = _merge(args)
    results = run_all(samples=rc.int("samples", 10_000, 1), random_des=rc.int("random_des", 1000, 0))
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    if rc.get("out"):
        formats.dump_json(rc.get("out"), [{"check": n, "passed": ok, "detail": d}
                                          for n, ok, d in results])
    return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_INVARIANT


# ---------------------------------------------------------------------------


def _spec_flags(p):
    p.add_argument("--family", choices=["des", "minifeistel"])
    p.add_argument("--block-bits", type=int, dest="block_bits")
    p.add_argument("--key-bits", type=int, dest="key_bits")
    p.add_argument("--rounds", type=int)


def _attack_flags(p):
    p.add_argument("--corpus")
    p.add_argument("--manifest")
    p.add_argument("--variant", choices=[v.value for v in Variant])
    p.add_argument("--max-iterations", type=int, dest="max_iterations")
    p.add_argument("--a-seed", type=int, dest="a_seed")
    p.add_argument("--threads", type=int)
    p.add_argument("--policy", choices=[v.value for v in Policy])
    p.add_argument("--check-pairs", type=int, dest="check_pairs")
    p.add_argument("--w", type=int, help="unknown plaintext bits (for the cost prediction)")
    p.add_argument("--out", help="report file (JSON)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tdea-mitm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("gen-corpus", help="generate a known-plaintext or MAC corpus")
    p.add_argument("--config")
    _spec_flags(p)
    p.add_argument("--kind", choices=["block", "mac"])
    p.add_argument("--num-keys", type=int, dest="num_keys")
    p.add_argument("--pairs-per-key", type=int, dest="pairs_per_key")
    p.add_argument("--seed", type=int)
    p.add_argument("--w", type=int)
    p.add_argument("--w-max", type=int, dest="w_max")
    p.add_argument("--partial-fraction", type=float, dest="partial_fraction")
    p.add_argument("--q-max", type=int, dest="q_max")
    p.add_argument("--r", type=int)
    p.add_argument("--out", required=False)
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_gen_corpus)

    p = sub.add_parser("attack", help="run the meet-in-the-middle attack on a corpus")
    p.add_argument("--config")
    _spec_flags(p)
    _attack_flags(p)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("mac-attack", help="recover a Retail MAC key pair from a MAC corpus")
    p.add_argument("--config")
    _spec_flags(p)
    _attack_flags(p)
    p.add_argument("--r", type=int, help="messages are at most 2^r blocks")
    p.set_defaults(func=cmd_mac_attack)

    p = sub.add_parser("predict", help="analytic cost prediction")
    p.add_argument("--config")
    p.add_argument("--n", type=int)
    p.add_argument("--t", type=int, help="log2 of n")
    p.add_argument("--key-bits", type=int, dest="key_bits")
    p.add_argument("--block-bits", type=int, dest="block_bits")
    p.add_argument("--variant", choices=[v.value for v in Variant])
    p.add_argument("--w", type=int)
    p.add_argument("--r", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("experiment", help="repeated seeded attacks vs. prediction")
    p.add_argument("--config")
    _spec_flags(p)
    p.add_argument("--kind", choices=["block", "mac"])
    p.add_argument("--variant", choices=[v.value for v in Variant])
    p.add_argument("--num-keys", type=int, dest="num_keys")
    p.add_argument("--pairs-per-key", type=int, dest="pairs_per_key")
    p.add_argument("--w", type=int)
    p.add_argument("--partial-fraction", type=float, dest="partial_fraction")
    p.add_argument("--q-max", type=int, dest="q_max")
    p.add_argument("--r", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--max-iterations", type=int, dest="max_iterations")
    p.add_argument("--threads", type=int)
    p.add_argument("--check-pairs", type=int, dest="check_pairs")
    p.add_argument("--policy", choices=[v.value for v in Policy])
    p.add_argument("--no-oracle", action="store_true", default=None, dest="no_oracle")
    p.add_argument("--out")
    p.add_argument("--csv")
    p.add_argument("--summary")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("verify-cipher", help="DES known answers and complementation checks")
    p.add_argument("--config")
    p.add_argument("--samples", type=int)
    p.add_argument("--random-des", type=int, dest="random_des")
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify_cipher)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, InvalidInput) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvariantError as exc:
        print(f"invariant failure: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
