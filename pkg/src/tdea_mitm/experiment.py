"""Repeated seeded attack runs compared against the analytic model."""

from __future__ import annotations

import csv
import random
import statistics
from dataclasses import asdict, dataclass, field
from typing import Optional

from scipy import stats

from .analysis import ORACLE_MAX_KEY_BITS, brute_force_oracle, predict_cost
from .cipher import CipherSpec
from .corpus import W_MAX, build_table1, expand_partial, generate_corpus, obscure
from .engine import AttackConfig, Policy, Variant, attack
from .errors import ConfigError, InvariantError
from .mac import R_DEFAULT, build_mac_table1, generate_mac_corpus, mac_attack, retail_mac


@dataclass
class ExperimentConfig:
    spec: CipherSpec = field(default_factory=CipherSpec.mini)
    kind: str = "block"            # "block" or "mac"
    variant: Variant = Variant.BASIC
    num_keys: int = 1
    pairs_per_key: int = 256
    w: int = 0                     # unknown plaintext bits per partial observation
    partial_fraction: float = 0.0
    w_max: int = W_MAX
    q_max: int = 8
    r: int = R_DEFAULT
    seed: int = 0
    max_iterations: int = 1 << 20
    thread_count: int = 1
    check_pairs: int = 2
    policy: Policy = Policy.FULL
    oracle: bool = True

    def __post_init__(self):
        self.variant = Variant(self.variant)
        self.policy = Policy(self.policy)
        if self.kind not in ("block", "mac"):
            raise ConfigError(f"kind must be 'block' or 'mac', got {self.kind!r}")
        if self.w and self.kind == "mac":
            raise ConfigError("partial observations are only generated for block corpora")


@dataclass
class TrialResult:
    trial: int
    corpus_seed: int
    a_seed: int
    success: bool
    iterations: int
    cipher_ops: int
    ops_per_iteration: float
    label: Optional[int]
    matches_truth: bool
    oracle_confirmed: Optional[bool]
    table1_entries: int
    max_midpoint_cost: int
    max_q: int = 0


@dataclass
class ExperimentResult:
    trials: int
    iterations: list
    successes: int
    mean_iterations: float
    median_iterations: float
    predicted_iterations: float
    ratio: float
    ci_low: float
    ci_high: float
    per_trial: list = field(default_factory=list)
    prediction: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["trial", "iterations", "cipher_ops", "success", "label"])
            for t in self.per_trial:
                wr.writerow([t.trial, t.iterations, t.cipher_ops, int(t.success), t.label])


def mean_ci(samples, confidence=0.95):
    """CI for the mean of exponential-like counts via the chi-square pivot."""
    n = len(samples)
    total = sum(samples)
    alpha = 1 - confidence
    lo = 2 * total / stats.chi2.ppf(1 - alpha / 2, 2 * n)
    hi = 2 * total / stats.chi2.ppf(alpha / 2, 2 * n)
    return lo, hi


def compare_iterations(a, b) -> float:
    """Two-sided Mann-Whitney U p-value for equal location of two count samples."""
    return float(stats.mannwhitneyu(a, b, alternative="two-sided").pvalue)


def trial_seeds(seed: int, trials: int):
    rng = random.Random(seed)
    return [(rng.getrandbits(63), rng.getrandbits(63)) for _ in range(trials)]


def _attack_config(cfg: ExperimentConfig, a_seed):
    return AttackConfig(cfg.spec, cfg.variant, cfg.max_iterations, a_seed, cfg.thread_count,
                        cfg.policy, cfg.check_pairs, w=cfg.w)


def _block_trial(cfg, t, corpus_seed, a_seed):
    spec = cfg.spec
    records, manifest = generate_corpus(spec, cfg.num_keys, cfg.pairs_per_key, corpus_seed)
    genuine = records
    if cfg.w and cfg.partial_fraction:
        genuine, observations = obscure(records, manifest, cfg.w, cfg.partial_fraction,
                                        seed=corpus_seed ^ 0x5A5A)
        records = list(genuine)
        for ob in observations:
            records.extend(expand_partial(ob, cfg.w_max))
    t1 = build_table1(records, spec)
    report = attack(_attack_config(cfg, a_seed), t1, manifest)
    label = confirmed = None
    matches = False
    if report.success:
        kk, label = report.outcome
        matches = manifest.keys[label] == kk
        if cfg.oracle and 2 * spec.key_bits <= ORACLE_MAX_KEY_BITS:
            own = [r for r in genuine if r.s == label][:4]
            confirmed = kk in brute_force_oracle(own, spec)
            if not confirmed:
                raise InvariantError(f"trial {t}: recovered key {kk} rejected by the oracle")
    return report, TrialResult(t, corpus_seed, a_seed, report.success, report.iterations_used,
                               report.total_cipher_ops,
                               report.total_cipher_ops / max(1, report.iterations_used),
                               label, matches, confirmed, report.table1_entries,
                               report.max_midpoint_cost)


def _mac_trial(cfg, t, corpus_seed, a_seed):
    spec = cfg.spec
    records, manifest = generate_mac_corpus(spec, cfg.num_keys, cfg.pairs_per_key, cfg.q_max,
                                            corpus_seed, cfg.r)
    t1 = build_mac_table1(records, spec)
    report = mac_attack(_attack_config(cfg, a_seed), t1, manifest)
    label = confirmed = None
    matches = False
    if report.success:
        kk, label = report.outcome
        matches = manifest.keys[label] == kk
        confirmed = all(retail_mac(spec, kk, r.msg) == r.m for r in records if r.s == label)
        if not confirmed:
            raise InvariantError(f"trial {t}: recovered MAC key {kk} fails its label's records")
    return report, TrialResult(t, corpus_seed, a_seed, report.success, report.iterations_used,
                               report.total_cipher_ops,
                               report.total_cipher_ops / max(1, report.iterations_used),
                               label, matches, confirmed, report.table1_entries,
                               report.max_midpoint_cost, report.extra["max_q"])


def run_experiment(cfg: ExperimentConfig, trials: int, progress=None) -> ExperimentResult:
    """Run ``trials`` independent seeded attacks and summarise iteration counts."""
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    per_trial, reports = [], []
    runner = _mac_trial if cfg.kind == "mac" else _block_trial
    for t, (cs, a_seed) in enumerate(trial_seeds(cfg.seed, trials)):
        report, res = runner(cfg, t, cs, a_seed)
        per_trial.append(res)
        reports.append(report)
        if progress:
            progress(res)
    n = reports[0].n
    pred = predict_cost(n, cfg.spec.key_bits, cfg.spec.block_bits, cfg.variant, w=cfg.w,
                        r=cfg.r if cfg.kind == "mac" else None)
    its = [r.iterations for r in per_trial]
    mean = statistics.fmean(its)
    lo, hi = mean_ci(its)
    predicted = float(pred.expected_iterations)
    return ExperimentResult(trials, its, sum(r.success for r in per_trial), mean,
                            statistics.median(its), predicted, mean / predicted, lo, hi,
                            per_trial, pred.to_dict())
