"""Monte Carlo verification of the operator's expected-loss identities.

On synthetic embeddings whose entries are i.i.d. with zero mean and unit
variance (so dimensions are standardized and uncorrelated, and word
pairs are relationally independent), the expected difference between the
positive- and negative-set losses does not depend on the interaction
tensor, and with the tensor at zero the positive-term expectation has
the closed form 2 (tr P^T P + tr Q^T Q).  This module estimates those
quantities by seeded Monte Carlo sampling and reports pass/fail at
3-sigma thresholds.

Sampling is chunked with one spawned substream per fixed-size chunk and
merged by exact count-weighted averaging, so estimates do not depend on
the number of worker threads.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bilinear import BilinearOperator, compose_many, operator_digest
from .embeddings import EmbeddingMatrix
from .errors import DimensionMismatchError, RelcompError
from .training import RelationGroup

PAIR_INDEPENDENT = "independent"
PAIR_IDENTICAL_TAIL = "identical-tail"
DIST_NORMAL = "standard-normal"
DIST_RADEMACHER = "rademacher"

CHUNK_SIZE = 8192
LOW_POWER_MIN_SAMPLES = 1000


@dataclass(frozen=True)
class SamplerSpec:
    """How synthetic word-pair quadruples (h, t, h', t') are drawn.

    ``pair_coupling`` controls the within-pair relationship: independent
    tails, or tails identical to heads (t = h), which probes the regime
    of perfect within-pair dimension correlation.  Pairs are always
    independent of each other.
    """

    d: int
    pair_coupling: str = PAIR_INDEPENDENT
    cross_pair_coupling: str = "independent"
    distribution: str = DIST_NORMAL
    seed: int = 0

    def __post_init__(self):
        if self.d < 1:
            raise RelcompError("sampler dimension must be >= 1")
        if self.pair_coupling not in (PAIR_INDEPENDENT, PAIR_IDENTICAL_TAIL):
            raise RelcompError(f"unknown pair coupling: {self.pair_coupling!r}")
        if self.cross_pair_coupling != "independent":
            raise RelcompError("cross-pair coupling must be 'independent'")
        if self.distribution not in (DIST_NORMAL, DIST_RADEMACHER):
            raise RelcompError(f"unknown distribution: {self.distribution!r}")

    def describe(self) -> dict:
        return {
            "d": self.d,
            "pair_coupling": self.pair_coupling,
            "cross_pair_coupling": self.cross_pair_coupling,
            "distribution": self.distribution,
            "seed": self.seed,
        }


@dataclass
class MonteCarloReport:
    """A point estimate with its standard error and provenance."""

    estimate: float
    std_error: float
    n_samples: int
    sampler: dict
    operator_digest: str

    def __post_init__(self):
        if self.std_error < 0:
            raise RelcompError("standard error must be nonnegative")
        if self.n_samples < 2:
            raise RelcompError("need at least 2 samples")

    def to_dict(self) -> dict:
        return {
            "estimate": self.estimate,
            "std_error": self.std_error,
            "n": self.n_samples,
            "sampler": self.sampler,
            "operator_digest": self.operator_digest,
        }


def _draw_entries(rng, shape, distribution):
    if distribution == DIST_NORMAL:
        return rng.standard_normal(shape)
    return rng.integers(0, 2, size=shape).astype(np.float64) * 2.0 - 1.0


def sample_quadruples(spec: SamplerSpec, n: int, rng) -> tuple:
    """Draw n quadruples (H, T, Hp, Tp) as (n, d) arrays."""
    h = _draw_entries(rng, (n, spec.d), spec.distribution)
    if spec.pair_coupling == PAIR_IDENTICAL_TAIL:
        hp = _draw_entries(rng, (n, spec.d), spec.distribution)
        return h, h.copy(), hp, hp.copy()
    t = _draw_entries(rng, (n, spec.d), spec.distribution)
    hp = _draw_entries(rng, (n, spec.d), spec.distribution)
    tp = _draw_entries(rng, (n, spec.d), spec.distribution)
    return h, t, hp, tp


def synth_embeddings(m: int, d: int, distribution: str = DIST_NORMAL, seed: int = 0) -> EmbeddingMatrix:
    """An m-word embedding matrix with i.i.d. zero-mean unit-variance entries."""
    if m < 2:
        raise RelcompError("need at least 2 words")
    rng = np.random.default_rng(seed)
    vectors = _draw_entries(rng, (m, d), distribution)
    vocab = [f"w{i}" for i in range(m)]
    return EmbeddingMatrix(vocab=vocab, vectors=vectors, standardized=False)


def synth_offset_relations(
    m: int, d: int, n_relations: int, noise_scale: float = 0.0, seed: int = 0
) -> tuple[EmbeddingMatrix, list[RelationGroup]]:
    """Synthetic relation groups where the vector offset is optimal by
    construction: each relation r draws an offset v_r, heads are i.i.d.
    standard normal, and tails are t = h + v_r + noise.

    ``m`` is the number of pairs per relation.  Words are named
    ``r{i}_p{j}_h`` and ``r{i}_p{j}_t``.
    """
    if n_relations < 2:
        raise RelcompError("need at least 2 relations")
    if m < 1:
        raise RelcompError("need at least 1 pair per relation")
    rng = np.random.default_rng(seed)
    offsets = rng.standard_normal((n_relations, d))
    vocab = []
    rows = []
    groups = []
    for ri in range(n_relations):
        pairs = []
        for pj in range(m):
            head = rng.standard_normal(d)
            noise = noise_scale * rng.standard_normal(d)
            tail = head + offsets[ri] + noise
            head_word = f"r{ri}_p{pj}_h"
            tail_word = f"r{ri}_p{pj}_t"
            vocab.extend([head_word, tail_word])
            rows.extend([head, tail])
            pairs.append((head_word, tail_word))
        groups.append(RelationGroup(relation_id=f"r{ri}", pairs=pairs))
    emb = EmbeddingMatrix(vocab=vocab, vectors=np.array(rows), standardized=False)
    return emb, groups


def _chunk_stats(op, spec, size, seed_seq):
    rng = np.random.default_rng(seed_seq)
    h, t, hp, tp = sample_quadruples(spec, size, rng)
    delta = compose_many(op, h, t) - compose_many(op, hp, tp)
    losses = np.sum(delta * delta, axis=1)
    return float(np.sum(losses)), float(np.sum(losses * losses))


def _loss_mean_se(op, spec, n, seed_seq, threads=1):
    # fixed chunking + in-order merge keeps the result independent of the
    # worker count
    sizes = [CHUNK_SIZE] * (n // CHUNK_SIZE)
    if n % CHUNK_SIZE:
        sizes.append(n % CHUNK_SIZE)
    children = seed_seq.spawn(len(sizes))
    if threads > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            partials = list(
                pool.map(lambda args: _chunk_stats(op, spec, *args), zip(sizes, children))
            )
    else:
        partials = [
            _chunk_stats(op, spec, size, child) for size, child in zip(sizes, children)
        ]
    total = 0.0
    total_sq = 0.0
    for part_sum, part_sumsq in partials:
        total += part_sum
        total_sq += part_sumsq
    mean = total / n
    variance = max(0.0, (total_sq - n * mean * mean) / (n - 1))
    return mean, float(np.sqrt(variance / n))


def mc_expected_positive_loss(
    op: BilinearOperator, sampler: SamplerSpec, n: int, threads: int = 1
) -> MonteCarloReport:
    """Estimate the expected squared relational distance between two
    freshly drawn word pairs; the standard error is sample sd / sqrt(n)."""
    if n < 2:
        raise RelcompError("need at least 2 samples")
    if op.d != sampler.d:
        raise DimensionMismatchError(
            f"operator dimension {op.d} does not match sampler ({sampler.d})"
        )
    mean, se = _loss_mean_se(op, sampler, n, np.random.SeedSequence(sampler.seed), threads)
    return MonteCarloReport(
        estimate=mean,
        std_error=se,
        n_samples=n,
        sampler=sampler.describe(),
        operator_digest=operator_digest(op),
    )


def _difference_estimate(op, spec, n, ss_pos, ss_neg, threads=1):
    pos_mean, pos_se = _loss_mean_se(op, spec, n, ss_pos, threads)
    neg_mean, neg_se = _loss_mean_se(op, spec, n, ss_neg, threads)
    diff = pos_mean - neg_mean
    diff_se = float(np.sqrt(pos_se**2 + neg_se**2))
    return diff, diff_se, pos_mean, pos_se


def _within(value, scale, sigmas):
    if scale == 0.0:
        return value == 0.0
    return abs(value) <= sigmas * scale


@dataclass
class IndependenceCheckReport:
    """Difference-of-expected-loss estimates across random tensor draws.

    The check passes when every pairwise difference of estimates lies
    within 3 combined standard errors (the estimates are statistically
    indistinguishable).  The raw positive-term estimates are also kept:
    that is where a dependence on the tensor would be visible.
    """

    estimates: list[float]
    std_errors: list[float]
    positive_estimates: list[float]
    positive_std_errors: list[float]
    max_pairwise_deviation: float
    max_pairwise_z: float
    max_abs_z_vs_zero: float
    pairwise_pass: bool
    zero_pass: bool
    passed: bool
    low_power: bool
    n: int
    n_operators: int
    a_scale: float
    sampler: dict
    operator_digests: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "estimates": self.estimates,
            "std_errors": self.std_errors,
            "positive_estimates": self.positive_estimates,
            "positive_std_errors": self.positive_std_errors,
            "max_pairwise_deviation": self.max_pairwise_deviation,
            "max_pairwise_z": self.max_pairwise_z,
            "max_abs_z_vs_zero": self.max_abs_z_vs_zero,
            "pairwise_pass": self.pairwise_pass,
            "zero_pass": self.zero_pass,
            "pass": self.passed,
            "low_power": self.low_power,
            "n": self.n,
            "n_operators": self.n_operators,
            "a_scale": self.a_scale,
            "sampler": self.sampler,
        }


def tensor_independence_check(
    P,
    Q,
    sampler: SamplerSpec,
    n: int,
    n_operators: int,
    a_scale: float,
    seed: int,
    threads: int = 1,
) -> IndependenceCheckReport:
    """Check that the positive-minus-negative expected loss does not
    depend on the interaction tensor.

    ``n_operators`` tensors with entries uniform in [-a_scale, a_scale]
    are drawn from ``seed``; for each, the difference of the two loss
    expectations is estimated from fresh positive and negative sample
    sets drawn from the same ``sampler`` distribution.  Passes when all
    estimates agree pairwise within 3 combined standard errors.  Small n
    only widens the intervals, so the report carries a low-power flag
    instead of failing spuriously.
    """
    if n_operators < 2:
        raise RelcompError("need at least 2 operator draws")
    P = np.asarray(P, dtype=np.float64)
    Q = np.asarray(Q, dtype=np.float64)
    if P.shape != (sampler.d, sampler.d) or Q.shape != P.shape:
        raise DimensionMismatchError("P and Q must be (d, d) matching the sampler")
    op_rng = np.random.default_rng(seed)
    sample_children = np.random.SeedSequence(sampler.seed).spawn(2 * n_operators)

    estimates, std_errors, pos_means, pos_ses, digests = [], [], [], [], []
    for i in range(n_operators):
        tensor = op_rng.uniform(-a_scale, a_scale, size=(sampler.d,) * 3)
        op = BilinearOperator.general(tensor, P, Q)
        diff, diff_se, pos_mean, pos_se = _difference_estimate(
            op, sampler, n, sample_children[2 * i], sample_children[2 * i + 1], threads
        )
        estimates.append(diff)
        std_errors.append(diff_se)
        pos_means.append(pos_mean)
        pos_ses.append(pos_se)
        digests.append(operator_digest(op))

    max_dev = 0.0
    max_z = 0.0
    pairwise_pass = True
    for i in range(n_operators):
        for j in range(i + 1, n_operators):
            dev = abs(estimates[i] - estimates[j])
            scale = float(np.sqrt(std_errors[i] ** 2 + std_errors[j] ** 2))
            max_dev = max(max_dev, dev)
            if scale == 0.0:
                ok = dev == 0.0
                z = 0.0 if ok else np.inf
            else:
                z = dev / scale
                ok = z <= 3.0
            max_z = max(max_z, z)
            pairwise_pass = pairwise_pass and ok

    zero_pass = True
    max_abs_z0 = 0.0
    for est, se in zip(estimates, std_errors):
        if se == 0.0:
            ok = est == 0.0
            z0 = 0.0 if ok else np.inf
        else:
            z0 = abs(est) / se
            ok = z0 <= 3.0
        max_abs_z0 = max(max_abs_z0, z0)
        zero_pass = zero_pass and ok

    return IndependenceCheckReport(
        estimates=estimates,
        std_errors=std_errors,
        positive_estimates=pos_means,
        positive_std_errors=pos_ses,
        max_pairwise_deviation=max_dev,
        max_pairwise_z=float(max_z),
        max_abs_z_vs_zero=float(max_abs_z0),
        pairwise_pass=pairwise_pass,
        zero_pass=zero_pass,
        passed=pairwise_pass,
        low_power=n < LOW_POWER_MIN_SAMPLES,
        n=n,
        n_operators=n_operators,
        a_scale=a_scale,
        sampler=sampler.describe(),
        operator_digests=digests,
    )


@dataclass
class ZeroLossCheckReport:
    """Difference of the positive and negative expected-loss estimates for
    a tensor-free operator; passes when the difference is within 3 sigma
    of zero."""

    report: MonteCarloReport
    positive_estimate: float
    negative_estimate: float
    passed: bool
    low_power: bool

    def to_dict(self) -> dict:
        out = self.report.to_dict()
        out.update(
            {
                "positive_estimate": self.positive_estimate,
                "negative_estimate": self.negative_estimate,
                "pass": self.passed,
                "low_power": self.low_power,
            }
        )
        return out


def zero_expected_loss_check(
    P, Q, sampler: SamplerSpec, n: int, threads: int = 1
) -> ZeroLossCheckReport:
    """With the tensor at zero, the positive and negative expected losses
    coincide; estimate their difference and test it against 3 sigma."""
    P = np.asarray(P, dtype=np.float64)
    Q = np.asarray(Q, dtype=np.float64)
    if P.shape != (sampler.d, sampler.d) or Q.shape != P.shape:
        raise DimensionMismatchError("P and Q must be (d, d) matching the sampler")
    op = BilinearOperator.general(np.zeros((sampler.d,) * 3), P, Q)
    ss_pos, ss_neg = np.random.SeedSequence(sampler.seed).spawn(2)
    diff, diff_se, pos_mean, _ = _difference_estimate(op, sampler, n, ss_pos, ss_neg, threads)
    report = MonteCarloReport(
        estimate=diff,
        std_error=diff_se,
        n_samples=n,
        sampler=sampler.describe(),
        operator_digest=operator_digest(op),
    )
    return ZeroLossCheckReport(
        report=report,
        positive_estimate=pos_mean,
        negative_estimate=pos_mean - diff,
        passed=_within(diff, diff_se, 3.0),
        low_power=n < LOW_POWER_MIN_SAMPLES,
    )


def closed_form_positive_loss(P, Q) -> float:
    """Analytic positive-term expectation for a tensor-free operator under
    fully independent standardized sampling: 2 (tr P^T P + tr Q^T Q)."""
    P = np.asarray(P, dtype=np.float64)
    Q = np.asarray(Q, dtype=np.float64)
    return float(2.0 * (np.trace(P.T @ P) + np.trace(Q.T @ Q)))


def _derived_seed(master: int, index: int) -> int:
    return int(np.random.SeedSequence([master, index]).generate_state(1, np.uint64)[0])


DEFAULT_VERIFY_CONFIG = {
    "seed": 0,
    "independence_dim": 10,
    "independence_n": 50_000,
    "n_operators": 20,
    "a_scale": 1.0,
    "closed_form_dim": 5,
    "closed_form_n": 100_000,
    "pq_draws": 5,
    "zero_loss_dim": 10,
    "zero_loss_n": 50_000,
    "probe_n": 50_000,
}


def run_verification_manifest(
    config: dict | None = None, threads: int = 1, strict: bool = False
) -> dict:
    """Run the full battery of Monte Carlo checks with fixed seeds.

    Returns a manifest dict with one entry per check (estimate, standard
    error, sample count, sampler, operator digest, pass flag) and an
    overall ``pass``.  Informational probes never gate.  With ``strict``
    every gating check is re-run once with a second derived seed and the
    replicas must pass as well.
    """
    cfg = dict(DEFAULT_VERIFY_CONFIG)
    if config:
        unknown = set(config) - set(cfg)
        if unknown:
            raise RelcompError(f"unknown verification config keys: {sorted(unknown)}")
        cfg.update(config)
    for key, value in cfg.items():
        if key == "a_scale":
            if not isinstance(value, (int, float)) or value < 0:
                raise RelcompError("a_scale must be a nonnegative number")
        elif not isinstance(value, int) or isinstance(value, bool) or value < 0:
            raise RelcompError(f"verification config {key} must be a nonnegative integer")

    checks = []
    warnings = []

    def run_battery(master_seed, label_suffix=""):
        battery = []

        # difference-of-losses independence from the tensor, both distributions
        for dist_idx, distribution in enumerate((DIST_NORMAL, DIST_RADEMACHER)):
            d = cfg["independence_dim"]
            identity = np.eye(d)
            spec = SamplerSpec(
                d=d,
                distribution=distribution,
                seed=_derived_seed(master_seed, 10 + dist_idx),
            )
            rep = tensor_independence_check(
                identity,
                -identity,
                spec,
                n=cfg["independence_n"],
                n_operators=cfg["n_operators"],
                a_scale=cfg["a_scale"],
                seed=_derived_seed(master_seed, 20 + dist_idx),
                threads=threads,
            )
            if rep.low_power:
                warnings.append(
                    f"tensor_independence_{distribution}{label_suffix}: "
                    f"low power (n={rep.n})"
                )
            entry = {
                "check": f"tensor_independence_{distribution}{label_suffix}",
                "sampler": rep.sampler,
                "operator_digest": rep.operator_digests[0],
                "estimate": max(rep.estimates, key=abs),
                "std_error": max(rep.std_errors),
                "n": rep.n,
                "pass": rep.pairwise_pass and rep.zero_pass,
                "gating": True,
                "detail": rep.to_dict(),
            }
            battery.append(entry)

        # closed-form positive-term expectation, identity P/Q then random draws
        d = cfg["closed_form_dim"]
        pq_rng = np.random.default_rng(_derived_seed(master_seed, 30))
        pq_list = [(np.eye(d), -np.eye(d), "pairdiff")]
        for i in range(cfg["pq_draws"]):
            pq_list.append(
                (pq_rng.standard_normal((d, d)), pq_rng.standard_normal((d, d)), f"random_pq_{i}")
            )
        for idx, (P, Q, label) in enumerate(pq_list):
            spec = SamplerSpec(d=d, seed=_derived_seed(master_seed, 40 + idx))
            op = BilinearOperator.general(np.zeros((d, d, d)), P, Q)
            rep = mc_expected_positive_loss(op, spec, cfg["closed_form_n"], threads)
            analytic = closed_form_positive_loss(P, Q)
            ok = _within(rep.estimate - analytic, rep.std_error, 5.0)
            battery.append(
                {
                    "check": f"closed_form_{label}{label_suffix}",
                    "sampler": rep.sampler,
                    "operator_digest": rep.operator_digest,
                    "estimate": rep.estimate,
                    "std_error": rep.std_error,
                    "n": rep.n_samples,
                    "pass": ok,
                    "gating": True,
                    "analytic": analytic,
                }
            )

        # zero expected total loss for tensor-free operators
        d = cfg["zero_loss_dim"]
        zero_rng = np.random.default_rng(_derived_seed(master_seed, 60))
        zero_list = [
            (np.eye(d), -np.eye(d), "pairdiff"),
            (zero_rng.standard_normal((d, d)), zero_rng.standard_normal((d, d)), "random_pq"),
        ]
        for idx, (P, Q, label) in enumerate(zero_list):
            spec = SamplerSpec(d=d, seed=_derived_seed(master_seed, 70 + idx))
            rep = zero_expected_loss_check(P, Q, spec, cfg["zero_loss_n"], threads)
            if rep.low_power:
                warnings.append(f"zero_expected_loss_{label}{label_suffix}: low power")
            entry = rep.to_dict()
            entry.update(
                {"check": f"zero_expected_loss_{label}{label_suffix}", "gating": True}
            )
            battery.append(entry)
        return battery

    checks.extend(run_battery(cfg["seed"]))

    # informational: positive-term estimate under both pair couplings for a
    # random tensor; the discrepancy quantifies how much the within-pair
    # coupling matters for the positive term alone
    d = cfg["independence_dim"]
    probe_rng = np.random.default_rng(_derived_seed(cfg["seed"], 80))
    tensor = probe_rng.uniform(-cfg["a_scale"], cfg["a_scale"], size=(d, d, d))
    probe_op = BilinearOperator.general(tensor, np.eye(d), -np.eye(d))
    probe_reports = {}
    for idx, coupling in enumerate((PAIR_INDEPENDENT, PAIR_IDENTICAL_TAIL)):
        spec = SamplerSpec(
            d=d, pair_coupling=coupling, seed=_derived_seed(cfg["seed"], 90 + idx)
        )
        rep = mc_expected_positive_loss(probe_op, spec, cfg["probe_n"], threads)
        probe_reports[coupling] = rep
        checks.append(
            {
                "check": f"coupling_probe_{coupling}",
                "sampler": rep.sampler,
                "operator_digest": rep.operator_digest,
                "estimate": rep.estimate,
                "std_error": rep.std_error,
                "n": rep.n_samples,
                "pass": True,
                "gating": False,
            }
        )
    checks[-1]["coupling_discrepancy"] = (
        probe_reports[PAIR_IDENTICAL_TAIL].estimate
        - probe_reports[PAIR_INDEPENDENT].estimate
    )

    if strict:
        checks.extend(run_battery(_derived_seed(cfg["seed"], 997), label_suffix="_replica"))

    overall = all(entry["pass"] for entry in checks if entry.get("gating"))
    return {
        "pass": overall,
        "strict": strict,
        "config": cfg,
        "warnings": warnings,
        "checks": checks,
    }


def write_manifest(manifest: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
