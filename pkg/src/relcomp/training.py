"""Analogy-instance generation and operator fitting.

Positive instances pair word-pairs that share a relation group; negative
instances pair each word-pair with pairs from other groups, either
uniformly or as hard negatives (smallest vector-offset distance within a
random candidate pool).  The operator is fitted by mini-batch AdaGrad on
the signed squared-distance loss, with a Frobenius penalty on the
interaction tensor and P, Q constrained to p*I, q*I unless full-matrix
fitting is explicitly requested.
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bilinear import (
    DIAGONAL,
    BilinearOperator,
    compose_many,
    frobenius_norm_A,
    relational_distance_sq,
)
from .embeddings import EmbeddingMatrix
from .errors import (
    DataError,
    DimensionMismatchError,
    DivergenceError,
    RelcompError,
    UnsupportedModeError,
)

logger = logging.getLogger(__name__)

UNIFORM = "uniform"
NEAREST_IN_POOL = "nearest-in-pool"

TRACE_CSV_HEADER = "epoch,loss,frob_A,p,q,sat_acc,maxdiff_acc,seconds"


@dataclass
class RelationGroup:
    """A named relation with its (head, tail) word pairs."""

    relation_id: str
    pairs: list[tuple[str, str]]

    def __post_init__(self):
        self.pairs = [(str(h), str(t)) for h, t in self.pairs]
        if not self.pairs:
            raise DataError(f"relation {self.relation_id!r} has no pairs")
        if len(set(self.pairs)) != len(self.pairs):
            raise DataError(f"relation {self.relation_id!r} has duplicate pairs")


@dataclass(eq=False)
class AnalogyInstance:
    """A labeled quadruple ((h, t), (h', t')) with sign +1/-1.

    Positive instances come from a single relation group
    (source == contrast); negatives pair word-pairs from two different
    groups.
    """

    h: np.ndarray
    t: np.ndarray
    h_prime: np.ndarray
    t_prime: np.ndarray
    sign: int
    source_relation: str
    contrast_relation: str

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise DataError(f"sign must be +1 or -1, got {self.sign}")
        same = self.source_relation == self.contrast_relation
        if (self.sign == 1) != same:
            raise DataError(
                "positive instances must keep source == contrast relation "
                "and negatives must not"
            )


@dataclass
class TrainingConfig:
    """Knobs for instance generation and AdaGrad fitting."""

    epochs: int
    learning_rate: float = 0.01
    lambda_A: float = 0.01
    negatives_per_pair: int = 10
    negative_strategy: str = NEAREST_IN_POOL
    candidate_pool: int = 50
    seed: int = 0
    init_range: tuple[float, float] = (-1.0, 1.0)
    adagrad_epsilon: float = 1e-8
    batch_size: int = 64
    max_positives_per_group: int | None = None
    allow_unstandardized: bool = False
    full_pq: bool = False

    def __post_init__(self):
        lo, hi = self.init_range
        checks = [
            (self.epochs >= 0, "epochs must be >= 0"),
            (self.learning_rate > 0, "learning_rate must be positive"),
            (self.lambda_A >= 0, "lambda_A must be nonnegative"),
            (self.negatives_per_pair > 0, "negatives_per_pair must be positive"),
            (
                self.negative_strategy in (UNIFORM, NEAREST_IN_POOL),
                f"unknown negative_strategy: {self.negative_strategy!r}",
            ),
            (self.candidate_pool > 0, "candidate_pool must be positive"),
            (self.seed >= 0, "seed must be a nonnegative integer"),
            (lo < hi, "init_range must satisfy lo < hi"),
            (self.adagrad_epsilon > 0, "adagrad_epsilon must be positive"),
            (self.batch_size > 0, "batch_size must be positive"),
            (
                self.max_positives_per_group is None
                or self.max_positives_per_group > 0,
                "max_positives_per_group must be positive when set",
            ),
        ]
        for ok, msg in checks:
            if not ok:
                raise RelcompError(msg)
        self.init_range = (float(lo), float(hi))


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    frob_A: float
    p: float
    q: float
    sat_acc: float | None = None
    maxdiff_acc: float | None = None
    seconds: float | None = None


@dataclass
class TrainingTrace:
    """Per-epoch history of mean loss, ||A||_F, p, q, and optional scores."""

    records: list[EpochRecord] = field(default_factory=list)

    def append(self, record: EpochRecord) -> None:
        if self.records and record.epoch <= self.records[-1].epoch:
            raise RelcompError("epoch indices must be strictly increasing")
        self.records.append(record)

    def losses(self) -> np.ndarray:
        return np.array([r.loss for r in self.records])

    def frobenius_norms(self) -> np.ndarray:
        return np.array([r.frob_A for r in self.records])

    def write_csv(self, path, include_timings: bool = False) -> None:
        """Write the plot-ready trace; timing values are omitted by default
        so that reruns with the same seed produce byte-identical files."""

        def fmt(value):
            return "" if value is None else repr(float(value))

        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(TRACE_CSV_HEADER + "\n")
            for r in self.records:
                seconds = fmt(r.seconds) if include_timings else ""
                fh.write(
                    f"{r.epoch},{fmt(r.loss)},{fmt(r.frob_A)},{fmt(r.p)},{fmt(r.q)},"
                    f"{fmt(r.sat_acc)},{fmt(r.maxdiff_acc)},{seconds}\n"
                )


def load_relation_groups(path) -> list[RelationGroup]:
    """Read relation groups from a directory (one file per relation, lines
    ``head TAB tail``, file stem = relation id) or a JSONL file with
    ``{"relation", "head", "tail"}`` records.

    Duplicate pairs within a group are dropped with a warning.
    """
    p = Path(path)
    if p.is_dir():
        files = sorted(
            f for f in p.iterdir() if f.is_file() and not f.name.startswith(".")
        )
        if not files:
            raise DataError(f"no relation files in directory {p}")
        return [_load_group_file(f) for f in files]
    if not p.is_file():
        raise DataError(f"relation-group path does not exist: {p}")
    return _load_groups_jsonl(p)


def _load_group_file(path: Path) -> RelationGroup:
    pairs: list[tuple[str, str]] = []
    seen: set[tuple[str, str]] = set()
    dropped = 0
    with open(path, "r", encoding="utf-8") as fh:
        for number, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0] or not parts[1]:
                raise DataError(
                    f"{path.name} line {number}: expected 'head<TAB>tail', got {line!r}"
                )
            pair = (parts[0], parts[1])
            if pair in seen:
                dropped += 1
                continue
            seen.add(pair)
            pairs.append(pair)
    if dropped:
        logger.warning("%s: dropped %d duplicate pairs", path.name, dropped)
    if not pairs:
        raise DataError(f"{path.name}: no pairs")
    return RelationGroup(relation_id=path.stem, pairs=pairs)


def _load_groups_jsonl(path: Path) -> list[RelationGroup]:
    by_relation: dict[str, list[tuple[str, str]]] = {}
    seen: set[tuple[str, str, str]] = set()
    dropped = 0
    with open(path, "r", encoding="utf-8") as fh:
        for number, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                rec = json.loads(raw)
                rel, head, tail = rec["relation"], rec["head"], rec["tail"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise DataError(f"{path.name} line {number}: {exc}") from None
            key = (rel, head, tail)
            if key in seen:
                dropped += 1
                continue
            seen.add(key)
            by_relation.setdefault(rel, []).append((head, tail))
    if dropped:
        logger.warning("%s: dropped %d duplicate records", path.name, dropped)
    if not by_relation:
        raise DataError(f"{path.name}: no relation records")
    return [RelationGroup(rel, pairs) for rel, pairs in by_relation.items()]


def _combination_count(n: int) -> int:
    return n * (n - 1) // 2


def _decode_combination(k: int, n: int) -> tuple[int, int]:
    # lexicographic rank -> (i, j) with i < j, without materializing all pairs
    i = int((2 * n - 1 - math.sqrt((2 * n - 1) ** 2 - 8 * k)) // 2)
    while i * (2 * n - i - 1) // 2 > k:
        i -= 1
    while i + 1 < n and (i + 1) * (2 * n - (i + 1) - 1) // 2 <= k:
        i += 1
    j = k - i * (2 * n - i - 1) // 2 + i + 1
    return i, j


def build_instances(
    groups: list[RelationGroup], emb: EmbeddingMatrix, cfg: TrainingConfig
) -> list[AnalogyInstance]:
    """Generate the training set of positive and negative quadruples.

    Positives are all unordered pairings of distinct word-pairs within a
    group, uniformly subsampled without replacement when a group exceeds
    ``cfg.max_positives_per_group``.  Each word-pair then receives
    ``cfg.negatives_per_pair`` negatives from other groups, chosen by
    ``cfg.negative_strategy``.  Word pairs with out-of-vocabulary words
    are skipped (counted in a warning); deterministic for a fixed seed.
    """
    rng = np.random.default_rng(cfg.seed)

    resolved: list[tuple[str, list[tuple[str, str]]]] = []
    skipped_pairs = 0
    for group in groups:
        usable = [(h, t) for h, t in group.pairs if h in emb and t in emb]
        skipped_pairs += len(group.pairs) - len(usable)
        if usable:
            resolved.append((group.relation_id, usable))
        else:
            logger.warning(
                "relation %r has no resolvable pairs; dropped", group.relation_id
            )
    if skipped_pairs:
        logger.warning(
            "skipped %d word pairs with out-of-vocabulary words", skipped_pairs
        )
    if len(resolved) < 2:
        raise DataError("need at least 2 relation groups with resolvable pairs")

    heads = []
    tails = []
    group_of = []
    slices = []
    offset = 0
    for gi, (_, pairs) in enumerate(resolved):
        for h, t in pairs:
            heads.append(emb.lookup(h))
            tails.append(emb.lookup(t))
            group_of.append(gi)
        slices.append((offset, offset + len(pairs)))
        offset += len(pairs)
    H = np.array(heads)
    T = np.array(tails)
    group_of = np.array(group_of)
    diffs = H - T  # offsets used for negative mining, fixed before training

    instances: list[AnalogyInstance] = []

    for gi, (relation, pairs) in enumerate(resolved):
        n = len(pairs)
        lo, _ = slices[gi]
        if n < 2:
            logger.warning(
                "relation %r has fewer than 2 resolvable pairs; no positives",
                relation,
            )
            continue
        total = _combination_count(n)
        cap = cfg.max_positives_per_group
        if cap is not None and total > cap:
            ranks = np.sort(rng.choice(total, size=cap, replace=False))
            combos = (_decode_combination(int(k), n) for k in ranks)
        else:
            combos = ((i, j) for i in range(n) for j in range(i + 1, n))
        for i, j in combos:
            instances.append(
                AnalogyInstance(
                    h=H[lo + i],
                    t=T[lo + i],
                    h_prime=H[lo + j],
                    t_prime=T[lo + j],
                    sign=1,
                    source_relation=relation,
                    contrast_relation=relation,
                )
            )

    short_pool_warned = False
    for gi, (relation, pairs) in enumerate(resolved):
        others = np.nonzero(group_of != gi)[0]
        lo, hi = slices[gi]
        for anchor in range(lo, hi):
            k = cfg.negatives_per_pair
            if cfg.negative_strategy == UNIFORM:
                chosen = rng.choice(others, size=k, replace=len(others) < k)
            else:
                pool_size = min(cfg.candidate_pool, len(others))
                pool = rng.choice(others, size=pool_size, replace=False)
                dist = np.linalg.norm(diffs[pool] - diffs[anchor], axis=1)
                order = np.argsort(dist, kind="stable")
                chosen = pool[order[:k]]
                if len(chosen) < k and not short_pool_warned:
                    logger.warning(
                        "candidate pool smaller than negatives_per_pair; "
                        "emitting %d negatives per pair",
                        len(chosen),
                    )
                    short_pool_warned = True
            for other in chosen:
                instances.append(
                    AnalogyInstance(
                        h=H[anchor],
                        t=T[anchor],
                        h_prime=H[other],
                        t_prime=T[other],
                        sign=-1,
                        source_relation=relation,
                        contrast_relation=resolved[group_of[other]][0],
                    )
                )

    return instances


def instance_loss(op: BilinearOperator, inst: AnalogyInstance) -> float:
    """Signed squared relational distance of one instance."""
    return inst.sign * relational_distance_sq(
        op, (inst.h, inst.t), (inst.h_prime, inst.t_prime)
    )


def _pack(instances, d):
    H = np.empty((len(instances), d))
    T = np.empty_like(H)
    Hp = np.empty_like(H)
    Tp = np.empty_like(H)
    signs = np.empty(len(instances))
    for i, inst in enumerate(instances):
        if inst.h.shape != (d,):
            raise DimensionMismatchError(
                f"instance {i} has dimension {inst.h.shape}, expected ({d},)"
            )
        H[i] = inst.h
        T[i] = inst.t
        Hp[i] = inst.h_prime
        Tp[i] = inst.t_prime
        signs[i] = inst.sign
    return H, T, Hp, Tp, signs


def _signed_losses(op, H, T, Hp, Tp, signs):
    delta = compose_many(op, H, T) - compose_many(op, Hp, Tp)
    return signs * np.sum(delta * delta, axis=1)


def total_loss(op: BilinearOperator, instances, lambda_A: float = 0.0) -> float:
    """Sum of signed instance losses plus lambda_A * ||A||_F**2."""
    reg = lambda_A * frobenius_norm_A(op) ** 2
    if not instances:
        return reg
    H, T, Hp, Tp, signs = _pack(instances, op.d)
    return float(np.sum(_signed_losses(op, H, T, Hp, Tp, signs))) + reg


@dataclass
class GradientRecord:
    """Analytic gradient of the batch loss in diagonal mode."""

    dA: np.ndarray
    dp: float
    dq: float


def gradients(
    op: BilinearOperator, batch: list[AnalogyInstance], lambda_A: float = 0.0
) -> GradientRecord:
    """Gradient of sum(instance_loss) + lambda_A * ||A||_F**2 over a batch.

    With delta_k = r_k(h, t) - r_k(h', t'):

        dA[k, i, j] = sum 2 * sign * delta_k * (h_i t_j - h'_i t'_j) + 2 * lambda_A * A[k, i, j]
        dp          = sum 2 * sign * sum_k delta_k * (h_k - h'_k)
        dq          = sum 2 * sign * sum_k delta_k * (t_k - t'_k)

    Only diagonal-mode operators are supported.
    """
    if op.constraint_mode != DIAGONAL:
        raise UnsupportedModeError("gradients require a diagonal-mode operator")
    d = op.d
    dA_reg = 2.0 * lambda_A * op.tensor_A
    if not batch:
        return GradientRecord(dA=np.array(dA_reg), dp=0.0, dq=0.0)
    H, T, Hp, Tp, signs = _pack(batch, d)
    dA, dp, dq = _instance_gradients(op, H, T, Hp, Tp, signs)
    return GradientRecord(dA=dA + dA_reg, dp=dp, dq=dq)


def _instance_gradients(op, H, T, Hp, Tp, signs):
    n, d = H.shape
    delta = compose_many(op, H, T) - compose_many(op, Hp, Tp)
    coeff = (2.0 * signs)[:, None] * delta
    x1 = (H[:, :, None] * T[:, None, :]).reshape(n, d * d)
    x2 = (Hp[:, :, None] * Tp[:, None, :]).reshape(n, d * d)
    dA = (coeff.T @ (x1 - x2)).reshape(d, d, d)
    dp = float(np.sum(coeff * (H - Hp)))
    dq = float(np.sum(coeff * (T - Tp)))
    return dA, dp, dq


def _matrix_gradients(op, H, T, Hp, Tp, signs):
    # full-matrix analogue: dP[k, n] = sum 2 * sign * delta_k * (h_n - h'_n)
    n, d = H.shape
    delta = compose_many(op, H, T) - compose_many(op, Hp, Tp)
    coeff = (2.0 * signs)[:, None] * delta
    x1 = (H[:, :, None] * T[:, None, :]).reshape(n, d * d)
    x2 = (Hp[:, :, None] * Tp[:, None, :]).reshape(n, d * d)
    dA = (coeff.T @ (x1 - x2)).reshape(d, d, d)
    dP = coeff.T @ (H - Hp)
    dQ = coeff.T @ (T - Tp)
    return dA, dP, dQ


class _BatchWorkspace:
    """Fused loss + gradient evaluation on packed instance arrays.

    The outer-product difference h (x) t - h' (x) t' is built per batch
    slice and shared between the loss and the gradients, so the training
    loop composes each batch exactly once.
    """

    def __init__(self, H, T, Hp, Tp, signs):
        self.d = H.shape[1]
        self.H = H
        self.T = T
        self.Hp = Hp
        self.Tp = Tp
        self.signs = signs
        self.hdiff = H - Hp
        self.tdiff = T - Tp

    def batch(self, idx, a_matrix, p=None, q=None, P=None, Q=None):
        """Return (xdiff, delta) for the selected instances, where delta
        is r(h, t) - r(h', t') under the current parameters."""
        d = self.d
        xdiff = (
            self.H[idx, :, None] * self.T[idx, None, :]
            - self.Hp[idx, :, None] * self.Tp[idx, None, :]
        ).reshape(len(idx), d * d)
        bilinear = xdiff @ a_matrix.T
        if P is None:
            delta = bilinear + p * self.hdiff[idx] + q * self.tdiff[idx]
        else:
            delta = bilinear + self.hdiff[idx] @ P.T + self.tdiff[idx] @ Q.T
        return xdiff, delta

    def loss(self, idx, delta):
        return float(np.sum(self.signs[idx] * np.sum(delta * delta, axis=1)))

    def diagonal_gradients(self, idx, xdiff, delta):
        coeff = (2.0 * self.signs[idx])[:, None] * delta
        dA = (coeff.T @ xdiff).reshape(self.d, self.d, self.d)
        dp = float(np.sum(coeff * self.hdiff[idx]))
        dq = float(np.sum(coeff * self.tdiff[idx]))
        return dA, dp, dq

    def matrix_gradients(self, idx, xdiff, delta):
        coeff = (2.0 * self.signs[idx])[:, None] * delta
        dA = (coeff.T @ xdiff).reshape(self.d, self.d, self.d)
        dP = coeff.T @ self.hdiff[idx]
        dQ = coeff.T @ self.tdiff[idx]
        return dA, dP, dQ


def adagrad_step(param, grad, accum, learning_rate, epsilon=1e-8):
    """One AdaGrad update for a single parameter array (or scalar).

    Accumulates the squared gradient first, then steps by
    ``learning_rate * g / (sqrt(accum) + epsilon)``.  Returns
    ``(new_param, new_accum)``; accumulators never decrease.
    """
    scalar = np.ndim(param) == 0
    param = np.asarray(param, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    accum = np.asarray(accum, dtype=np.float64)
    if grad.shape != param.shape or accum.shape != param.shape:
        raise DimensionMismatchError("param, grad and accum shapes must match")
    new_accum = accum + grad * grad
    new_param = param - learning_rate * grad / (np.sqrt(new_accum) + epsilon)
    if scalar:
        return float(new_param), float(new_accum)
    return new_param, new_accum


def train(
    emb: EmbeddingMatrix,
    groups: list[RelationGroup],
    cfg: TrainingConfig,
    eval_hook=None,
) -> tuple[BilinearOperator, TrainingTrace]:
    """Fit the operator with mini-batch AdaGrad and record a per-epoch trace.

    All tensor entries and the scalars p, q are initialized uniformly from
    ``cfg.init_range`` with the seeded generator; instance order is
    reshuffled every epoch from the same seed, so runs are bit-for-bit
    reproducible for a fixed seed and batch size.  The recorded loss is
    the full-dataset mean at the end of each epoch (regularizer included).

    The Frobenius penalty on the tensor is applied as a decoupled
    per-batch weight decay, ``A <- (1 - 2 * lr * lambda_A) * A``, after
    each AdaGrad step: routed through the adaptive normalization its
    effect would decay with the accumulated data-gradient scale and the
    penalty would never bite.

    ``eval_hook(op, epoch)``, when given, may return a dict with
    ``sat_acc`` and/or ``maxdiff_acc`` entries that are stored in the
    trace.

    Raises
    ------
    RelcompError
        If ``emb`` is not standardized and the override flag is unset.
    DivergenceError
        If a non-finite loss is encountered.
    """
    if not emb.standardized and not cfg.allow_unstandardized:
        raise RelcompError(
            "embeddings must be standardized before training "
            "(set allow_unstandardized to override)"
        )
    instances = build_instances(groups, emb, cfg)
    d = emb.dim
    H, T, Hp, Tp, signs = _pack(instances, d)
    n = len(instances)

    init_ss, shuffle_ss = np.random.SeedSequence(cfg.seed).spawn(2)
    init_rng = np.random.default_rng(init_ss)
    shuffle_rng = np.random.default_rng(shuffle_ss)

    lo, hi = cfg.init_range
    A = init_rng.uniform(lo, hi, size=(d, d, d))
    accum_A = np.zeros_like(A)
    if cfg.full_pq:
        P = init_rng.uniform(lo, hi, size=(d, d))
        Q = init_rng.uniform(lo, hi, size=(d, d))
        accum_P = np.zeros_like(P)
        accum_Q = np.zeros_like(Q)
    else:
        p = float(init_rng.uniform(lo, hi))
        q = float(init_rng.uniform(lo, hi))
        accum_p = 0.0
        accum_q = 0.0

    def snapshot():
        if cfg.full_pq:
            return BilinearOperator.general(A.copy(), P.copy(), Q.copy())
        return BilinearOperator.diagonal(A.copy(), p, q)

    work = _BatchWorkspace(H, T, Hp, Tp, signs)
    all_idx = np.arange(n)
    trace = TrainingTrace()
    for epoch in range(cfg.epochs):
        started = time.perf_counter()
        perm = shuffle_rng.permutation(n)
        a_matrix = A.reshape(d, d * d)
        for batch_index, start in enumerate(range(0, n, cfg.batch_size)):
            idx = perm[start : start + cfg.batch_size]
            if cfg.full_pq:
                xdiff, delta = work.batch(idx, a_matrix, P=P, Q=Q)
            else:
                xdiff, delta = work.batch(idx, a_matrix, p=p, q=q)
            batch_loss = work.loss(idx, delta)
            if not np.isfinite(batch_loss):
                raise DivergenceError(epoch, batch_index, batch_loss)
            if cfg.full_pq:
                dA, dP, dQ = work.matrix_gradients(idx, xdiff, delta)
                A, accum_A = adagrad_step(
                    A, dA, accum_A, cfg.learning_rate, cfg.adagrad_epsilon
                )
                P, accum_P = adagrad_step(
                    P, dP, accum_P, cfg.learning_rate, cfg.adagrad_epsilon
                )
                Q, accum_Q = adagrad_step(
                    Q, dQ, accum_Q, cfg.learning_rate, cfg.adagrad_epsilon
                )
            else:
                dA, dp, dq = work.diagonal_gradients(idx, xdiff, delta)
                A, accum_A = adagrad_step(
                    A, dA, accum_A, cfg.learning_rate, cfg.adagrad_epsilon
                )
                p, accum_p = adagrad_step(
                    p, dp, accum_p, cfg.learning_rate, cfg.adagrad_epsilon
                )
                q, accum_q = adagrad_step(
                    q, dq, accum_q, cfg.learning_rate, cfg.adagrad_epsilon
                )
            # Frobenius penalty as decoupled weight decay: fed through the
            # AdaGrad normalization its step would shrink with the
            # accumulated data-gradient scale and regularize nothing.
            A *= 1.0 - 2.0 * cfg.learning_rate * cfg.lambda_A
            a_matrix = A.reshape(d, d * d)

        epoch_total = 0.0
        for start in range(0, n, 8192):
            chunk = all_idx[start : start + 8192]
            if cfg.full_pq:
                _, delta = work.batch(chunk, a_matrix, P=P, Q=Q)
            else:
                _, delta = work.batch(chunk, a_matrix, p=p, q=q)
            epoch_total += work.loss(chunk, delta)
        frob = float(np.sqrt(np.sum(A * A)))
        mean_loss = (epoch_total + cfg.lambda_A * frob * frob) / n
        if not np.isfinite(mean_loss):
            raise DivergenceError(epoch, -1, mean_loss)

        scores = {}
        if eval_hook is not None:
            scores = eval_hook(snapshot(), epoch) or {}
        if cfg.full_pq:
            p_rec = float(np.mean(np.diag(P)))
            q_rec = float(np.mean(np.diag(Q)))
        else:
            p_rec, q_rec = p, q
        trace.append(
            EpochRecord(
                epoch=epoch,
                loss=mean_loss,
                frob_A=frob,
                p=p_rec,
                q=q_rec,
                sat_acc=scores.get("sat_acc"),
                maxdiff_acc=scores.get("maxdiff_acc"),
                seconds=time.perf_counter() - started,
            )
        )

    return snapshot(), trace
