"""Prediction accuracy, noise ceilings, transfer matrices, pooling, sweeps.

A predictor is anything that can answer triplets: an Embedding, a
PairScoreTable, a VectorDataset, or a bare coordinate array (treated as
ground truth).  Reports carry binomial standard errors throughout; curve
aggregation uses mean and sample standard deviation.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, replace

import numpy as np

from .core import (
    AnswerSet,
    answer_set_from_arrays,
    count_questions,
    merge_answer_sets,
    n_pairs,
)
from .embedding import EmbedConfig, Embedding, embed, predict_many
from .oracle import VectorDataset, judge_triplets
from .ranking import PairScoreTable, predict_many_from_scores
from .rng import derive_seed, substream
from .sampling import draw_questions

DEFAULT_TRUTH_CAP = 2_000_000
DEFAULT_TRAIN_SIZE = 1500
DEFAULT_TEST_SIZE = 250


@dataclass(frozen=True)
class PredictionReport:
    """Triplet prediction accuracy on one test set."""

    accuracy: float
    n_test: int
    stderr: float
    unconstrained_items: int
    predictor: str
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        if self.n_test < 1:
            raise ValueError("report needs at least one test triplet")
        correct = self.accuracy * self.n_test
        if abs(correct - round(correct)) > 1e-6:
            raise ValueError(
                f"accuracy {self.accuracy} on {self.n_test} tests is not a whole count"
            )

    @property
    def n_correct(self) -> int:
        return round(self.accuracy * self.n_test)


def _report(correct: int, n_test: int, unconstrained: int, descriptor: str, flags=()) -> PredictionReport:
    correct, n_test = int(correct), int(n_test)
    acc = correct / n_test
    return PredictionReport(
        accuracy=acc,
        n_test=n_test,
        stderr=math.sqrt(acc * (1.0 - acc) / n_test),
        unconstrained_items=unconstrained,
        predictor=descriptor,
        flags=tuple(flags),
    )


def _as_predictor(predictor):
    """Normalize to (answer_fn(anchors, lefts, rights), n_items, unconstrained, descriptor)."""
    if isinstance(predictor, Embedding):
        return (
            lambda a, l, r: predict_many(predictor, a, l, r),
            predictor.n,
            len(predictor.unconstrained),
            f"embedding:{predictor.method}(d={predictor.d})",
        )
    if isinstance(predictor, PairScoreTable):
        return (
            lambda a, l, r: predict_many_from_scores(predictor, a, l, r),
            predictor.n_items,
            0,
            f"ranking:{predictor.method}",
        )
    if isinstance(predictor, VectorDataset):
        coords = predictor.coords
    else:
        coords = np.asarray(predictor, dtype=np.float64)
        if coords.ndim != 2:
            raise TypeError(f"cannot predict triplets with {type(predictor).__name__}")
    return (
        lambda a, l, r: judge_triplets(coords, a, l, r),
        coords.shape[0],
        0,
        f"coords(d={coords.shape[1]})",
    )


def evaluate(predictor, test: AnswerSet) -> PredictionReport:
    """Agreement of the predictor's answers with a test AnswerSet."""
    if len(test) == 0:
        raise ValueError("empty test set")
    answer_fn, n_covered, unconstrained, descriptor = _as_predictor(predictor)
    anchors, lefts, rights, values = test.to_arrays()
    top = max(anchors.max(), lefts.max(), rights.max())
    if top >= n_covered:
        raise ValueError(f"test references item {top} but predictor covers only {n_covered} items")
    correct = int(np.sum(answer_fn(anchors, lefts, rights) == values))
    return _report(correct, len(test), unconstrained, descriptor)


def _all_questions(n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Every canonical question (anchor; lo < hi), vectorized."""
    pair_count = n_pairs(n - 1)
    anchors = np.repeat(np.arange(n), pair_count)
    lo_r = np.empty(pair_count, dtype=np.int64)
    hi_r = np.empty(pair_count, dtype=np.int64)
    k = 0
    for a in range(n - 2):
        span = n - 2 - a
        lo_r[k : k + span] = a
        hi_r[k : k + span] = np.arange(a + 1, n - 1)
        k += span
    lo_r = np.tile(lo_r, n)
    hi_r = np.tile(hi_r, n)
    lo = lo_r + (lo_r >= anchors)
    hi = hi_r + (hi_r >= anchors)
    return anchors, lo, hi


def exhaustive_or_sampled_truth_accuracy(
    predictor,
    ds: VectorDataset,
    cap: int = DEFAULT_TRUTH_CAP,
    seed: int = 0,
) -> PredictionReport:
    """Accuracy against ground truth over all questions, or a uniform sample.

    Enumerates every n*C(n-1,2) question when that count fits in `cap`,
    otherwise draws `cap` questions uniformly; the report is flagged
    "exhaustive" or "sampled" accordingly.
    """
    n = ds.n
    total = count_questions(n)
    answer_fn, n_covered, unconstrained, descriptor = _as_predictor(predictor)
    if n > n_covered:
        raise ValueError(f"dataset has {n} items but predictor covers only {n_covered}")
    if total <= cap:
        anchors, lefts, rights = _all_questions(n)
        flag = "exhaustive"
    else:
        rng = substream(seed, "eval")
        anchors, lefts, rights = draw_questions(n, cap, rng)
        flag = "sampled"
    truth = judge_triplets(ds.coords, anchors, lefts, rights)
    correct = int(np.sum(answer_fn(anchors, lefts, rights) == truth))
    return _report(correct, len(anchors), unconstrained, descriptor, (flag,))


def flip_answers(records: AnswerSet) -> AnswerSet:
    """Complement every answer (0 <-> 1), keeping questions and order."""
    anchors, lefts, rights, values = records.to_arrays()
    return answer_set_from_arrays(
        records.items,
        anchors,
        lefts,
        rights,
        1 - values,
        provenance=f"flipped({records.provenance})",
    )


# ---------------------------------------------------------------------------
# Noise ceiling
# ---------------------------------------------------------------------------

def noise_ceiling(repeats: AnswerSet) -> float:
    """Mean agreement of individual answers with their question's majority.

    Only questions answered more than once enter; their group sizes must be
    odd so the majority is defined.  The result bounds the accuracy any
    predictor can reach on data with this answer noise.
    """
    groups: dict[tuple[int, int, int], list[int]] = defaultdict(list)
    for record in records_canonical(repeats):
        groups[record[0]].append(record[1])
    agree = 0
    total = 0
    for key, values in groups.items():
        if len(values) < 2:
            continue
        if len(values) % 2 == 0:
            raise ValueError(f"question {key} repeated an even number of times ({len(values)})")
        majority = Counter(values).most_common(1)[0][0]
        agree += sum(v == majority for v in values)
        total += len(values)
    if total == 0:
        raise ValueError("no repeated questions; noise ceiling undefined")
    return agree / total


def records_canonical(records: AnswerSet):
    """Yield (question_key, canonical_value) per record."""
    anchors, lefts, rights, values = records.to_arrays()
    flip = lefts > rights
    lo = np.where(flip, rights, lefts)
    hi = np.where(flip, lefts, rights)
    vals = np.where(flip, 1 - values, values)
    for i in range(len(anchors)):
        yield (int(anchors[i]), int(lo[i]), int(hi[i])), int(vals[i])


def expected_majority_agreement(p: float, l: int) -> float:
    """Closed form E[max(k, l-k)] / l for l answers flipped independently at p."""
    if l < 1 or l % 2 == 0:
        raise ValueError("group size must be odd")
    total = 0.0
    for k in range(l + 1):
        total += math.comb(l, k) * p**k * (1 - p) ** (l - k) * max(k, l - k)
    return total / l


# ---------------------------------------------------------------------------
# Train/test splitting
# ---------------------------------------------------------------------------

def holdout_split(
    records: AnswerSet,
    train_size: int = DEFAULT_TRAIN_SIZE,
    test_size: int = DEFAULT_TEST_SIZE,
    seed: int = 0,
) -> tuple[AnswerSet, AnswerSet]:
    """Random split with no canonical question shared between the parts.

    Test records are drawn first; remaining records whose question appears
    in the test part are dropped, and the train part takes up to
    `train_size` of what is left.
    """
    m = len(records)
    if test_size < 1 or test_size >= m:
        raise ValueError(f"cannot hold out {test_size} of {m} records")
    order = substream(seed, "split").permutation(m)
    test_idx = order[:test_size]
    anchors, lefts, rights, values = records.to_arrays()
    keys = _canonical_keys(anchors, lefts, rights)
    test_keys = set(map(tuple, keys[test_idx]))
    train_idx = [i for i in order[test_size:] if tuple(keys[i]) not in test_keys]
    if not train_idx:
        raise ValueError("no records left for training after question exclusion")
    train_idx = np.asarray(train_idx[:train_size])
    test_idx = np.sort(test_idx)
    train_idx = np.sort(train_idx)

    def take(idx, tag):
        return AnswerSet(
            records.items,
            tuple(records.records[i] for i in idx),
            provenance=f"{tag}({records.provenance})",
        )

    return take(train_idx, "train"), take(test_idx, "test")


def _canonical_keys(anchors, lefts, rights) -> np.ndarray:
    lo = np.minimum(lefts, rights)
    hi = np.maximum(lefts, rights)
    return np.stack([anchors, lo, hi], axis=1)


# ---------------------------------------------------------------------------
# Cross-subject transfer
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TransferMatrix:
    """Grid of reports: rows are training sources, columns test targets."""

    reports: tuple[tuple[PredictionReport, ...], ...]
    row_labels: tuple[str, ...]
    col_labels: tuple[str, ...]

    def __post_init__(self):
        if len(self.reports) != len(self.row_labels):
            raise ValueError("one row of reports per row label")
        for row in self.reports:
            if len(row) != len(self.col_labels):
                raise ValueError("one report per column label")

    def accuracy_grid(self) -> np.ndarray:
        return np.array([[r.accuracy for r in row] for row in self.reports])


def cross_subject(
    train_sets: list[AnswerSet],
    test_sets: list[AnswerSet],
    method: str = "SOE",
    cfg: EmbedConfig = EmbedConfig(d=2),
    train_size: int = DEFAULT_TRAIN_SIZE,
    test_size: int = DEFAULT_TEST_SIZE,
    seed: int = 0,
    labels: tuple[tuple[str, ...], tuple[str, ...]] | None = None,
) -> TransferMatrix:
    """Embed each source, evaluate on each target's held-out questions.

    Every source set is split once (up to `train_size` records for the
    embedding); every target set is split once (`test_size` held-out
    records).  Diagonal cells therefore test on questions disjoint from
    their own training records, and every cell in a column shares the same
    test triplets.
    """
    items = train_sets[0].items
    for s in list(train_sets) + list(test_sets):
        if s.items.n != items.n:
            raise ValueError("all answer sets must share one item set")
    embeddings = []
    for i, source in enumerate(train_sets):
        train_part, _ = holdout_split(source, train_size, test_size, derive_seed(seed, "cross", "train", i))
        embeddings.append(embed(train_part, method, cfg, derive_seed(seed, "cross", "embed", i)))
    test_parts = []
    for j, target in enumerate(test_sets):
        _, test_part = holdout_split(target, train_size, test_size, derive_seed(seed, "cross", "train", j))
        test_parts.append(test_part)
    reports = tuple(
        tuple(evaluate(e, test_part) for test_part in test_parts) for e in embeddings
    )
    if labels is None:
        rows = tuple(f"source{i}" for i in range(len(train_sets)))
        cols = tuple(f"target{j}" for j in range(len(test_sets)))
    else:
        rows, cols = tuple(labels[0]), tuple(labels[1])
    return TransferMatrix(reports, rows, cols)


# ---------------------------------------------------------------------------
# Session pooling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PoolingCurve:
    pool_sizes: tuple[int, ...]
    mean: np.ndarray
    sd: np.ndarray
    per_trial: np.ndarray  # trials x pool sizes


def pooling_curve(
    sessions: list[AnswerSet],
    trials: int = 20,
    method: str = "SOE",
    cfg: EmbedConfig = EmbedConfig(d=2),
    seed: int = 0,
) -> PoolingCurve:
    """Accuracy as sessions are pooled into the training set one by one.

    Per trial: permute the sessions, hold the first out as the test set,
    then grow the training pool from the remaining sessions, embedding and
    evaluating at each size.  Mean and sample standard deviation are taken
    over trials.
    """
    if len(sessions) < 2:
        raise ValueError("pooling needs at least two sessions")
    n_pool = len(sessions) - 1
    acc = np.zeros((trials, n_pool))
    for t in range(trials):
        order = substream(seed, "pool", t).permutation(len(sessions))
        test = sessions[order[0]]
        pool: list[AnswerSet] = []
        for k in range(n_pool):
            pool.append(sessions[order[k + 1]])
            train = merge_answer_sets(pool) if len(pool) > 1 else pool[0]
            e = embed(train, method, cfg, derive_seed(seed, "pool", t, k))
            acc[t, k] = evaluate(e, test).accuracy
    return PoolingCurve(
        pool_sizes=tuple(range(1, n_pool + 1)),
        mean=acc.mean(axis=0),
        sd=_sample_sd(acc, axis=0),
        per_trial=acc,
    )


def _sample_sd(a: np.ndarray, axis: int) -> np.ndarray:
    if a.shape[axis] < 2:
        return np.zeros_like(a.mean(axis=axis))
    return a.std(axis=axis, ddof=1)


# ---------------------------------------------------------------------------
# Dimension sweep
# ---------------------------------------------------------------------------

def dimension_sweep(
    records: AnswerSet,
    test: AnswerSet,
    dims: list[int],
    methods: list[str],
    cfg: EmbedConfig = EmbedConfig(),
    seed: int = 0,
) -> dict[tuple[int, str], PredictionReport]:
    """Full (dimension x method) grid on fixed train/test sets."""
    if not dims:
        raise ValueError("dimension list is empty")
    grid: dict[tuple[int, str], PredictionReport] = {}
    for d in dims:
        for method in methods:
            e = embed(records, method, replace(cfg, d=d), derive_seed(seed, "sweep", d, method))
            grid[(d, method)] = evaluate(e, test)
    return grid


# ---------------------------------------------------------------------------
# Delimited export
# ---------------------------------------------------------------------------

REPORT_HEADER = ("predictor", "accuracy", "n_test", "stderr", "unconstrained_items", "flags")


def report_row(r: PredictionReport) -> str:
    flags = "|".join(r.flags)
    return f"{r.predictor},{r.accuracy!r},{r.n_test},{r.stderr!r},{r.unconstrained_items},{flags}"


def write_reports(path, rows: list[tuple[str, PredictionReport]]) -> None:
    """Write labeled reports as `label,<report columns>` delimited text."""
    from pathlib import Path

    with Path(path).open("w") as fh:
        fh.write("label," + ",".join(REPORT_HEADER) + "\n")
        for label, r in rows:
            fh.write(f"{label},{report_row(r)}\n")
