"""Triplet subsampling strategies and majority-vote aggregation.

Three strategies generate question subsets: uniform random (with repetition),
l-repeated-random (each drawn question asked l times, l odd), and landmark
(all questions whose candidate pair comes from a fixed landmark set).
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from math import comb
from typing import Sequence

import numpy as np

from .core import (
    Answer,
    AnsweredTriplet,
    AnswerSet,
    ItemSet,
    Triplet,
    canonicalize,
    pair_unflatten_many,
)
from .errors import TieError
from .rng import substream

STRATEGIES = ("random", "repeated", "landmark")


@dataclass(frozen=True)
class SamplingPlan:
    """Declarative description of a subsampling strategy.

    `m` is the total answer budget.  For the repeated strategy `l` must be odd
    and at least 3 and must divide `m`.  Landmarks are given either explicitly
    (`landmarks`) or as a count (`n_landmarks`) to be drawn uniformly at
    random.  `cap` optionally subsamples the strategy output uniformly down to
    a fixed size (used to trim landmark designs to a session budget).
    """

    strategy: str
    m: int | None = None
    l: int | None = None
    landmarks: tuple[int, ...] | None = None
    n_landmarks: int | None = None
    cap: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}, expected one of {STRATEGIES}")
        if self.strategy in ("random", "repeated"):
            if self.m is None or self.m < 1:
                raise ValueError(f"strategy {self.strategy!r} needs a positive budget m")
        if self.strategy == "repeated":
            if self.l is None or self.l < 3 or self.l % 2 == 0:
                raise ValueError(f"repetition count l must be odd and >= 3, got {self.l}")
            if self.m % self.l != 0:
                raise ValueError(f"budget m={self.m} not divisible by l={self.l}")
        if self.strategy == "landmark":
            if (self.landmarks is None) == (self.n_landmarks is None):
                raise ValueError("landmark strategy needs exactly one of landmarks / n_landmarks")
        if self.landmarks is not None:
            object.__setattr__(self, "landmarks", tuple(int(x) for x in self.landmarks))

    def to_dict(self) -> dict:
        out: dict = {"strategy": self.strategy, "seed": self.seed}
        for key in ("m", "l", "n_landmarks", "cap"):
            if getattr(self, key) is not None:
                out[key] = getattr(self, key)
        if self.landmarks is not None:
            out["landmarks"] = list(self.landmarks)
        return out

    @classmethod
    def from_dict(cls, doc: dict) -> "SamplingPlan":
        allowed = {"strategy", "m", "l", "landmarks", "n_landmarks", "cap", "seed"}
        unknown = set(doc) - allowed
        if unknown:
            raise ValueError(f"unknown sampling plan keys: {sorted(unknown)}")
        doc = dict(doc)
        if "landmarks" in doc:
            doc["landmarks"] = tuple(doc["landmarks"])
        return cls(**doc)


def realize_plan(items: ItemSet, plan: SamplingPlan) -> list[Triplet]:
    """Generate the plan's triplets, applying the optional cap."""
    if plan.strategy == "random":
        out = sample_random(items, plan.m, plan.seed)
    elif plan.strategy == "repeated":
        out = sample_repeated(items, plan.m, plan.l, plan.seed)
    else:
        marks = plan.landmarks
        if marks is None:
            marks = select_landmarks(items, plan.n_landmarks, plan.seed)
        out = sample_landmark(items, marks, plan.seed)
    if plan.cap is not None and len(out) > plan.cap:
        out = cap_subsample(out, plan.cap, plan.seed)
    return out


def draw_questions(n: int, m: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """m i.i.d. uniform canonical questions (anchor, lo, hi) with lo < hi."""
    anchors = rng.integers(n, size=m)
    flat = rng.integers(comb(n - 1, 2), size=m)
    lo_r, hi_r = pair_unflatten_many(flat, n - 1)
    # reduced ids index the item set with the anchor removed
    lo = lo_r + (lo_r >= anchors)
    hi = hi_r + (hi_r >= anchors)
    return anchors, lo, hi


def _randomize_sides(
    lo: np.ndarray, hi: np.ndarray, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    swap = rng.random(lo.shape[0]) < 0.5
    left = np.where(swap, hi, lo)
    right = np.where(swap, lo, hi)
    return left, right


def _to_triplets(anchors: np.ndarray, lefts: np.ndarray, rights: np.ndarray) -> list[Triplet]:
    return [Triplet(int(a), int(l), int(r)) for a, l, r in zip(anchors, lefts, rights)]


def sample_random(items: ItemSet, m: int, seed: int) -> list[Triplet]:
    """m questions i.i.d. uniform over all n*C(n-1,2) distinct questions.

    Sampling is with repetition; the left/right presentation order is
    randomized per draw.
    """
    if m < 1:
        raise ValueError(f"budget m must be >= 1, got {m}")
    rng = substream(seed, "triplets")
    anchors, lo, hi = draw_questions(items.n, m, rng)
    left, right = _randomize_sides(lo, hi, substream(seed, "shuffle"))
    return _to_triplets(anchors, left, right)


def sample_repeated(items: ItemSet, m: int, l: int, seed: int) -> list[Triplet]:
    """m/l uniform questions, each emitted l times, in globally shuffled order.

    l must be odd so a later majority vote cannot tie; l = 1 degenerates to
    plain random sampling.
    """
    if l < 1 or l % 2 == 0:
        raise ValueError(f"repetition count l must be odd, got {l}")
    if m < 1 or m % l != 0:
        raise ValueError(f"budget m={m} must be a positive multiple of l={l}")
    rng = substream(seed, "triplets")
    anchors, lo, hi = draw_questions(items.n, m // l, rng)
    idx = np.repeat(np.arange(m // l), l)
    shuffle = substream(seed, "shuffle")
    shuffle.shuffle(idx)
    left, right = _randomize_sides(lo[idx], hi[idx], shuffle)
    return _to_triplets(anchors[idx], left, right)


def select_landmarks(items: ItemSet, k: int, seed: int) -> tuple[int, ...]:
    """k distinct landmark ids drawn uniformly at random."""
    if not (2 <= k <= items.n):
        raise ValueError(f"need 2 <= k <= n landmarks, got k={k}, n={items.n}")
    rng = substream(seed, "landmarks")
    return tuple(int(x) for x in rng.choice(items.n, size=k, replace=False))


def sample_landmark(items: ItemSet, landmarks: Sequence[int], seed: int) -> list[Triplet]:
    """All questions (x, {l_i, l_j}) over the landmark set: C(k,2)*(n-2) triplets.

    Anchors range over every item outside the two landmarks of the question,
    so other landmarks may appear as anchors.  Output order is shuffled and
    presentation sides are randomized by the seed.
    """
    marks = [int(x) for x in landmarks]
    if len(set(marks)) != len(marks):
        raise ValueError(f"duplicate landmark ids in {marks}")
    if not (2 <= len(marks) <= items.n):
        raise ValueError(f"need 2 <= k <= n landmarks, got k={len(marks)}")
    if any(not (0 <= x < items.n) for x in marks):
        raise ValueError(f"landmark id out of range for n={items.n}")
    n = items.n
    k = len(marks)
    marks_arr = np.asarray(marks)
    pair_a, pair_b = np.triu_indices(k, k=1)
    li = marks_arr[pair_a]
    lj = marks_arr[pair_b]
    anchors_list = []
    lo_list = []
    hi_list = []
    all_ids = np.arange(n)
    for a, b in zip(li, lj):
        anchors = all_ids[(all_ids != a) & (all_ids != b)]
        anchors_list.append(anchors)
        lo_list.append(np.full(anchors.shape[0], min(a, b)))
        hi_list.append(np.full(anchors.shape[0], max(a, b)))
    anchors = np.concatenate(anchors_list)
    lo = np.concatenate(lo_list)
    hi = np.concatenate(hi_list)
    shuffle = substream(seed, "shuffle")
    order = shuffle.permutation(anchors.shape[0])
    left, right = _randomize_sides(lo[order], hi[order], shuffle)
    return _to_triplets(anchors[order], left, right)


def cap_subsample(triplets: Sequence[Triplet], cap: int, seed: int) -> list[Triplet]:
    """Uniform subsample without replacement down to `cap` questions."""
    if cap < 1:
        raise ValueError(f"cap must be >= 1, got {cap}")
    if len(triplets) <= cap:
        return list(triplets)
    rng = substream(seed, "cap")
    keep = rng.choice(len(triplets), size=cap, replace=False)
    keep.sort()
    return [triplets[i] for i in keep]


def majority_vote(records: AnswerSet, on_tie: str = "error") -> AnswerSet:
    """Aggregate repeated questions into one record each by majority.

    Grouping is by canonical question identity (anchor with the unordered
    candidate pair); groups of size one pass through.  An exactly tied group
    has no majority answer: with `on_tie="error"` it raises TieError, with
    `on_tie="drop"` the question is omitted.  Ties need an even group, which
    an odd repetition count only rules out until chance redraws of the same
    question merge two groups.
    """
    if on_tie not in ("error", "drop"):
        raise ValueError(f"on_tie must be 'error' or 'drop', got {on_tie!r}")
    tallies: dict[tuple[int, int, int], Counter] = {}
    order: list[tuple[int, int, int]] = []
    for rec in records:
        canon = canonicalize(rec)
        key = canon.triplet.question_key()
        if key not in tallies:
            tallies[key] = Counter()
            order.append(key)
        tallies[key][canon.answer.value] += 1
    out: list[AnsweredTriplet] = []
    for key in order:
        tally = tallies[key]
        ones, zeros = tally[1], tally[0]
        if ones == zeros:
            if on_tie == "drop":
                continue
            raise TieError(f"question {key} split {ones}:{zeros}, majority undefined")
        value = 1 if ones > zeros else 0
        anchor, lo, hi = key
        out.append(
            AnsweredTriplet(
                Triplet(anchor, lo, hi),
                Answer(value, source=f"majority:{ones + zeros}"),
            )
        )
    return AnswerSet(records.items, tuple(out), f"majority_vote({records.provenance})")
