"""Domain types for comparison-based data: items, triplets, answers, pairs.

A triplet question asks whether the anchor item is closer to the left or to
the right candidate.  Swapping left and right while flipping the answer
denotes the same information, so analysis code works on canonical records
(left id < right id) while raw records keep presentation order.
"""

from __future__ import annotations

import csv
from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass, field
from functools import cached_property
from math import comb
from pathlib import Path

import numpy as np

from .errors import ParseError

ANSWER_FILE_HEADER = ("anchor", "left", "right", "answer", "response_ms", "source")


@dataclass(frozen=True)
class ItemSet:
    """A fixed set of n items with dense integer ids 0..n-1.

    Labels (e.g. image filenames) and per-item metadata are optional and live
    only at the edges; all internal bookkeeping is by id.
    """

    n: int
    labels: tuple[str, ...] | None = None
    metadata: tuple[Mapping[str, object], ...] | None = None

    def __post_init__(self):
        if self.n < 3:
            raise ValueError(f"an item set needs at least 3 items, got {self.n}")
        if self.labels is not None and len(self.labels) != self.n:
            raise ValueError(f"expected {self.n} labels, got {len(self.labels)}")
        if self.metadata is not None and len(self.metadata) != self.n:
            raise ValueError(f"expected {self.n} metadata entries, got {len(self.metadata)}")

    @property
    def ids(self) -> range:
        return range(self.n)

    def label_of(self, item: int) -> str:
        if self.labels is not None:
            return self.labels[item]
        return str(item)


@dataclass(frozen=True, slots=True)
class Triplet:
    """One question: is `anchor` closer to `left` or to `right`?"""

    anchor: int
    left: int
    right: int

    def __post_init__(self):
        if len({self.anchor, self.left, self.right}) != 3:
            raise ValueError(f"triplet items must be pairwise distinct: {self}")
        if min(self.anchor, self.left, self.right) < 0:
            raise ValueError(f"negative item id in {self}")

    def question_key(self) -> tuple[int, int, int]:
        """Identity of the question: anchor with the unordered candidate pair."""
        lo, hi = (self.left, self.right) if self.left < self.right else (self.right, self.left)
        return (self.anchor, lo, hi)


@dataclass(frozen=True, slots=True)
class Answer:
    """A binary answer: 1 means the anchor was judged closer to the left item."""

    value: int
    response_ms: float | None = None
    source: str = ""

    def __post_init__(self):
        if self.value not in (0, 1):
            raise ValueError(f"answer value must be 0 or 1, got {self.value!r}")
        if self.response_ms is not None and self.response_ms < 0:
            raise ValueError("response_ms must be non-negative")


@dataclass(frozen=True, slots=True)
class AnsweredTriplet:
    triplet: Triplet
    answer: Answer


def canonicalize(record: AnsweredTriplet) -> AnsweredTriplet:
    """Return the representative record with left < right.

    If left and right are swapped the answer value flips; the operation is
    idempotent and preserves response time and source.
    """
    t = record.triplet
    if t.left < t.right:
        return record
    a = record.answer
    return AnsweredTriplet(
        Triplet(t.anchor, t.right, t.left),
        Answer(1 - a.value, a.response_ms, a.source),
    )


@dataclass(frozen=True)
class AnswerSet:
    """Answered triplets from one source (an oracle run, session, or subject).

    Records are ordered and may repeat; repetition is meaningful for the
    l-repeated sampling strategy.
    """

    items: ItemSet
    records: tuple[AnsweredTriplet, ...]
    provenance: str = ""

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        if self.records:
            arr = self.to_arrays()[:3]
            top = max(int(a.max()) for a in arr)
            if top >= self.items.n:
                raise ValueError(f"record references item {top} outside 0..{self.items.n - 1}")

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[AnsweredTriplet]:
        return iter(self.records)

    @cached_property
    def _arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        anchors = np.fromiter((r.triplet.anchor for r in self.records), dtype=np.int64, count=len(self.records))
        lefts = np.fromiter((r.triplet.left for r in self.records), dtype=np.int64, count=len(self.records))
        rights = np.fromiter((r.triplet.right for r in self.records), dtype=np.int64, count=len(self.records))
        values = np.fromiter((r.answer.value for r in self.records), dtype=np.int64, count=len(self.records))
        for a in (anchors, lefts, rights, values):
            a.setflags(write=False)
        return anchors, lefts, rights, values

    def to_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Return (anchors, lefts, rights, values) as read-only int64 arrays."""
        return self._arrays

    def canonicalized(self) -> "AnswerSet":
        return AnswerSet(self.items, tuple(canonicalize(r) for r in self.records), self.provenance)

    def question_keys(self) -> list[tuple[int, int, int]]:
        return [r.triplet.question_key() for r in self.records]


def answer_set_from_arrays(
    items: ItemSet,
    anchors: Sequence[int] | np.ndarray,
    lefts: Sequence[int] | np.ndarray,
    rights: Sequence[int] | np.ndarray,
    values: Sequence[int] | np.ndarray,
    source: str = "",
    provenance: str = "",
) -> AnswerSet:
    """Build an AnswerSet from parallel id/value arrays (one shared source tag)."""
    records = tuple(
        AnsweredTriplet(Triplet(int(a), int(l), int(r)), Answer(int(v), source=source))
        for a, l, r, v in zip(anchors, lefts, rights, values)
    )
    return AnswerSet(items, records, provenance)


def merge_answer_sets(sets: Sequence[AnswerSet], provenance: str = "") -> AnswerSet:
    """Concatenate record lists; all sets must share one item set size."""
    if not sets:
        raise ValueError("nothing to merge")
    n = sets[0].items.n
    if any(s.items.n != n for s in sets):
        raise ValueError("answer sets reference item sets of different sizes")
    records: list[AnsweredTriplet] = []
    for s in sets:
        records.extend(s.records)
    return AnswerSet(sets[0].items, tuple(records), provenance or "+".join(s.provenance for s in sets))


# ---------------------------------------------------------------------------
# Pair indexing
# ---------------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class PairIndex:
    """An unordered item pair stored canonically (a < b) with its flat index."""

    a: int
    b: int
    flat: int

    @classmethod
    def of(cls, a: int, b: int, n: int) -> "PairIndex":
        lo, hi = (a, b) if a < b else (b, a)
        return cls(lo, hi, pair_flat_index(a, b, n))


def n_pairs(n: int) -> int:
    return comb(n, 2)


def pair_flat_index(a: int, b: int, n: int) -> int:
    """Flat index of the unordered pair {a, b} in lexicographic order.

    Pairs enumerate as (0,1), (0,2), ..., (0,n-1), (1,2), ...; the index is
    order-insensitive and bijective over 0..C(n,2)-1.
    """
    if a == b:
        raise ValueError(f"not a pair: ({a}, {b})")
    if not (0 <= a < n and 0 <= b < n):
        raise ValueError(f"pair ({a}, {b}) out of range for n={n}")
    lo, hi = (a, b) if a < b else (b, a)
    return lo * n - lo * (lo + 1) // 2 + (hi - lo - 1)


def pair_flat_index_many(a: np.ndarray, b: np.ndarray, n: int) -> np.ndarray:
    """Vectorized `pair_flat_index`; inputs must already be valid pairs."""
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    return lo * n - lo * (lo + 1) // 2 + (hi - lo - 1)


def pair_unflatten(flat: int, n: int) -> tuple[int, int]:
    """Inverse of `pair_flat_index`."""
    if not (0 <= flat < n_pairs(n)):
        raise ValueError(f"flat index {flat} out of range for n={n}")
    a, b = pair_unflatten_many(np.asarray([flat]), n)
    return int(a[0]), int(b[0])


def pair_unflatten_many(flat: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    starts = _pair_row_starts(n)
    a = np.searchsorted(starts, flat, side="right") - 1
    b = flat - starts[a] + a + 1
    return a, b


def _pair_row_starts(n: int) -> np.ndarray:
    i = np.arange(n - 1, dtype=np.int64)
    return i * n - i * (i + 1) // 2


# ---------------------------------------------------------------------------
# Question enumeration
# ---------------------------------------------------------------------------

def count_questions(n: int) -> int:
    """Number of distinct triplet questions over n items: n * C(n-1, 2)."""
    return n * comb(n - 1, 2)


def enumerate_questions(items: ItemSet | int) -> Iterator[Triplet]:
    """Yield every distinct question in canonical form (left < right)."""
    n = items if isinstance(items, int) else items.n
    for anchor in range(n):
        for left in range(n):
            if left == anchor:
                continue
            for right in range(left + 1, n):
                if right == anchor:
                    continue
                yield Triplet(anchor, left, right)


# ---------------------------------------------------------------------------
# Triplet record interchange format
# ---------------------------------------------------------------------------

def write_answer_set(path: str | Path, answers: AnswerSet) -> None:
    """Write records as `anchor,left,right,answer,response_ms,source` with header."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ANSWER_FILE_HEADER)
        for rec in answers.records:
            t, a = rec.triplet, rec.answer
            ms = "" if a.response_ms is None else repr(float(a.response_ms))
            writer.writerow([t.anchor, t.left, t.right, a.value, ms, a.source])


def read_answer_set(
    path: str | Path,
    items: ItemSet | None = None,
    provenance: str | None = None,
) -> AnswerSet:
    """Read the triplet record format back into an AnswerSet.

    When `items` is omitted the item count is inferred as max id + 1 (at
    least 3).  Raises ParseError with the offending line number on malformed
    rows.
    """
    path = Path(path)
    records: list[AnsweredTriplet] = []
    max_id = -1
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file, expected a header row", 1) from None
        if tuple(h.strip() for h in header) != ANSWER_FILE_HEADER:
            raise ParseError(f"bad header {header!r}", 1)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 6:
                raise ParseError(f"expected 6 fields, got {len(row)}", lineno)
            try:
                anchor, left, right = (int(row[0]), int(row[1]), int(row[2]))
                value = int(row[3])
                ms = None if row[4] == "" else float(row[4])
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
            try:
                rec = AnsweredTriplet(Triplet(anchor, left, right), Answer(value, ms, row[5]))
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
            records.append(rec)
            max_id = max(max_id, anchor, left, right)
    if items is None:
        items = ItemSet(max(3, max_id + 1))
    return AnswerSet(items, tuple(records), provenance if provenance is not None else str(path))
