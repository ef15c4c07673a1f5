"""Ground-truth simulation: point clouds, vector ingestion, and noisy answers.

Triplet questions are answered from Euclidean distances between item
coordinates.  Exact distance ties are broken deterministically and
antisymmetrically by comparing flat pair indices, so the symmetry relation
t(x,y,z) = 1 - t(x,z,y) holds even on ties.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import (
    Answer,
    AnswerSet,
    ItemSet,
    Triplet,
    answer_set_from_arrays,
    pair_flat_index_many,
)
from .errors import ParseError
from .rng import substream


@dataclass(frozen=True)
class VectorDataset:
    """Items with coordinates in R^D; distances between rows are ground truth."""

    items: ItemSet
    coords: np.ndarray

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=np.float64)
        if coords.ndim != 2:
            raise ValueError(f"coords must be 2-D, got shape {coords.shape}")
        if coords.shape[0] != self.items.n:
            raise ValueError(f"{coords.shape[0]} coordinate rows for {self.items.n} items")
        if not np.all(np.isfinite(coords)):
            raise ValueError("coords contain non-finite values")
        coords = coords.copy()
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)

    @property
    def n(self) -> int:
        return self.items.n

    @property
    def dim(self) -> int:
        return self.coords.shape[1]


def sample_unit_cube(n: int, d: int, seed: int) -> VectorDataset:
    """n i.i.d. uniform points in [0,1]^d, deterministic given the seed."""
    if n < 3:
        raise ValueError(f"need at least 3 items, got {n}")
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    coords = substream(seed, "points").random((n, d))
    return VectorDataset(ItemSet(n), coords)


def judge_triplets(
    coords: np.ndarray,
    anchors: np.ndarray,
    lefts: np.ndarray,
    rights: np.ndarray,
) -> np.ndarray:
    """Answer triplets from a coordinate table: 1 iff anchor is closer to left.

    Exact ties go to whichever candidate pair has the smaller flat pair
    index, which is antisymmetric under a left/right swap.
    """
    anchors = np.asarray(anchors)
    lefts = np.asarray(lefts)
    rights = np.asarray(rights)
    dl = _sq_dist(coords, anchors, lefts)
    dr = _sq_dist(coords, anchors, rights)
    n = coords.shape[0]
    values = (dl < dr).astype(np.int64)
    tied = dl == dr
    if np.any(tied):
        fl = pair_flat_index_many(anchors[tied], lefts[tied], n)
        fr = pair_flat_index_many(anchors[tied], rights[tied], n)
        values[tied] = (fl < fr).astype(np.int64)
    return values


def _sq_dist(coords: np.ndarray, i: np.ndarray, j: np.ndarray) -> np.ndarray:
    diff = coords[i] - coords[j]
    return np.einsum("ij,ij->i", diff, diff)


def true_answer(ds: VectorDataset, t: Triplet) -> Answer:
    """Noiseless Euclidean answer to a single triplet."""
    value = judge_triplets(
        ds.coords, np.asarray([t.anchor]), np.asarray([t.left]), np.asarray([t.right])
    )
    return Answer(int(value[0]), source="truth")


def true_answers(ds: VectorDataset, anchors, lefts, rights) -> np.ndarray:
    return judge_triplets(ds.coords, anchors, lefts, rights)


class NoisyOracle:
    """Answers triplets from a dataset, flipping each answer independently.

    The flip probability must stay below 0.5; at and above it the answers
    carry no (or inverted) information.  Repeated queries of the same triplet
    re-sample the flip independently.  One oracle instance is meant for one
    task at a time; run independent oracles (distinct seeds) in parallel.
    """

    def __init__(self, dataset: VectorDataset, noise_p: float, seed: int):
        if not (0.0 <= noise_p < 0.5):
            raise ValueError(f"noise_p must be in [0, 0.5), got {noise_p}")
        self.dataset = dataset
        self.noise_p = float(noise_p)
        self.seed = int(seed)
        self._rng = substream(seed, "noise")

    @property
    def source(self) -> str:
        return f"oracle(seed={self.seed},p={self.noise_p:g})"

    def answer(self, t: Triplet) -> Answer:
        value = int(self.answer_many([t.anchor], [t.left], [t.right])[0])
        return Answer(value, source=self.source)

    def answer_many(self, anchors, lefts, rights) -> np.ndarray:
        anchors = np.asarray(anchors)
        values = true_answers(self.dataset, anchors, np.asarray(lefts), np.asarray(rights))
        flips = self._rng.random(anchors.shape[0]) < self.noise_p
        return np.where(flips, 1 - values, values)

    def answer_set(self, triplets: Sequence[Triplet], provenance: str = "") -> AnswerSet:
        anchors = np.fromiter((t.anchor for t in triplets), dtype=np.int64, count=len(triplets))
        lefts = np.fromiter((t.left for t in triplets), dtype=np.int64, count=len(triplets))
        rights = np.fromiter((t.right for t in triplets), dtype=np.int64, count=len(triplets))
        values = self.answer_many(anchors, lefts, rights)
        return answer_set_from_arrays(
            self.dataset.items, anchors, lefts, rights, values,
            source=self.source, provenance=provenance or self.source,
        )


def noisy_answer(oracle: NoisyOracle, t: Triplet) -> Answer:
    return oracle.answer(t)


# ---------------------------------------------------------------------------
# Delimited vector ingestion / export
# ---------------------------------------------------------------------------

def ingest_vectors(path: str | Path, delimiter: str = ",") -> VectorDataset:
    """Read a rectangular numeric table, optionally with a leading label column.

    The first column is treated as labels when its first value does not parse
    as a number.  Ragged rows and non-numeric cells raise ParseError with the
    line number.
    """
    path = Path(path)
    rows: list[list[str]] = []
    with path.open(newline="") as fh:
        for row in csv.reader(fh, delimiter=delimiter):
            if row:
                rows.append(row)
    if not rows:
        raise ParseError("empty file", 1)
    has_labels = not _is_number(rows[0][0])
    width = len(rows[0])
    labels: list[str] = []
    data: list[list[float]] = []
    for lineno, row in enumerate(rows, start=1):
        if len(row) != width:
            raise ParseError(f"expected {width} fields, got {len(row)}", lineno)
        cells = row[1:] if has_labels else row
        if has_labels:
            labels.append(row[0])
        try:
            data.append([float(c) for c in cells])
        except ValueError:
            bad = next(c for c in cells if not _is_number(c))
            raise ParseError(f"non-numeric cell {bad!r}", lineno) from None
    coords = np.asarray(data, dtype=np.float64)
    if not np.all(np.isfinite(coords)):
        raise ParseError("non-finite value in table", 1)
    items = ItemSet(len(rows), labels=tuple(labels) if has_labels else None)
    return VectorDataset(items, coords)


def export_vectors(path: str | Path, ds: VectorDataset, delimiter: str = ",") -> None:
    """Write the ingestion format back out; floats round-trip exactly."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, delimiter=delimiter)
        for i in range(ds.n):
            row: list[str] = []
            if ds.items.labels is not None:
                row.append(ds.items.labels[i])
            row.extend(repr(float(v)) for v in ds.coords[i])
            writer.writerow(row)


def _is_number(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False
