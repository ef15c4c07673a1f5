"""Ranking methods over the pair-comparison graph induced by triplet answers.

Each answered triplet (a; y, z) is one comparison between the item pairs
{a, y} and {a, z}: the pair judged closer wins.  Ranking the C(n, 2) pairs
by estimated closeness then answers any triplet by comparing the two pair
scores.  Three estimators are provided:

- counting: win fraction per pair, 0.5 prior for uncompared pairs
- Rank Centrality: stationary distribution of a random walk that moves
  from the farther pair toward the closer pair
- SerialRank: Fiedler vector of the similarity Laplacian built from the
  sign pattern of majority outcomes

Scores are orientation-fixed project-wide: higher score = judged closer.
Score ties fall back to the flat-pair-index rule used by the oracle, so
prediction stays antisymmetric under left/right swaps.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import connected_components

from .core import AnswerSet, Triplet, n_pairs, pair_flat_index, pair_flat_index_many, pair_unflatten_many
from .errors import IterationLimitError, ParseError
from .rng import substream

RANKERS = ("counting", "rank_centrality", "serial_rank")

RC_EPSILON = 1e-8
RC_TOL = 1e-10
RC_MAX_ITERS = 100_000
SR_TOL = 1e-8
SR_MAX_ITERS = 100_000
SR_MAX_PAIRS = 100_000
DENSE_CEILING = 2000  # never materialize N x N dense structures above this


@dataclass(frozen=True)
class PairComparisonGraph:
    """Directed multigraph over flat pair indices; wins[i, j] counts
    comparisons in which pair i was judged the smaller distance against j."""

    n_items: int
    wins: sp.csr_matrix

    def __post_init__(self):
        N = n_pairs(self.n_items)
        if self.wins.shape != (N, N):
            raise ValueError(f"wins matrix must be {N} x {N}, got {self.wins.shape}")

    @property
    def n_pairs(self) -> int:
        return self.wins.shape[0]

    @property
    def n_records(self) -> int:
        return int(self.wins.sum())

    @cached_property
    def comparisons(self) -> sp.csr_matrix:
        """Symmetric comparison counts: wins + wins.T."""
        return (self.wins + self.wins.T).tocsr()

    @cached_property
    def degrees(self) -> np.ndarray:
        """Number of distinct opponents per pair."""
        return np.diff(self.comparisons.indptr)


@dataclass(frozen=True)
class PairScoreTable:
    """One finite closeness score per flat pair index (higher = closer)."""

    n_items: int
    scores: np.ndarray
    method: str
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        if scores.shape != (n_pairs(self.n_items),):
            raise ValueError(
                f"need {n_pairs(self.n_items)} scores for n={self.n_items}, got {scores.shape}"
            )
        if not np.all(np.isfinite(scores)):
            raise ValueError("pair scores must be finite")
        scores = scores.copy()
        scores.setflags(write=False)
        object.__setattr__(self, "scores", scores)


def build_graph(records: AnswerSet) -> PairComparisonGraph:
    n = records.items.n
    N = n_pairs(n)
    anchors, lefts, rights, values = records.to_arrays()
    fl = pair_flat_index_many(anchors, lefts, n)
    fr = pair_flat_index_many(anchors, rights, n)
    winners = np.where(values == 1, fl, fr)
    losers = np.where(values == 1, fr, fl)
    wins = sp.coo_matrix(
        (np.ones(len(winners)), (winners, losers)), shape=(N, N)
    ).tocsr()
    wins.sum_duplicates()
    return PairComparisonGraph(n_items=n, wins=wins)


def rank_counting(g: PairComparisonGraph) -> PairScoreTable:
    """Win fraction per pair; pairs that never appeared score the 0.5 prior."""
    won = np.asarray(g.wins.sum(axis=1)).ravel()
    played = np.asarray(g.comparisons.sum(axis=1)).ravel()
    scores = won / np.maximum(played, 1.0)
    scores[played == 0] = 0.5
    return PairScoreTable(g.n_items, scores, "counting")


def rank_centrality(g: PairComparisonGraph, epsilon: float = RC_EPSILON) -> PairScoreTable:
    """Stationary distribution of the comparison random walk.

    The walk leaves pair i for pair j with probability
    (losses of i to j) / (d_max * comparisons(i, j)); epsilon is added to
    both win directions of every observed edge so each undirected component
    forms a single aperiodic recurrent class.  On a disconnected graph the
    result is the limit from a uniform start: per-component stationary
    distributions weighted by component size, and the table is flagged.
    """
    N = g.n_pairs
    comp = g.comparisons
    rows, cols = comp.nonzero()
    flags: tuple[str, ...] = ()
    n_components, _ = connected_components(comp, directed=False)
    if n_components > 1:
        flags = ("disconnected",)
    if len(rows) == 0:
        return PairScoreTable(g.n_items, np.full(N, 1.0 / N), "rank_centrality", flags)

    d_max = int(g.degrees.max())
    losses = np.asarray(g.wins.T.tocsr()[rows, cols]).ravel() + epsilon
    totals = np.asarray(comp[rows, cols]).ravel() + 2.0 * epsilon
    probs = losses / (d_max * totals)
    P_off = sp.csr_matrix((probs, (rows, cols)), shape=(N, N))
    self_loop = 1.0 - np.asarray(P_off.sum(axis=1)).ravel()

    pi = np.full(N, 1.0 / N)
    PT = P_off.T.tocsr()
    # Pairs that never lost keep only epsilon-scale outflow, so once every
    # data-scale mode has died the change stalls near epsilon instead of
    # falling to RC_TOL; treat such a stall as converged.
    window: list[float] = []
    for it in range(RC_MAX_ITERS):
        nxt = PT @ pi + self_loop * pi
        change = np.abs(nxt - pi).sum()
        pi = nxt
        if change < RC_TOL:
            break
        window.append(change)
        if len(window) > 100:
            window.pop(0)
            if change < epsilon and change > 0.5 * window[0]:
                break
    else:
        raise IterationLimitError(
            f"rank centrality power iteration did not reach {RC_TOL} in {RC_MAX_ITERS} steps"
        )
    return PairScoreTable(g.n_items, pi, "rank_centrality", flags)


def majority_sign_matrix(g: PairComparisonGraph) -> sp.csr_matrix:
    """Sign of net wins per ordered pair of pair-states."""
    C = (g.wins - g.wins.T).sign().tocsr()
    C.eliminate_zeros()
    return C


def similarity_matvec(C: sp.csr_matrix, v: np.ndarray) -> np.ndarray:
    """Apply S = (N*J + C @ C.T) / 2 without materializing it."""
    N = C.shape[0]
    return 0.5 * (N * v.sum() + C @ (C.T @ v))


def rank_serial(g: PairComparisonGraph) -> PairScoreTable:
    """Fiedler-vector scores from the majority-outcome similarity matrix.

    C holds the sign of net wins; the similarity S = (N*J + C @ C.T) / 2 is
    applied matrix-free.  The Fiedler vector of its Laplacian L is the top
    eigenvector of the shifted operator c*I - L after deflating the known
    all-ones null direction; a Lanczos solve on that operator (tolerance
    SR_TOL) extracts it.  The global sign is chosen so the induced order
    agrees with the majority of observed comparisons.
    """
    N = g.n_pairs
    if N < 2:
        raise ValueError("serial ranking needs at least two pairs")
    if N > SR_MAX_PAIRS:
        raise ValueError(f"{N} pairs exceeds the matrix-free ceiling {SR_MAX_PAIRS}")
    C = majority_sign_matrix(g)
    if C.nnz == 0:
        return PairScoreTable(g.n_items, np.full(N, 0.5), "serial_rank", ("no_signal",))

    deg = similarity_matvec(C, np.ones(N))
    shift = 2.0 * deg.max() + 1.0

    def deflated_matvec(v: np.ndarray) -> np.ndarray:
        # (shift*I - L) v minus the ones-direction component, so the
        # Fiedler pair becomes the dominant one
        w = shift * v - deg * v + similarity_matvec(C, v)
        return w - w.mean()

    op = spla.LinearOperator((N, N), matvec=deflated_matvec, dtype=np.float64)
    v0 = substream(0, "serialrank").standard_normal(N)
    v0 -= v0.mean()
    try:
        _, vecs = spla.eigsh(op, k=1, which="LA", v0=v0, tol=SR_TOL, maxiter=SR_MAX_ITERS)
    except spla.ArpackNoConvergence as ex:
        raise IterationLimitError(
            f"serial ranking eigen solve did not reach {SR_TOL} in {SR_MAX_ITERS} iterations"
        ) from ex
    v = vecs[:, 0]
    v = v - v.mean()

    agree = _order_agreement(C, v)
    if agree < 0:
        v = -v
    return PairScoreTable(g.n_items, v, "serial_rank")


def _order_agreement(C: sp.csr_matrix, v: np.ndarray) -> float:
    """Net count of majority outcomes ordered consistently by v."""
    rows, cols = C.nonzero()
    signs = np.asarray(C[rows, cols]).ravel()
    return float(np.sum(signs * np.sign(v[rows] - v[cols])))


def predict_from_scores(table: PairScoreTable, t: Triplet) -> "Answer":
    from .core import Answer

    value = predict_many_from_scores(
        table, np.asarray([t.anchor]), np.asarray([t.left]), np.asarray([t.right])
    )
    return Answer(int(value[0]), source=f"ranking:{table.method}")


def predict_many_from_scores(table: PairScoreTable, anchors, lefts, rights) -> np.ndarray:
    """1 iff score(anchor,left) > score(anchor,right); ties by flat index."""
    anchors = np.asarray(anchors)
    lefts = np.asarray(lefts)
    rights = np.asarray(rights)
    fl = pair_flat_index_many(anchors, lefts, table.n_items)
    fr = pair_flat_index_many(anchors, rights, table.n_items)
    sl = table.scores[fl]
    sr = table.scores[fr]
    values = (sl > sr).astype(np.int64)
    tied = sl == sr
    if np.any(tied):
        values[tied] = (fl[tied] < fr[tied]).astype(np.int64)
    return values


def export_scores(path: str | Path, table: PairScoreTable) -> None:
    """Write `item_a,item_b,score,method` rows for every pair."""
    flat = np.arange(n_pairs(table.n_items))
    a, b = pair_unflatten_many(flat, table.n_items)
    with Path(path).open("w") as fh:
        fh.write("item_a,item_b,score,method\n")
        for i in range(len(flat)):
            fh.write(f"{a[i]},{b[i]},{float(table.scores[i])!r},{table.method}\n")


def read_scores(path: str | Path) -> PairScoreTable:
    """Read an `export_scores` file back into a PairScoreTable."""
    with Path(path).open() as fh:
        header = next(fh, "").strip()
        if header != "item_a,item_b,score,method":
            raise ParseError(f"bad header {header!r}", 1)
        rows = []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            if len(cells) != 4:
                raise ParseError(f"expected 4 fields, got {len(cells)}", lineno)
            rows.append((int(cells[0]), int(cells[1]), float(cells[2]), cells[3], lineno))
    if not rows:
        raise ParseError("no score rows", 2)
    n_items = max(b for _, b, _, _, _ in rows) + 1
    scores = np.full(n_pairs(n_items), np.nan)
    for a, b, score, _, lineno in rows:
        try:
            scores[pair_flat_index(a, b, n_items)] = score
        except ValueError as ex:
            raise ParseError(str(ex), lineno) from None
    if np.isnan(scores).any():
        missing = int(np.isnan(scores).sum())
        raise ParseError(f"score table misses {missing} of {scores.shape[0]} pairs", 2)
    return PairScoreTable(n_items, scores, rows[0][3])
