"""Pairwise ranking: graph construction, the three rankers, prediction, IO."""

import numpy as np
import pytest
import scipy.sparse as sp

from triplab.core import (
    Answer,
    AnsweredTriplet,
    AnswerSet,
    ItemSet,
    ParseError,
    Triplet,
    enumerate_questions,
    pair_flat_index,
    pair_unflatten,
)
from triplab.errors import TriplabError
from triplab.oracle import NoisyOracle, VectorDataset, sample_unit_cube
from triplab.ranking import (
    RANKERS,
    RC_EPSILON,
    PairScoreTable,
    build_graph,
    majority_sign_matrix,
    predict_from_scores,
    predict_many_from_scores,
    rank_centrality,
    rank_counting,
    rank_serial,
    read_scores,
    export_scores,
    similarity_matvec,
)
from triplab.sampling import sample_random, sample_repeated


def _aset(items, rows):
    return AnswerSet(
        items,
        tuple(AnsweredTriplet(Triplet(a, l, r), Answer(v)) for a, l, r, v in rows),
    )


@pytest.fixture(scope="module")
def line6():
    """Six points on a line with distinct gaps, answered exhaustively."""
    coords = np.array([[0.0], [1.0], [2.5], [4.5], [7.0], [10.5]])
    ds = VectorDataset(ItemSet(6), coords)
    oracle = NoisyOracle(ds, 0.0, 0)
    return ds, oracle.answer_set(list(enumerate_questions(ds.items)))


class TestBuildGraph:
    def test_single_record_places_one_win(self):
        g = build_graph(_aset(ItemSet(4), [(0, 1, 2, 1)]))
        # value 1: pair (0,1) judged closer than pair (0,2)
        assert g.wins[pair_flat_index(0, 1, 4), pair_flat_index(0, 2, 4)] == 1
        assert g.wins.sum() == 1
        assert g.n_pairs == 6

    def test_value_zero_reverses_direction(self):
        g = build_graph(_aset(ItemSet(4), [(0, 1, 2, 0)]))
        assert g.wins[pair_flat_index(0, 2, 4), pair_flat_index(0, 1, 4)] == 1

    def test_duplicates_accumulate(self):
        g = build_graph(_aset(ItemSet(4), [(0, 1, 2, 1)] * 5 + [(0, 1, 2, 0)] * 2))
        i, j = pair_flat_index(0, 1, 4), pair_flat_index(0, 2, 4)
        assert g.wins[i, j] == 5
        assert g.wins[j, i] == 2
        assert g.comparisons[i, j] == 7
        assert g.n_records == 7

    def test_repeated_design_stacks_whole_groups(self):
        ds = sample_unit_cube(30, 3, 11)
        ans = NoisyOracle(ds, 0.0, 12).answer_set(sample_repeated(ds.items, 30, 3, 13))
        g = build_graph(ans)
        # noiseless repeats agree, so every observed edge carries l=3 wins
        # (barring a base-question collision, absent for this seed)
        assert set(g.wins.data.tolist()) == {3.0}

    def test_degrees_count_distinct_opponents(self):
        g = build_graph(_aset(ItemSet(4), [(0, 1, 2, 1), (0, 1, 2, 0), (0, 1, 3, 1)]))
        i = pair_flat_index(0, 1, 4)
        assert g.degrees[i] == 2


class TestCounting:
    def test_hand_computed_fractions(self):
        g = build_graph(
            _aset(ItemSet(4), [(0, 1, 2, 1)] * 3 + [(0, 1, 3, 0)])
        )
        t = rank_counting(g)
        assert t.scores[pair_flat_index(0, 1, 4)] == pytest.approx(3 / 4)
        assert t.scores[pair_flat_index(0, 2, 4)] == 0.0
        assert t.scores[pair_flat_index(0, 3, 4)] == 1.0

    def test_unplayed_pairs_get_half_prior(self):
        g = build_graph(_aset(ItemSet(4), [(0, 1, 2, 1)]))
        t = rank_counting(g)
        played = {pair_flat_index(0, 1, 4), pair_flat_index(0, 2, 4)}
        for flat in range(6):
            if flat not in played:
                assert t.scores[flat] == 0.5


class TestRankCentrality:
    def test_matches_dense_stationary_solve(self):
        # independent route: build the walk matrix from its definition and
        # take the eigenvector of eigenvalue one
        ds = VectorDataset(ItemSet(4), np.array([[0.0], [1.0], [2.5], [4.5]]))
        ans = NoisyOracle(ds, 0.2, 7).answer_set(list(enumerate_questions(ds.items)) * 3)
        g = build_graph(ans)
        N = g.n_pairs
        wins = g.wins.toarray()
        comp = wins + wins.T
        d_max = (comp > 0).sum(axis=1).max()
        P = np.zeros((N, N))
        for i in range(N):
            for j in range(N):
                if i != j and comp[i, j] > 0:
                    P[i, j] = (wins[j, i] + RC_EPSILON) / (
                        d_max * (comp[i, j] + 2 * RC_EPSILON)
                    )
            P[i, i] = 1.0 - P[i].sum()
        vals, vecs = np.linalg.eig(P.T)
        lead = np.argmin(np.abs(vals - 1.0))
        pi = np.real(vecs[:, lead])
        pi = pi / pi.sum()

        table = rank_centrality(g)
        assert "disconnected" not in table.flags
        assert np.abs(table.scores - pi).sum() < 1e-8

    def test_scores_form_distribution(self, line6):
        _, ans = line6
        table = rank_centrality(build_graph(ans))
        assert table.scores.sum() == pytest.approx(1.0, abs=1e-9)
        assert np.all(table.scores >= 0)

    def test_isolated_pairs_flag_disconnected(self):
        g = build_graph(_aset(ItemSet(5), [(0, 1, 2, 1)]))
        table = rank_centrality(g)
        assert table.flags == ("disconnected",)
        # untouched pair-states keep their share of the uniform start
        assert table.scores[pair_flat_index(3, 4, 5)] == pytest.approx(0.1)

    def test_empty_graph_uniform(self):
        table = rank_centrality(build_graph(AnswerSet(ItemSet(4), ())))
        assert np.allclose(table.scores, 1 / 6)
        assert table.flags == ("disconnected",)


class TestSerialRank:
    def test_sign_matrix_matches_hand_rule(self):
        g = build_graph(
            _aset(ItemSet(4), [(0, 1, 2, 1)] * 3 + [(0, 1, 2, 0)] + [(0, 1, 3, 0)])
        )
        C = majority_sign_matrix(g).toarray()
        i, j, k = (pair_flat_index(0, x, 4) for x in (1, 2, 3))
        assert C[i, j] == 1 and C[j, i] == -1  # 3:1 majority
        assert C[i, k] == -1 and C[k, i] == 1
        assert C[j, k] == 0

    def test_matvec_matches_dense_similarity(self, line6):
        _, ans = line6
        C = majority_sign_matrix(build_graph(ans))
        N = C.shape[0]
        Cd = C.toarray()
        S = 0.5 * (N * np.ones((N, N)) + Cd @ Cd.T)
        rng = np.random.default_rng(3)
        for _ in range(5):
            v = rng.normal(size=N)
            assert np.abs(similarity_matvec(C, v) - S @ v).max() < 1e-10

    def test_scores_match_dense_fiedler_vector(self, line6):
        # independent route: dense Laplacian of S, full eigendecomposition
        _, ans = line6
        g = build_graph(ans)
        C = majority_sign_matrix(g).toarray()
        N = C.shape[0]
        S = 0.5 * (N * np.ones((N, N)) + C @ C.T)
        L = np.diag(S.sum(axis=1)) - S
        vals, vecs = np.linalg.eigh(L)
        fiedler = vecs[:, np.argsort(vals)[1]]

        got = rank_serial(g).scores
        align = np.sign(fiedler @ got)
        assert np.abs(got - align * fiedler).max() < 1e-6

    def test_balanced_outcomes_no_signal(self):
        g = build_graph(_aset(ItemSet(3), [(0, 1, 2, 1), (0, 1, 2, 0)]))
        table = rank_serial(g)
        assert table.flags == ("no_signal",)
        assert np.all(table.scores == 0.5)

    def test_too_few_pairs_rejected(self):
        with pytest.raises(ValueError):
            rank_serial(build_graph(_aset(ItemSet(2), [])))

    def test_pair_ceiling_enforced(self):
        n = 460  # 105,570 pair states
        wins = sp.csr_matrix((105570, 105570))
        from triplab.ranking import PairComparisonGraph

        with pytest.raises(ValueError, match="ceiling"):
            rank_serial(PairComparisonGraph(n_items=n, wins=wins))


@pytest.mark.parametrize("ranker", RANKERS)
def test_exhaustive_noiseless_ranking_recovers_most_answers(line6, ranker):
    ds, ans = line6
    g = build_graph(ans)
    fn = {"counting": rank_counting, "rank_centrality": rank_centrality,
          "serial_rank": rank_serial}[ranker]
    table = fn(g)
    anchors, lefts, rights, values = ans.to_arrays()
    got = predict_many_from_scores(table, anchors, lefts, rights)
    assert np.mean(got == values) >= 0.85


class TestPredict:
    def test_higher_score_wins(self):
        scores = np.arange(6, dtype=float)
        table = PairScoreTable(4, scores, "counting")
        # pair (0,1)=flat 0 scores 0, pair (0,2)=flat 1 scores 1
        assert predict_from_scores(table, Triplet(0, 1, 2)).value == 0
        assert predict_from_scores(table, Triplet(0, 2, 1)).value == 1

    def test_tie_breaks_by_flat_index_antisymmetrically(self):
        table = PairScoreTable(5, np.full(10, 0.3), "counting")
        for t in (Triplet(0, 1, 2), Triplet(4, 3, 0), Triplet(2, 1, 3)):
            fwd = predict_from_scores(table, t).value
            rev = predict_from_scores(table, Triplet(t.anchor, t.right, t.left)).value
            assert fwd == 1 - rev

    def test_vector_matches_scalar(self, line6):
        _, ans = line6
        table = rank_counting(build_graph(ans))
        anchors, lefts, rights, _ = ans.to_arrays()
        vec = predict_many_from_scores(table, anchors, lefts, rights)
        for idx in range(0, len(anchors), 7):
            t = Triplet(int(anchors[idx]), int(lefts[idx]), int(rights[idx]))
            assert predict_from_scores(table, t).value == vec[idx]

    def test_source_names_method(self):
        table = PairScoreTable(4, np.zeros(6), "serial_rank")
        assert predict_from_scores(table, Triplet(0, 1, 2)).source == "ranking:serial_rank"


class TestScoreIO:
    def test_round_trip_exact(self, tmp_path, line6):
        _, ans = line6
        table = rank_centrality(build_graph(ans))
        path = tmp_path / "scores.csv"
        export_scores(path, table)
        back = read_scores(path)
        assert back.n_items == table.n_items
        assert np.array_equal(back.scores, table.scores)
        assert back.method == table.method

    def test_rows_enumerate_every_pair(self, tmp_path):
        export_scores(tmp_path / "s.csv", PairScoreTable(4, np.arange(6.0), "counting"))
        lines = (tmp_path / "s.csv").read_text().splitlines()
        assert lines[0] == "item_a,item_b,score,method"
        assert len(lines) == 7
        pairs = [tuple(map(int, ln.split(",")[:2])) for ln in lines[1:]]
        assert pairs == [pair_unflatten(f, 4) for f in range(6)]

    @pytest.mark.parametrize(
        "body",
        [
            "item_a,score\n0,1\n",
            "item_a,item_b,score,method\n0,1,nope,counting\n",
            "item_a,item_b,score,method\n0,1,0.5\n",
            "item_a,item_b,score,method\n",
        ],
    )
    def test_malformed_rejected(self, tmp_path, body):
        path = tmp_path / "bad.csv"
        path.write_text(body)
        with pytest.raises((ParseError, ValueError)):
            read_scores(path)

    def test_missing_pair_detected(self, tmp_path, line6):
        _, ans = line6
        table = rank_counting(build_graph(ans))
        path = tmp_path / "scores.csv"
        export_scores(path, table)
        lines = path.read_text().splitlines()
        path.write_text("\n".join(lines[:4] + lines[5:]) + "\n")
        with pytest.raises(ParseError, match="misses"):
            read_scores(path)


def test_errors_share_base_class():
    assert issubclass(ParseError, TriplabError)
