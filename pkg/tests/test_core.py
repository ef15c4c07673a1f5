"""Domain types: triplets, canonical records, pair indexing, file format."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from triplab.core import (
    ANSWER_FILE_HEADER,
    Answer,
    AnsweredTriplet,
    AnswerSet,
    ItemSet,
    Triplet,
    answer_set_from_arrays,
    canonicalize,
    count_questions,
    enumerate_questions,
    merge_answer_sets,
    n_pairs,
    pair_flat_index,
    pair_flat_index_many,
    pair_unflatten,
    pair_unflatten_many,
    read_answer_set,
    write_answer_set,
)
from triplab.errors import ParseError


def test_item_set_validation():
    with pytest.raises(ValueError):
        ItemSet(2)
    with pytest.raises(ValueError):
        ItemSet(4, labels=("a", "b"))
    s = ItemSet(3, labels=("a", "b", "c"))
    assert s.label_of(1) == "b"
    assert ItemSet(3).label_of(2) == "2"


def test_triplet_distinctness():
    with pytest.raises(ValueError):
        Triplet(1, 1, 2)
    with pytest.raises(ValueError):
        Triplet(0, 1, -1)
    t = Triplet(2, 5, 3)
    assert t.question_key() == (2, 3, 5)
    assert Triplet(2, 3, 5).question_key() == t.question_key()


def test_answer_validation():
    with pytest.raises(ValueError):
        Answer(2)
    with pytest.raises(ValueError):
        Answer(1, response_ms=-1.0)
    assert Answer(0).response_ms is None


@given(st.integers(0, 40), st.integers(0, 40), st.integers(0, 40), st.integers(0, 1))
def test_canonicalize_involution(a, l, r, v):
    if len({a, l, r}) != 3:
        return
    rec = AnsweredTriplet(Triplet(a, l, r), Answer(v, 123.0, "src"))
    canon = canonicalize(rec)
    assert canon.triplet.left < canon.triplet.right
    assert canonicalize(canon) == canon
    # swapping sides and flipping the value lands on the same canonical record
    swapped = AnsweredTriplet(Triplet(a, r, l), Answer(1 - v, 123.0, "src"))
    assert canonicalize(swapped) == canon


def test_canonicalize_preserves_metadata():
    rec = AnsweredTriplet(Triplet(0, 3, 1), Answer(1, 55.0, "tag"))
    canon = canonicalize(rec)
    assert canon.answer.response_ms == 55.0
    assert canon.answer.source == "tag"
    assert canon.answer.value == 0


class TestPairIndex:
    @given(st.integers(2, 60), st.data())
    def test_bijection(self, n, data):
        flat = data.draw(st.integers(0, n_pairs(n) - 1))
        a, b = pair_unflatten(flat, n)
        assert 0 <= a < b < n
        assert pair_flat_index(a, b, n) == flat
        assert pair_flat_index(b, a, n) == flat  # order-insensitive

    def test_lexicographic_order(self):
        seen = [pair_unflatten(f, 5) for f in range(n_pairs(5))]
        assert seen == sorted(seen)
        assert seen[0] == (0, 1)
        assert seen[-1] == (3, 4)

    def test_vectorized_matches_scalar(self):
        n = 9
        a, b = np.triu_indices(n, k=1)
        flat = pair_flat_index_many(a, b, n)
        assert [pair_flat_index(int(x), int(y), n) for x, y in zip(a, b)] == flat.tolist()
        ra, rb = pair_unflatten_many(flat, n)
        assert np.array_equal(ra, a)
        assert np.array_equal(rb, b)

    def test_errors(self):
        with pytest.raises(ValueError):
            pair_flat_index(3, 3, 5)
        with pytest.raises(ValueError):
            pair_flat_index(0, 5, 5)
        with pytest.raises(ValueError):
            pair_unflatten(n_pairs(5), 5)


def test_question_enumeration_count():
    for n in (3, 4, 7):
        qs = list(enumerate_questions(n))
        assert len(qs) == count_questions(n) == n * n_pairs(n - 1)
        assert len({q.question_key() for q in qs}) == len(qs)
        assert all(q.left < q.right for q in qs)


def test_answer_set_arrays_and_bounds(items5):
    aset = answer_set_from_arrays(items5, [0, 1], [1, 2], [2, 3], [1, 0], source="s")
    anchors, lefts, rights, values = aset.to_arrays()
    assert anchors.tolist() == [0, 1]
    assert values.tolist() == [1, 0]
    assert not anchors.flags.writeable
    with pytest.raises(ValueError):
        answer_set_from_arrays(items5, [0], [1], [5], [1])


def test_merge_answer_sets(items5):
    a = answer_set_from_arrays(items5, [0], [1], [2], [1], provenance="a")
    b = answer_set_from_arrays(items5, [1], [2], [3], [0], provenance="b")
    merged = merge_answer_sets([a, b])
    assert len(merged) == 2
    assert merged.provenance == "a+b"
    with pytest.raises(ValueError):
        merge_answer_sets([])
    with pytest.raises(ValueError):
        merge_answer_sets([a, answer_set_from_arrays(ItemSet(7), [0], [1], [2], [1])])


def test_answer_file_round_trip(tmp_path, items5):
    records = (
        AnsweredTriplet(Triplet(0, 2, 1), Answer(1, 345.5, "subject1")),
        AnsweredTriplet(Triplet(3, 0, 4), Answer(0, None, "")),
    )
    aset = AnswerSet(items5, records, "prov")
    path = tmp_path / "answers.csv"
    write_answer_set(path, aset)
    header = path.read_text().splitlines()[0]
    assert tuple(header.split(",")) == ANSWER_FILE_HEADER
    back = read_answer_set(path, items5, provenance="prov")
    assert back.records == records
    assert back.provenance == "prov"
    # items inferred when omitted
    assert read_answer_set(path).items.n == 5


@pytest.mark.parametrize(
    "body",
    [
        "",  # empty file
        "anchor,left,right\n",  # bad header
        "anchor,left,right,answer,response_ms,source\n0,1\n",  # short row
        "anchor,left,right,answer,response_ms,source\n0,1,x,1,,s\n",  # non-int
        "anchor,left,right,answer,response_ms,source\n0,1,1,1,,s\n",  # degenerate triplet
        "anchor,left,right,answer,response_ms,source\n0,1,2,7,,s\n",  # bad value
    ],
)
def test_answer_file_parse_errors(tmp_path, body):
    path = tmp_path / "bad.csv"
    path.write_text(body)
    with pytest.raises(ParseError) as err:
        read_answer_set(path)
    assert err.value.line is not None
