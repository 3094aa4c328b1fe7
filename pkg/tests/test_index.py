import math
import random

import pytest
from hypothesis import assume, given, settings, strategies as st

from causalmem.index import (
    CorpusIndexError,
    build_index,
    index_corpus,
    load_index,
    persist_index,
    score,
    top_k,
)
from causalmem.text import build_vocab


def naive_bm25(docs, query, doc_id, k1=1.2, b=0.75):
    """Textbook BM25 straight from raw documents, for cross-checking."""
    n = len(docs)
    avdl = sum(len(d) for d in docs) / n
    doc = docs[doc_id]
    total = 0.0
    for term in sorted(set(query) - {0, 1}):
        tf = doc.count(term)
        if tf == 0:
            continue
        df = sum(1 for d in docs if term in d)
        idf = math.log((n - df + 0.5) / (df + 0.5) + 1.0)
        total += idf * (tf * (k1 + 1.0)) / (tf + k1 * (1.0 - b + b * len(doc) / avdl))
    return total


def brute_ranking(index, query):
    scored = [(score(index, query, d), d) for d in range(index.doc_count)]
    scored.sort(key=lambda sd: (-sd[0], sd[1]))
    return [(d, s) for s, d in scored if s > 0]


def test_build_index_example():
    idx = build_index([[3, 4], [3, 3, 5]])
    assert idx.postings == {3: [(0, 1), (1, 2)], 4: [(0, 1)], 5: [(1, 1)]}
    assert idx.doc_lengths == [2, 3]
    assert idx.doc_count == 2
    assert idx.avg_doc_length == 2.5


def test_build_index_singletons():
    idx = build_index([[7]])
    assert idx.postings == {7: [(0, 1)]}
    assert idx.avg_doc_length == 1.0
    assert build_index([[4, 4, 4]]).postings == {4: [(0, 3)]}


def test_build_index_errors():
    with pytest.raises(CorpusIndexError, match="empty corpus"):
        build_index([])
    with pytest.raises(CorpusIndexError, match="line 2"):
        build_index([[3], [], [4]])
    with pytest.raises(CorpusIndexError, match="line 2"):
        index_corpus(["rain falls", "...", "flood"])


def test_unknown_words_are_not_posted():
    idx = build_index([[1, 3], [1, 4]])
    assert 1 not in idx.postings
    assert idx.doc_lengths == [2, 2]
    assert top_k(idx, [1], 5) == []


def test_score_hand_example():
    # d0 = [a, b], d1 = [a, a, c] with a=3, b=4, c=5
    idx = build_index([[3, 4], [3, 3, 5]])
    expected = math.log(2) * (1 * 2.2) / (1 + 1.2 * (0.25 + 0.75 * 3 / 2.5))
    assert score(idx, [5], 1) == pytest.approx(expected, rel=1e-12)
    assert score(idx, [5], 1) == pytest.approx(0.641, abs=5e-4)
    assert score(idx, [5], 0) == 0.0
    assert score(idx, [1, 9], 0) == score(idx, [1, 9], 1) == 0.0


def test_duplicate_query_terms_count_once():
    idx = build_index([[3, 4], [3, 3, 5]])
    assert score(idx, [5, 5, 5], 1) == score(idx, [5], 1)


def test_score_out_of_range():
    idx = build_index([[3]])
    with pytest.raises(CorpusIndexError):
        score(idx, [3], 1)


def test_top_k_fewer_matches_than_k():
    idx = build_index([[3, 4], [3, 3, 5]])
    hits = top_k(idx, [5], 3)
    assert [h.doc_id for h in hits] == [1]
    assert hits[0].score > 0


def test_top_k_tie_break_by_doc_id():
    idx = build_index([[6], [3, 4], [4, 3], [5]])
    hits = top_k(idx, [3, 4], 5)
    assert [h.doc_id for h in hits] == [1, 2]
    assert hits[0].score == hits[1].score


def test_top_k_rejects_bad_k():
    with pytest.raises(ValueError):
        top_k(build_index([[3]]), [3], 0)


def random_corpus(rng, max_docs=200, vocab=50):
    n = rng.randint(1, max_docs)
    return [[rng.randrange(3, vocab) for _ in range(rng.randint(1, 12))] for _ in range(n)]


def test_top_k_matches_brute_force_and_naive_oracle():
    rng = random.Random(1234)
    for _ in range(30):
        docs = random_corpus(rng)
        idx = build_index(docs)
        for _ in range(5):
            q = [rng.randrange(1, 50) for _ in range(rng.randint(1, 6))]
            k = rng.randint(1, len(docs) + 2)
            ranked = brute_ranking(idx, q)
            assert [(h.doc_id, h.score) for h in top_k(idx, q, k)] == ranked[:k]
            for d in range(len(docs)):
                assert score(idx, q, d) == pytest.approx(naive_bm25(docs, q, d), rel=1e-12, abs=0)


def test_unrelated_document_can_reorder_bm25():
    # a new document moves N and the average length, which reweights terms
    docs = [[3, 4, 4], [6, 4, 4, 4, 4, 4], [5, 3, 6, 4, 3], [4, 6, 6, 4]]
    before = [h.doc_id for h in top_k(build_index(docs), [3, 4], 10)]
    after = [h.doc_id for h in top_k(build_index(docs + [[9] * 7]), [3, 4], 10)]
    assert before == [2, 0, 1, 3]
    assert after == [0, 2, 1, 3]


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_unrelated_document_keeps_matches(data):
    docs = data.draw(st.lists(st.lists(st.integers(3, 15), min_size=1, max_size=6), min_size=1, max_size=20))
    q = data.draw(st.lists(st.integers(3, 15), min_size=1, max_size=4))
    extra = data.draw(st.lists(st.integers(16, 20), min_size=1, max_size=6))
    before = top_k(build_index(docs), q, len(docs) + 1)
    after = top_k(build_index(docs + [extra]), q, len(docs) + 1)
    assert {h.doc_id for h in after} == {h.doc_id for h in before}


@settings(max_examples=60, deadline=None)
@given(st.lists(st.lists(st.integers(3, 8), min_size=1, max_size=6), min_size=1, max_size=20), st.integers(3, 8))
def test_unrelated_average_length_document_keeps_single_term_order(docs, term):
    total = sum(len(d) for d in docs)
    assume(total % len(docs) == 0)
    extra = [99] * (total // len(docs))
    before = [h.doc_id for h in top_k(build_index(docs), [term], len(docs))]
    after = [h.doc_id for h in top_k(build_index(docs + [extra]), [term], len(docs))]
    assert after == before


@settings(max_examples=40, deadline=None)
@given(st.lists(st.lists(st.integers(3, 12), min_size=1, max_size=5), min_size=1, max_size=15),
       st.lists(st.integers(0, 14), min_size=1, max_size=5))
def test_score_is_pure_and_nonnegative(docs, q):
    idx = build_index(docs)
    for d in range(len(docs)):
        s = score(idx, q, d)
        assert s >= 0.0
        assert score(idx, q, d) == s


@given(st.lists(st.lists(st.integers(3, 12), min_size=1, max_size=5), min_size=1, max_size=15))
def test_postings_invariants(docs):
    idx = build_index(docs)
    tf_sum = [0] * idx.doc_count
    for plist in idx.postings.values():
        ids = [d for d, _ in plist]
        assert ids == sorted(set(ids))
        for d, tf in plist:
            tf_sum[d] += tf
    assert all(s <= n for s, n in zip(tf_sum, idx.doc_lengths))
    assert idx.doc_count == len(idx.doc_lengths) == len(docs)


def test_persist_round_trip_and_determinism(tmp_path):
    lines = ["Rain fell on the hills", "The flood came after rain", "Dry wind, no rain at all", "Cats sleep"]
    idx = index_corpus(lines)
    persist_index(idx, tmp_path / "a")
    persist_index(idx, tmp_path / "b")
    for name in ("vocab.txt", "corpus.txt", "postings.tsv", "doclens.tsv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    loaded = load_index(tmp_path / "a")
    assert loaded.postings == idx.postings
    assert loaded.doc_lengths == idx.doc_lengths
    assert loaded.documents == idx.documents
    assert loaded.vocab == idx.vocab
    assert loaded.texts == lines
    for q in ([idx.vocab.lookup("rain")], [idx.vocab.lookup("flood"), idx.vocab.lookup("rain")]):
        assert top_k(loaded, q, 3) == top_k(idx, q, 3)


def test_postings_file_format(tmp_path):
    vocab = build_vocab([["a", "b", "c"]])
    idx = build_index([[3, 4], [3, 3, 5]], vocab=vocab)
    persist_index(idx, tmp_path)
    assert (tmp_path / "postings.tsv").read_text() == "3\t0:1,1:2\n4\t0:1\n5\t1:1\n"
    assert (tmp_path / "doclens.tsv").read_text() == "0\t2\n1\t3\n"
    assert (tmp_path / "corpus.txt").read_text() == "a b\na a c\n"


def test_load_errors_name_the_file(tmp_path):
    with pytest.raises(CorpusIndexError, match="vocab.txt"):
        load_index(tmp_path)
    idx = index_corpus(["rain falls", "flood rises"])
    persist_index(idx, tmp_path)
    (tmp_path / "postings.tsv").write_text("3\tbogus\n")
    with pytest.raises(CorpusIndexError, match="postings.tsv"):
        load_index(tmp_path)
    persist_index(idx, tmp_path)
    (tmp_path / "doclens.tsv").unlink()
    with pytest.raises(CorpusIndexError, match="doclens.tsv"):
        load_index(tmp_path)
