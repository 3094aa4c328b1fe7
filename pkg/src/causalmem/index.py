"""Inverted index over corpus sentences with exact BM25 top-k retrieval.

One corpus line is one document, and therefore one candidate memory slot.
PAD and UNK ids are never posted: an out-of-vocabulary query word must not
match every document that happens to contain some other unknown word.
"""

from __future__ import annotations

import heapq
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from causalmem.text import PAD_ID, UNK_ID, Vocabulary, build_vocab, encode, tokenize

K1 = 1.2
B = 0.75

VOCAB_FILE = "vocab.txt"
CORPUS_FILE = "corpus.txt"
POSTINGS_FILE = "postings.tsv"
DOCLENS_FILE = "doclens.tsv"

_UNPOSTED = (PAD_ID, UNK_ID)


class CorpusIndexError(ValueError):
    """Raised for malformed corpora and unreadable index directories."""


@dataclass(frozen=True)
class ScoredCandidate:
    doc_id: int
    score: float


@dataclass
class InvertedIndex:
    postings: dict[int, list[tuple[int, int]]]
    doc_lengths: list[int]
    documents: list[list[int]]
    vocab: Vocabulary | None = None
    texts: list[str] | None = None
    _tf: list[dict[int, int]] = field(init=False, repr=False)

    def __post_init__(self):
        if len(self.doc_lengths) != len(self.documents):
            raise CorpusIndexError("doc_lengths and documents disagree in length")
        self._tf = [dict() for _ in self.doc_lengths]
        for term, plist in self.postings.items():
            for doc_id, tf in plist:
                self._tf[doc_id][term] = tf

    @property
    def doc_count(self) -> int:
        return len(self.doc_lengths)

    @property
    def avg_doc_length(self) -> float:
        return sum(self.doc_lengths) / len(self.doc_lengths)

    def df(self, term: int) -> int:
        return len(self.postings.get(term, ()))

    def idf(self, term: int) -> float:
        n, df = self.doc_count, self.df(term)
        return math.log((n - df + 0.5) / (df + 0.5) + 1.0)

    def text(self, doc_id: int) -> str:
        if self.texts is not None:
            return self.texts[doc_id]
        if self.vocab is not None:
            return " ".join(self.vocab.decode(self.documents[doc_id]))
        return " ".join(map(str, self.documents[doc_id]))


def build_index(
    documents: Sequence[Sequence[int]],
    vocab: Vocabulary | None = None,
    texts: Sequence[str] | None = None,
) -> InvertedIndex:
    """Index encoded documents.  Raises on an empty corpus or empty document."""
    if not documents:
        raise CorpusIndexError("cannot index an empty corpus")
    if texts is not None and len(texts) != len(documents):
        raise CorpusIndexError("texts and documents disagree in length")
    postings: dict[int, list[tuple[int, int]]] = {}
    lengths = []
    for doc_id, doc in enumerate(documents):
        if len(doc) == 0:
            raise CorpusIndexError(f"document on line {doc_id + 1} is empty after tokenization")
        lengths.append(len(doc))
        for term, tf in sorted(Counter(doc).items()):
            if term in _UNPOSTED:
                continue
            postings.setdefault(term, []).append((doc_id, tf))
    return InvertedIndex(
        postings=postings,
        doc_lengths=lengths,
        documents=[list(d) for d in documents],
        vocab=vocab,
        texts=list(texts) if texts is not None else None,
    )


def index_corpus(lines: Sequence[str], min_count: int = 1) -> InvertedIndex:
    """Tokenize raw corpus lines, build the vocabulary and the index."""
    if not lines:
        raise CorpusIndexError("cannot index an empty corpus")
    tokens = [tokenize(line) for line in lines]
    for lineno, toks in enumerate(tokens, 1):
        if not toks:
            raise CorpusIndexError(f"document on line {lineno} is empty after tokenization")
    vocab = build_vocab(tokens, min_count)
    return build_index([encode(t, vocab) for t in tokens], vocab=vocab, texts=lines)


def _term_weight(idf: float, tf: int, dl: int, avdl: float) -> float:
    return idf * (tf * (K1 + 1.0)) / (tf + K1 * (1.0 - B + B * dl / avdl))


def _query_terms(query: Sequence[int]) -> list[int]:
    # distinct terms in ascending id: fixes the summation order
    return sorted(set(query) - set(_UNPOSTED))


def score(index: InvertedIndex, query: Sequence[int], doc_id: int) -> float:
    """BM25 score of one document for ``query`` (duplicate query terms count once)."""
    if not 0 <= doc_id < index.doc_count:
        raise CorpusIndexError(f"doc_id {doc_id} out of range for {index.doc_count} documents")
    avdl = index.avg_doc_length
    dl = index.doc_lengths[doc_id]
    tfs = index._tf[doc_id]
    total = 0.0
    for term in _query_terms(query):
        tf = tfs.get(term, 0)
        if tf:
            total += _term_weight(index.idf(term), tf, dl, avdl)
    return total


def top_k(index: InvertedIndex, query: Sequence[int], k: int) -> list[ScoredCandidate]:
    """Exact top-k documents with positive score.

    Ordered by descending score, ties by ascending doc_id.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    avdl = index.avg_doc_length
    acc: dict[int, float] = {}
    for term in _query_terms(query):
        plist = index.postings.get(term)
        if not plist:
            continue
        idf = index.idf(term)
        for doc_id, tf in plist:
            acc[doc_id] = acc.get(doc_id, 0.0) + _term_weight(idf, tf, index.doc_lengths[doc_id], avdl)
    best = heapq.nsmallest(k, ((-s, d) for d, s in acc.items() if s > 0.0))
    return [ScoredCandidate(doc_id=d, score=-s) for s, d in best]


def persist_index(index: InvertedIndex, directory: str | Path) -> None:
    """Write vocab.txt, corpus.txt, postings.tsv and doclens.tsv."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    if index.vocab is None:
        raise CorpusIndexError("index has no vocabulary attached; cannot persist")
    index.vocab.save(directory / VOCAB_FILE)
    corpus = "".join(" ".join(index.text(i).splitlines()) + "\n" for i in range(index.doc_count))
    (directory / CORPUS_FILE).write_text(corpus, encoding="utf-8")
    lines = []
    for term in sorted(index.postings):
        plist = ",".join(f"{d}:{tf}" for d, tf in index.postings[term])
        lines.append(f"{term}\t{plist}\n")
    (directory / POSTINGS_FILE).write_text("".join(lines), encoding="utf-8")
    (directory / DOCLENS_FILE).write_text(
        "".join(f"{i}\t{n}\n" for i, n in enumerate(index.doc_lengths)), encoding="utf-8"
    )


def _read_lines(path: Path) -> list[str]:
    if not path.is_file():
        raise CorpusIndexError(f"missing index file: {path}")
    try:
        return path.read_text(encoding="utf-8").splitlines()
    except (OSError, UnicodeDecodeError) as exc:
        raise CorpusIndexError(f"cannot read index file {path}: {exc}") from exc


def load_index(directory: str | Path) -> InvertedIndex:
    directory = Path(directory)
    if not directory.is_dir():
        raise CorpusIndexError(f"index directory not found: {directory}")
    vocab_path = directory / VOCAB_FILE
    if not vocab_path.is_file():
        raise CorpusIndexError(f"missing index file: {vocab_path}")
    try:
        vocab = Vocabulary.load(vocab_path)
    except ValueError as exc:
        raise CorpusIndexError(str(exc)) from exc
    texts = _read_lines(directory / CORPUS_FILE)

    lengths = []
    path = directory / DOCLENS_FILE
    for lineno, line in enumerate(_read_lines(path), 1):
        try:
            doc_id, n = line.split("\t")
            if int(doc_id) != lineno - 1 or int(n) < 1:
                raise ValueError
        except ValueError:
            raise CorpusIndexError(f"corrupt index file {path}: line {lineno}") from None
        lengths.append(int(n))

    postings: dict[int, list[tuple[int, int]]] = {}
    path = directory / POSTINGS_FILE
    prev_term = -1
    for lineno, line in enumerate(_read_lines(path), 1):
        try:
            term_s, plist_s = line.split("\t")
            term = int(term_s)
            plist = [tuple(int(x) for x in item.split(":")) for item in plist_s.split(",")]
            doc_ids = [d for d, _ in plist]
            ok = (
                prev_term < term < vocab.size
                and all(len(p) == 2 and 0 <= p[0] < len(lengths) and p[1] >= 1 for p in plist)
                and doc_ids == sorted(set(doc_ids))
            )
            if not ok:
                raise ValueError
        except ValueError:
            raise CorpusIndexError(f"corrupt index file {path}: line {lineno}") from None
        postings[term] = plist
        prev_term = term

    if len(texts) != len(lengths):
        raise CorpusIndexError(f"corrupt index file {directory / CORPUS_FILE}: {len(texts)} lines, expected {len(lengths)}")
    documents = [encode(tokenize(t), vocab) for t in texts]
    for doc_id, (doc, n) in enumerate(zip(documents, lengths)):
        if len(doc) != n:
            raise CorpusIndexError(f"corrupt index file {directory / CORPUS_FILE}: line {doc_id + 1} has {len(doc)} tokens, expected {n}")
    if not lengths:
        raise CorpusIndexError(f"corrupt index file {directory / DOCLENS_FILE}: no documents")
    return InvertedIndex(postings=postings, doc_lengths=lengths, documents=documents, vocab=vocab, texts=texts)
