"""Wiring between retrieval and the network.

A query arrives with no story, so its memory is whatever the index ranks
highest for it.  Retrieval happens once per query and the same slots are
read by every hop.
"""

from __future__ import annotations

import random
from typing import Sequence

from causalmem.dataset import CauseEffectExample, generate_negatives, pair_to_query
from causalmem.index import InvertedIndex, top_k
from causalmem.memnet import MemorySet, ModelParams, forward
from causalmem.text import CAUSES, tokenize


def select_memories(index: InvertedIndex, query: Sequence[int], k: int) -> MemorySet:
    """Top-k documents for ``query`` as memory slots, best first."""
    hits = top_k(index, query, k)
    return MemorySet([index.documents[h.doc_id] for h in hits], capacity=k)


def memory_provider(index: InvertedIndex, k: int):
    def provide(query: Sequence[int]) -> MemorySet:
        return select_memories(index, query, k)

    return provide


def encode_examples(examples: Sequence[CauseEffectExample], index: InvertedIndex) -> list[tuple[list[int], int]]:
    return [(pair_to_query(ex, index.vocab), ex.label) for ex in examples]


def parse_causal_query(text: str) -> tuple[str, str]:
    """Split ``"A <CAUSES> B"`` into its two phrases.

    Raises ValueError unless the marker occurs exactly once with words on
    both sides.
    """
    tokens = tokenize(text)
    n = tokens.count(CAUSES)
    if n != 1:
        raise ValueError(f"query must contain exactly one <CAUSES> marker, found {n}")
    cut = tokens.index(CAUSES)
    cause, effect = tokens[:cut], tokens[cut + 1 :]
    if not cause or not effect:
        raise ValueError("query needs words on both sides of <CAUSES>")
    return " ".join(cause), " ".join(effect)


def infer(params: ModelParams, index: InvertedIndex, text: str, k: int):
    """Return ``(candidates, p_causes)`` for a raw ``"A <CAUSES> B"`` string."""
    cause, effect = parse_causal_query(text)
    query = pair_to_query(CauseEffectExample(cause, effect, 1), index.vocab)
    hits = top_k(index, query, k)
    memories = MemorySet([index.documents[h.doc_id] for h in hits], capacity=k)
    return hits, float(forward(params, memories, query).pred[1])


_FILLER = (
    "people", "often", "notice", "that", "the", "town", "near", "river",
    "during", "spring", "season", "report", "says", "after", "before", "we",
)


def synthetic_task(n_positive: int = 40, ratio: int = 3, seed: int = 0, filler_lines: int = 20):
    """A separable toy causal task and its supporting corpus.

    Each positive pair ``(cause_i, effect_i)`` gets a corpus sentence in
    which both words co-occur; negatives re-pair causes with other effects,
    so only the retrieved memories reveal which pairings are real.
    Returns ``(corpus_lines, examples)``.
    """
    rng = random.Random(seed)
    causes = [f"cause{i:03d}" for i in range(n_positive)]
    effects = [f"effect{i:03d}" for i in range(n_positive)]
    positives = [CauseEffectExample(c, e, 1) for c, e in zip(causes, effects)]
    negatives = generate_negatives(positives, ratio, seed)
    corpus = []
    for c, e in zip(causes, effects):
        words = rng.sample(_FILLER, 3)
        corpus.append(f"{words[0]} {c} {words[1]} leads to {e} {words[2]}")
    for _ in range(filler_lines):
        corpus.append(" ".join(rng.sample(_FILLER, 6)))
    rng.shuffle(corpus)
    examples = positives + negatives
    rng.shuffle(examples)
    return corpus, examples
