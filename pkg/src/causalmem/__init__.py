"""Cause-effect classification with retrieved top-k memories.

A query ``"A <CAUSES> B"`` carries no supporting story, so the k corpus
sentences that score highest under BM25 are pulled from an inverted index and
used as the memory slots of an end-to-end memory network.  The network
outputs Probability(A causes B).
"""

from causalmem.text import Vocabulary, build_vocab, encode, tokenize
from causalmem.index import InvertedIndex, ScoredCandidate, build_index, load_index, persist_index, score, top_k
from causalmem.memnet import ForwardCache, MemorySet, ModelParams, backward, forward, init_params, pe_matrix
from causalmem.train import AdamState, EvalReport, TrainConfig, adam_step, cross_entropy, evaluate, grad_check, train_loop
from causalmem.dataset import CauseEffectExample, generate_negatives, load_pairs, pair_to_query, split, write_pairs
from causalmem.pipeline import select_memories

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "CauseEffectExample",
    "EvalReport",
    "ForwardCache",
    "InvertedIndex",
    "MemorySet",
    "ModelParams",
    "ScoredCandidate",
    "TrainConfig",
    "Vocabulary",
    "adam_step",
    "backward",
    "build_index",
    "build_vocab",
    "cross_entropy",
    "encode",
    "evaluate",
    "forward",
    "generate_negatives",
    "grad_check",
    "init_params",
    "load_index",
    "load_pairs",
    "pair_to_query",
    "pe_matrix",
    "persist_index",
    "score",
    "select_memories",
    "split",
    "tokenize",
    "top_k",
    "train_loop",
    "write_pairs",
]
