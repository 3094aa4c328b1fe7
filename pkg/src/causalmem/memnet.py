"""End-to-end memory network with position-encoded sentences.

Embedding matrices are stored ``d x V`` so that a word's vector is a column.
Hops follow ``u_{h+1} = u_h + o_h``; with adjacent tying hop ``h+1`` reads
memories through the very array that hop ``h`` used for outputs.

Everything runs in float64 on plain numpy, one example at a time.  Gradients
are returned as a list aligned with :meth:`ModelParams.tensors`, the unique
storage of the model, so tied matrices receive one accumulated gradient.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np

from causalmem.text import PAD_ID

TYINGS = ("adjacent", "untied")
MAGIC = b"MEMNET01"
INIT_STD = 0.1


def pe_matrix(J: int, d: int) -> np.ndarray:
    """Position weights ``l[k-1, j-1] = (1 - j/J) - (k/d)(1 - 2j/J)``, shape (d, J)."""
    if J < 1 or d < 1:
        raise ValueError("J and d must be >= 1")
    return _pe_cached(J, d).copy()


@lru_cache(maxsize=512)
def _pe_cached(J: int, d: int) -> np.ndarray:
    k = np.arange(1, d + 1, dtype=np.float64)[:, None]
    j = np.arange(1, J + 1, dtype=np.float64)[None, :]
    out = (1.0 - j / J) - (k / d) * (1.0 - 2.0 * j / J)
    out.setflags(write=False)
    return out


def embed_sentence(seq: Sequence[int], E: np.ndarray) -> np.ndarray:
    """``sum_j l[:, j] * E[:, seq[j]]`` for one sentence."""
    if len(seq) == 0:
        raise ValueError("cannot embed an empty sentence")
    l = _pe_cached(len(seq), E.shape[0])
    return (E[:, list(seq)] * l).sum(axis=1)


def softmax(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        raise ValueError("softmax of an empty vector")
    if np.isnan(v).any():
        raise ValueError("softmax input contains NaN")
    e = np.exp(v - v.max())
    return e / e.sum()


@dataclass
class MemorySet:
    sentences: list[list[int]]
    capacity: int | None = None
    _packs: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        self.sentences = [list(s) for s in self.sentences]
        if self.capacity is None:
            self.capacity = len(self.sentences)
        if len(self.sentences) > self.capacity:
            raise ValueError(f"{len(self.sentences)} memories exceed capacity {self.capacity}")
        if any(len(s) == 0 for s in self.sentences):
            raise ValueError("memory sentences must be non-empty")

    def __len__(self) -> int:
        return len(self.sentences)

    def packed(self, d: int):
        """Flat token ids, their PE weights (d, T) and sentence start offsets."""
        pack = self._packs.get(d)
        if pack is None:
            ids = np.array([t for s in self.sentences for t in s], dtype=np.intp)
            weights = np.concatenate([_pe_cached(len(s), d) for s in self.sentences], axis=1)
            starts = np.cumsum([0] + [len(s) for s in self.sentences[:-1]])
            seg = np.repeat(np.arange(len(self.sentences)), [len(s) for s in self.sentences])
            pack = self._packs[d] = (ids, weights, starts, seg)
        return pack


EMPTY_MEMORY = MemorySet([], capacity=0)


@dataclass
class ModelParams:
    A: list[np.ndarray]
    C: list[np.ndarray]
    B: np.ndarray
    W: np.ndarray
    tying: str = "adjacent"

    def __post_init__(self):
        if self.tying not in TYINGS:
            raise ValueError(f"tying must be one of {TYINGS}")
        if len(self.A) != len(self.C) or not self.A:
            raise ValueError("need H >= 1 hops with one A and one C each")
        if self.tying == "adjacent" and any(self.A[h + 1] is not self.C[h] for h in range(self.H - 1)):
            raise ValueError("adjacent tying requires A[h+1] to be C[h]")
        if self.L < 2:
            raise ValueError("need at least 2 labels")

    @property
    def d(self) -> int:
        return self.B.shape[0]

    @property
    def V(self) -> int:
        return self.B.shape[1]

    @property
    def H(self) -> int:
        return len(self.A)

    @property
    def L(self) -> int:
        return self.W.shape[0]

    def tensors(self) -> list[np.ndarray]:
        """Unique parameter arrays in checkpoint order."""
        if self.tying == "adjacent":
            emb = [self.A[0], *self.C]
        else:
            emb = [m for pair in zip(self.A, self.C) for m in pair]
        return [*emb, self.B, self.W]

    @classmethod
    def from_tensors(cls, tensors: Sequence[np.ndarray], H: int, tying: str) -> "ModelParams":
        tensors = list(tensors)
        B, W = tensors[-2], tensors[-1]
        if tying == "adjacent":
            emb = tensors[: H + 1]
            return cls(A=emb[:H], C=emb[1:], B=B, W=W, tying=tying)
        emb = tensors[: 2 * H]
        return cls(A=emb[0::2], C=emb[1::2], B=B, W=W, tying=tying)

    def copy(self) -> "ModelParams":
        return ModelParams.from_tensors([t.copy() for t in self.tensors()], self.H, self.tying)


def init_params(seed: int, V: int, d: int, H: int, L: int = 2, tying: str = "adjacent") -> ModelParams:
    """Gaussian N(0, 0.1^2) init with the PAD column of every embedding zeroed."""
    if min(V, d, H) < 1:
        raise ValueError("V, d and H must be >= 1")
    rng = np.random.default_rng(seed)
    n_emb = H + 1 if tying == "adjacent" else 2 * H
    tensors = [rng.normal(0.0, INIT_STD, size=(d, V)) for _ in range(n_emb + 1)]
    for t in tensors:
        t[:, PAD_ID] = 0.0
    tensors.append(rng.normal(0.0, INIT_STD, size=(L, d)))
    return ModelParams.from_tensors(tensors, H, tying)


def _embed_memories(memories: MemorySet, E: np.ndarray) -> np.ndarray:
    ids, weights, starts, _ = memories.packed(E.shape[0])
    return np.add.reduceat(E[:, ids] * weights, starts, axis=1).T


def hop(u: np.ndarray, memories: MemorySet, A_h: np.ndarray, C_h: np.ndarray):
    """One attention round.  Returns ``(p, o, u_next)``."""
    p, o, _, _ = _hop(u, memories, A_h, C_h)
    return p, o, u + o


def _hop(u, memories, A_h, C_h):
    if len(memories) == 0:
        return np.zeros(0), np.zeros_like(u), None, None
    m = _embed_memories(memories, A_h)
    c = _embed_memories(memories, C_h)
    p = softmax(m @ u)
    return p, p @ c, m, c


@dataclass
class ForwardCache:
    query: list[int]
    memories: MemorySet
    u: list[np.ndarray]
    p: list[np.ndarray]
    o: list[np.ndarray]
    m: list[np.ndarray | None]
    c: list[np.ndarray | None]
    logits: np.ndarray
    pred: np.ndarray


def forward(params: ModelParams, memories: MemorySet, query: Sequence[int]) -> ForwardCache:
    query = list(query)
    u = [embed_sentence(query, params.B)]
    ps, os_, ms, cs = [], [], [], []
    for A_h, C_h in zip(params.A, params.C):
        p, o, m, c = _hop(u[-1], memories, A_h, C_h)
        ps.append(p)
        os_.append(o)
        ms.append(m)
        cs.append(c)
        u.append(u[-1] + o)
    logits = params.W @ u[-1]
    return ForwardCache(query, memories, u, ps, os_, ms, cs, logits, softmax(logits))


def backward(cache: ForwardCache, params: ModelParams, label: int) -> list[np.ndarray]:
    """Cross-entropy gradients, aligned with ``params.tensors()``."""
    if not 0 <= label < params.L:
        raise ValueError(f"label {label} out of range for {params.L} labels")
    H = params.H
    g_logits = cache.pred.copy()
    g_logits[label] -= 1.0
    dW = np.outer(g_logits, cache.u[-1])
    g_u = params.W.T @ g_logits

    dA = [np.zeros_like(a) for a in params.A]
    dC = [np.zeros_like(c) for c in params.C]
    mem = cache.memories
    for h in range(H - 1, -1, -1):
        if len(mem) == 0:
            continue
        p, m, c = cache.p[h], cache.m[h], cache.c[h]
        # u_{h+1} = u_h + o_h, o_h = p @ c, p = softmax(m @ u_h)
        g_p = c @ g_u
        g_scores = p * (g_p - p @ g_p)
        _accumulate_rows(dC[h], mem, np.outer(p, g_u))
        _accumulate_rows(dA[h], mem, np.outer(g_scores, cache.u[h]))
        g_u = g_u + g_scores @ m

    dB = np.zeros_like(params.B)
    q = cache.query
    np.add.at(dB.T, q, (_pe_cached(len(q), params.d) * g_u[:, None]).T)

    if params.tying == "adjacent":
        emb = [dA[0]] + [dC[h] + (dA[h + 1] if h + 1 < H else 0.0) for h in range(H)]
    else:
        emb = [g for pair in zip(dA, dC) for g in pair]
    return [*emb, dB, dW]


def _accumulate_rows(dE: np.ndarray, memories: MemorySet, dvecs: np.ndarray) -> None:
    """Backprop per-slot vector gradients ``dvecs`` (n, d) into ``dE`` (d, V)."""
    ids, weights, _, seg = memories.packed(dE.shape[0])
    np.add.at(dE.T, ids, (weights * dvecs[seg].T).T)


def loss(params: ModelParams, memories: MemorySet, query: Sequence[int], label: int) -> float:
    pred = forward(params, memories, query).pred
    return float(-np.log(max(pred[label], 1e-12)))


def predict_proba(params: ModelParams, memories: MemorySet, query: Sequence[int]) -> np.ndarray:
    return forward(params, memories, query).pred


def save_checkpoint(params: ModelParams, path: str | Path) -> None:
    """Binary checkpoint: magic, five uint32 header fields, float64 matrices."""
    header = MAGIC + struct.pack("<5I", params.V, params.d, params.H, params.L, TYINGS.index(params.tying))
    body = b"".join(np.ascontiguousarray(t, dtype="<f8").tobytes(order="C") for t in params.tensors())
    Path(path).write_bytes(header + body)


def load_checkpoint(path: str | Path) -> ModelParams:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ValueError(f"cannot read checkpoint {path}: {exc}") from exc
    hsize = len(MAGIC) + 20
    if len(raw) < hsize or raw[: len(MAGIC)] != MAGIC:
        raise ValueError(f"{path} is not a memory-network checkpoint")
    V, d, H, L, flag = struct.unpack("<5I", raw[len(MAGIC) : hsize])
    if flag >= len(TYINGS) or min(V, d, H) < 1 or L < 2:
        raise ValueError(f"corrupt checkpoint header in {path}")
    tying = TYINGS[flag]
    n_emb = H + 1 if tying == "adjacent" else 2 * H
    shapes = [(d, V)] * (n_emb + 1) + [(L, d)]
    expected = hsize + 8 * sum(a * b for a, b in shapes)
    if len(raw) != expected:
        raise ValueError(f"corrupt checkpoint {path}: {len(raw)} bytes, expected {expected}")
    tensors, off = [], hsize
    for shape in shapes:
        n = shape[0] * shape[1]
        tensors.append(np.frombuffer(raw, dtype="<f8", count=n, offset=off).reshape(shape).astype(np.float64))
        off += 8 * n
    if not all(np.isfinite(t).all() for t in tensors):
        raise ValueError(f"checkpoint {path} contains non-finite values")
    return ModelParams.from_tensors(tensors, H, tying)
