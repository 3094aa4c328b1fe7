"""Tokenization, vocabulary construction and integer encoding."""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

PAD = "<pad>"
UNK = "<unk>"
CAUSES = "<causes>"
RESERVED = (PAD, UNK, CAUSES)

PAD_ID = 0
UNK_ID = 1
CAUSES_ID = 2

# lowercased input: the causal marker first, then runs of letters/digits
_TOKEN_RE = re.compile(r"<causes>|[^\W_]+")


def tokenize(text: str | bytes) -> list[str]:
    """Lowercase ``text`` and split it into alphanumeric runs.

    The marker ``<CAUSES>`` (any case) survives as the single token
    ``"<causes>"``.  Bytes are decoded as strict UTF-8.
    """
    if isinstance(text, (bytes, bytearray)):
        text = bytes(text).decode("utf-8")
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class Vocabulary:
    id_to_token: tuple[str, ...]
    token_to_id: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if tuple(self.id_to_token[:3]) != RESERVED:
            raise ValueError(f"vocabulary must start with {RESERVED}")
        mapping = {}
        for i, tok in enumerate(self.id_to_token):
            if tok in mapping:
                raise ValueError(f"duplicate token {tok!r} at id {i}")
            mapping[tok] = i
        object.__setattr__(self, "token_to_id", mapping)

    @property
    def size(self) -> int:
        return len(self.id_to_token)

    def __len__(self) -> int:
        return len(self.id_to_token)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id

    def lookup(self, token: str) -> int:
        return self.token_to_id.get(token, UNK_ID)

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self.id_to_token[i] for i in ids]

    def save(self, path: str | Path) -> None:
        Path(path).write_text("".join(tok + "\n" for tok in self.id_to_token), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        path = Path(path)
        try:
            lines = path.read_text(encoding="utf-8").splitlines()
        except (OSError, UnicodeDecodeError) as exc:
            raise ValueError(f"cannot read vocabulary file {path}: {exc}") from exc
        try:
            return cls(tuple(lines))
        except ValueError as exc:
            raise ValueError(f"corrupt vocabulary file {path}: {exc}") from exc


def build_vocab(documents: Iterable[Sequence[str]], min_count: int = 1) -> Vocabulary:
    """Reserved tokens, then every token seen ``min_count`` times, sorted."""
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    counts = Counter(tok for doc in documents for tok in doc)
    kept = sorted(tok for tok, n in counts.items() if n >= min_count and tok not in RESERVED)
    return Vocabulary(RESERVED + tuple(kept))


def encode(tokens: Iterable[str], vocab: Vocabulary) -> list[int]:
    """Map tokens to ids, out-of-vocabulary tokens to UNK."""
    return [vocab.lookup(tok) for tok in tokens]
