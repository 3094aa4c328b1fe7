"""Cause-effect pairs: TSV I/O, negative sampling, query mapping, splits."""

from __future__ import annotations

import random
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from causalmem.text import CAUSES, Vocabulary, encode, tokenize

MAX_ATTEMPTS = 1000


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class CauseEffectExample:
    cause: str
    effect: str
    label: int


def load_pairs(path: str | Path) -> list[CauseEffectExample]:
    """Read ``cause<TAB>effect<TAB>label`` rows, skipping blanks and ``#`` comments."""
    path = Path(path)
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise DatasetError(f"{path}, line {lineno}: expected 3 tab-separated fields, got {len(fields)}")
            cause, effect, label = fields
            if label.strip() not in ("0", "1"):
                raise DatasetError(f"{path}, line {lineno}: label must be 0 or 1, got {label!r}")
            if not tokenize(cause) or not tokenize(effect):
                raise DatasetError(f"{path}, line {lineno}: cause and effect must contain a word")
            out.append(CauseEffectExample(cause, effect, int(label)))
    return out


def write_pairs(examples: Sequence[CauseEffectExample], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for ex in examples:
            fh.write(f"{ex.cause}\t{ex.effect}\t{ex.label}\n")


def generate_negatives(
    positives: Sequence[CauseEffectExample], ratio: int = 3, seed: int = 0
) -> list[CauseEffectExample]:
    """Re-pair each cause with effects taken from other positive pairs.

    Produces ``ratio`` negatives per positive.  A candidate equal to any
    positive pair is rejected and redrawn, up to 1000 times per slot.
    """
    if len(positives) < 2:
        raise DatasetError("need at least 2 positive pairs to re-pair")
    if ratio < 1:
        raise DatasetError("ratio must be >= 1")
    rng = random.Random(seed)
    known = {(p.cause, p.effect) for p in positives}
    n = len(positives)
    out = []
    for i, pos in enumerate(positives):
        for _ in range(ratio):
            for _ in range(MAX_ATTEMPTS):
                j = rng.randrange(n - 1)
                j += j >= i
                effect = positives[j].effect
                if (pos.cause, effect) not in known:
                    out.append(CauseEffectExample(pos.cause, effect, 0))
                    break
            else:
                raise DatasetError(
                    f"no valid negative for cause {pos.cause!r} after {MAX_ATTEMPTS} draws; "
                    "every other effect already forms a positive pair with it"
                )
    return out


def pair_to_query(example: CauseEffectExample, vocab: Vocabulary) -> list[int]:
    """Encode ``cause <causes> effect``."""
    cause, effect = tokenize(example.cause), tokenize(example.effect)
    if not cause or not effect:
        raise DatasetError(f"empty phrase in pair ({example.cause!r}, {example.effect!r})")
    return encode(cause + [CAUSES] + effect, vocab)


def split(
    examples: Sequence[CauseEffectExample], train_fraction: float, seed: int = 0
) -> tuple[list[CauseEffectExample], list[CauseEffectExample]]:
    """Stratified, seeded train/test split.

    The train size is ``round(fraction * N)`` clamped to ``[1, N-1]``; each
    label gets the floor of its share and leftover slots go to the labels
    with the largest remainders.
    """
    if not 0.0 < train_fraction < 1.0:
        raise DatasetError("train_fraction must lie in (0, 1)")
    by_label: dict[int, list[CauseEffectExample]] = {}
    for ex in examples:
        by_label.setdefault(ex.label, []).append(ex)
    for label, group in by_label.items():
        if len(group) < 2:
            raise DatasetError(f"label {label} has fewer than 2 examples")
    n = len(examples)
    n_train = min(max(round(train_fraction * n), 1), n - 1)
    labels = sorted(by_label)
    shares = {y: n_train * len(by_label[y]) / n for y in labels}
    quota = {y: int(shares[y]) for y in labels}
    leftover = n_train - sum(quota.values())
    for y in sorted(labels, key=lambda y: (-(shares[y] - quota[y]), y))[:leftover]:
        quota[y] += 1

    rng = random.Random(seed)
    train, test = [], []
    for y in labels:
        group = list(by_label[y])
        rng.shuffle(group)
        train.extend(group[: quota[y]])
        test.extend(group[quota[y] :])
    rng.shuffle(train)
    rng.shuffle(test)
    return train, test
