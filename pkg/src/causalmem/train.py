"""Loss, Adam, the minibatch training loop, gradient checking and evaluation."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from causalmem.memnet import MemorySet, ModelParams, backward, forward, init_params

MemoryProvider = Callable[[Sequence[int]], MemorySet]

CAUSES_LABEL = 1


def cross_entropy(pred, label: int) -> float:
    """``-ln pred[label]`` with the probability clamped at 1e-12."""
    pred = np.asarray(pred, dtype=np.float64)
    if not 0 <= label < pred.shape[0]:
        raise ValueError(f"label {label} out of range for {pred.shape[0]} labels")
    return float(-math.log(max(float(pred[label]), 1e-12)))


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, tensors: Sequence[np.ndarray], **hyper) -> "AdamState":
        return cls(m=[np.zeros_like(t) for t in tensors], v=[np.zeros_like(t) for t in tensors], **hyper)


def adam_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray], state: AdamState) -> None:
    """One bias-corrected Adam update, in place on ``params`` and ``state``."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params, grads and optimizer state differ in length")
    for theta, g, m in zip(params, grads, state.m):
        if theta.shape != g.shape or theta.shape != m.shape:
            raise ValueError(f"shape mismatch: param {theta.shape}, grad {g.shape}, state {m.shape}")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.t
    c2 = 1.0 - b2**state.t
    for theta, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        theta -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


@dataclass(frozen=True)
class TrainConfig:
    d: int = 20
    H: int = 2
    L: int = 2
    k: int = 10
    lr: float = 0.001
    epochs: int = 100
    batch_size: int = 32
    seed: int = 7
    min_count: int = 1
    tying: str = "adjacent"
    negative_ratio: int = 3

    def __post_init__(self):
        for name in ("d", "H", "L", "k", "epochs", "batch_size", "min_count", "negative_ratio"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.lr <= 0:
            raise ValueError("lr must be positive")


@dataclass(frozen=True)
class EpochMetrics:
    epoch: int
    mean_loss: float
    train_accuracy: float


def example_grads(params: ModelParams, memories: MemorySet, query: Sequence[int], label: int):
    """Loss, prediction and gradients for a single example."""
    cache = forward(params, memories, query)
    return cross_entropy(cache.pred, label), cache.pred, backward(cache, params, label)


def batch_grads(params: ModelParams, batch) -> tuple[list[np.ndarray], list[float], list[np.ndarray]]:
    """Mean gradient over ``batch`` of (query, memories, label) triples."""
    total = [np.zeros_like(t) for t in params.tensors()]
    losses, preds = [], []
    for query, memories, label in batch:
        loss, pred, grads = example_grads(params, memories, query, label)
        for acc, g in zip(total, grads):
            acc += g
        losses.append(loss)
        preds.append(pred)
    n = float(len(batch))
    return [g / n for g in total], losses, preds


def train_loop(
    samples: Sequence[tuple[Sequence[int], int]],
    memory_provider: MemoryProvider,
    config: TrainConfig,
    vocab_size: int,
    params: ModelParams | None = None,
) -> tuple[ModelParams, list[EpochMetrics]]:
    """Train from ``(query ids, label)`` samples.

    Memories are retrieved once per sample and reused for every epoch.  The
    shuffle and the initialization both derive from ``config.seed``.
    """
    if not samples:
        raise ValueError("cannot train on an empty dataset")
    if params is None:
        params = init_params(config.seed, vocab_size, config.d, config.H, config.L, config.tying)
    prepared = [(list(q), memory_provider(q), int(y)) for q, y in samples]
    tensors = params.tensors()
    state = AdamState.zeros_like(tensors, lr=config.lr)
    rng = random.Random(config.seed)
    order = list(range(len(prepared)))
    history = []
    for epoch in range(1, config.epochs + 1):
        rng.shuffle(order)
        losses, correct = [], 0
        for start in range(0, len(order), config.batch_size):
            batch = [prepared[i] for i in order[start : start + config.batch_size]]
            grads, batch_losses, preds = batch_grads(params, batch)
            losses.extend(batch_losses)
            correct += sum(int(np.argmax(p)) == y for p, (_, _, y) in zip(preds, batch))
            adam_step(tensors, grads, state)
        history.append(EpochMetrics(epoch, float(np.mean(losses)), correct / len(prepared)))
    return params, history


def write_metrics(history: Sequence[EpochMetrics], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in history:
            fh.write(f"{row.epoch}\t{row.mean_loss!r}\t{row.train_accuracy!r}\n")


def grad_check(
    params: ModelParams,
    example: tuple[Sequence[int], MemorySet, int],
    eps: float = 1e-5,
    max_entries: int | None = None,
    seed: int = 0,
    grad_fn: Callable | None = None,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``example`` is ``(query, memories, label)``.  With ``max_entries`` set, a
    seeded random subsample of that many entries is checked instead of all.
    ``grad_fn`` swaps in a different analytic gradient (used to show the
    check is sensitive).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    query, memories, label = example
    if grad_fn is None:
        analytic = backward(forward(params, memories, query), params, label)
    else:
        analytic = grad_fn(params, memories, query, label)
    tensors = params.tensors()
    entries = [(ti, idx) for ti, t in enumerate(tensors) for idx in np.ndindex(t.shape)]
    if max_entries is not None and max_entries < len(entries):
        rng = np.random.default_rng(seed)
        picked = rng.choice(len(entries), size=max_entries, replace=False)
        entries = [entries[i] for i in sorted(picked)]

    def objective() -> float:
        return cross_entropy(forward(params, memories, query).pred, label)

    worst = 0.0
    for ti, idx in entries:
        t = tensors[ti]
        orig = t[idx]
        t[idx] = orig + eps
        plus = objective()
        t[idx] = orig - eps
        minus = objective()
        t[idx] = orig
        numeric = (plus - minus) / (2.0 * eps)
        a = float(analytic[ti][idx])
        worst = max(worst, abs(a - numeric) / max(abs(a), abs(numeric), 1e-8))
    return worst


@dataclass
class EvalReport:
    total: int
    correct: int
    tp: int
    tn: int
    fp: int
    fn: int
    probabilities: list[float] = field(default_factory=list)

    @property
    def accuracy(self) -> float:
        return self.correct / self.total

    def lines(self) -> list[str]:
        return [
            f"total\t{self.total}",
            f"correct\t{self.correct}",
            f"accuracy\t{self.accuracy:.4f}",
            f"tp\t{self.tp}",
            f"tn\t{self.tn}",
            f"fp\t{self.fp}",
            f"fn\t{self.fn}",
        ]


def report_from_predictions(labels: Sequence[int], probabilities: Sequence[float], threshold: float = 0.5) -> EvalReport:
    if not labels:
        raise ValueError("cannot evaluate an empty test set")
    tp = tn = fp = fn = 0
    for y, prob in zip(labels, probabilities):
        guess = int(prob >= threshold)
        if guess and y:
            tp += 1
        elif guess:
            fp += 1
        elif y:
            fn += 1
        else:
            tn += 1
    return EvalReport(len(labels), tp + tn, tp, tn, fp, fn, [float(p) for p in probabilities])


def evaluate(
    params: ModelParams,
    test_set: Sequence[tuple[Sequence[int], int]],
    memory_provider: MemoryProvider,
    threshold: float = 0.5,
) -> EvalReport:
    """Classify each query as causal when P(causes) >= ``threshold``."""
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    if not test_set:
        raise ValueError("cannot evaluate an empty test set")
    probs = [float(forward(params, memory_provider(q), q).pred[CAUSES_LABEL]) for q, _ in test_set]
    return report_from_predictions([int(y) for _, y in test_set], probs, threshold)
