"""Sentence scores over BMES paths, Viterbi decoding and a brute-force oracle.

A path ``y_1..y_n`` scores ``start[y_1] + E[0, y_1] + sum_{i>=2} (A[y_{i-1}, y_i] + E[i-1, y_i])``
where ``E`` is the ``n x 4`` emission table. There is no end transition.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from dagseg.corpus import NUM_TAGS
from dagseg.errors import DataError
from dagseg.numeric import Graph, Node, accumulate

OUT_W = "out.W"
OUT_B = "out.b"
TRANS = "trans.A"
START = "trans.start"


@dataclass(frozen=True)
class TagPath:
    tags: tuple[int, ...]
    score: float


def param_shapes(hidden_dim: int) -> dict[str, tuple[int, ...]]:
    return {
        OUT_W: (NUM_TAGS, hidden_dim),
        OUT_B: (NUM_TAGS,),
        TRANS: (NUM_TAGS, NUM_TAGS),
        START: (NUM_TAGS,),
    }


def emissions(g: Graph, states: Sequence[Node]) -> Node:
    """Stack ``W_s h_i + b_s`` into an ``n x 4`` node."""
    w = g.param(OUT_W)
    b = g.param(OUT_B)
    return g.stack([g.linear([(w, h)], b) for h in states])


def score_path(
    emit: np.ndarray, trans: np.ndarray, start: np.ndarray, tags: Sequence[int]
) -> float:
    if len(tags) != emit.shape[0]:
        raise DataError(f"path of length {len(tags)} for {emit.shape[0]} positions")
    total = start[tags[0]] + emit[0, tags[0]]
    for i in range(1, len(tags)):
        total += trans[tags[i - 1], tags[i]] + emit[i, tags[i]]
    return float(total)


def path_score(g: Graph, emit: Node, trans: Node, start: Node, tags: Sequence[int]) -> Node:
    """Graph op for :func:`score_path` with gradients into emissions and transitions."""
    tags = tuple(int(t) for t in tags)
    value = np.asarray(score_path(emit.value, trans.value, start.value, tags))

    def backward(gr):
        s = float(gr)
        de = np.zeros_like(emit.value)
        de[np.arange(len(tags)), tags] = s
        accumulate(emit, de)
        dstart = np.zeros_like(start.value)
        dstart[tags[0]] = s
        accumulate(start, dstart)
        if len(tags) > 1:
            da = np.zeros_like(trans.value)
            np.add.at(da, (tags[:-1], tags[1:]), s)
            accumulate(trans, da)

    return g.node(value, "path_score", backward)


def viterbi(emit: np.ndarray, trans: np.ndarray, start: np.ndarray) -> TagPath:
    """Highest-scoring path; among exact ties, the lexicographically smallest.

    The recursion runs right to left over best-suffix scores so that decoding
    can go left to right, taking the smallest tag index at every tie.
    """
    emit = np.asarray(emit, dtype=np.float64)
    n = emit.shape[0]
    if n == 0:
        raise DataError("cannot decode an empty sentence")
    suffix = np.empty_like(emit)
    suffix[n - 1] = emit[n - 1]
    for i in range(n - 2, -1, -1):
        suffix[i] = emit[i] + np.max(trans + suffix[i + 1][None, :], axis=1)
    tags = [int(np.argmax(start + suffix[0]))]
    for i in range(1, n):
        tags.append(int(np.argmax(trans[tags[-1]] + suffix[i])))
    return TagPath(tuple(tags), score_path(emit, trans, start, tags))


def augment(emit: np.ndarray, gold: Sequence[int], eta: float) -> np.ndarray:
    """Add the per-position margin ``eta`` to every non-gold emission entry."""
    if len(gold) != emit.shape[0]:
        raise DataError(f"gold path of length {len(gold)} for {emit.shape[0]} positions")
    margin = np.full(emit.shape, float(eta))
    margin[np.arange(len(gold)), list(gold)] = 0.0
    return emit + margin


def hamming_margin(gold: Sequence[int], pred: Sequence[int], eta: float) -> float:
    return eta * sum(1 for a, b in zip(gold, pred) if a != b)


def viterbi_cost_augmented(
    emit: np.ndarray,
    trans: np.ndarray,
    start: np.ndarray,
    gold: Sequence[int],
    eta: float,
) -> TagPath:
    """Maximize ``score + eta * #disagreements with gold``; the returned score includes the margin."""
    return viterbi(augment(emit, gold, eta), trans, start)


def enumerate_best(
    emit: np.ndarray,
    trans: np.ndarray,
    start: np.ndarray,
    gold: Sequence[int] | None = None,
    eta: float = 0.0,
) -> TagPath:
    """Exhaustive search over all 4^n paths (first maximum in lexicographic order)."""
    if gold is not None:
        emit = augment(emit, gold, eta)
    best: TagPath | None = None
    for tags in itertools.product(range(NUM_TAGS), repeat=emit.shape[0]):
        s = score_path(emit, trans, start, tags)
        if best is None or s > best.score:
            best = TagPath(tags, s)
    return best
