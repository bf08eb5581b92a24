"""Bidirectional encoders producing one hidden vector per character position.

Four variants share the gate parameter naming ``{dir}.{W,U,b}_{gate}`` with
``dir`` in ``fwd``/``bwd`` and ``gate`` in ``i, o, f, c``:

* ``unigram``: plain LSTM over character embeddings;
* ``bigram``: plain LSTM over ``e(x_i) + e(x_{i-1}x_i) + e(x_i x_{i+1})`` (concatenated);
* ``ws-dag``: DAG-LSTM with one weight set shared by all incoming edges;
* ``wi-dag``: DAG-LSTM with per-word-length weights ``{dir}.{W,U}_{gate}.{l}``,
  lengths above ``l_max`` reusing the ``l_max`` weights.

Positions are 1-indexed in the lattice but returned lists are 0-indexed.
"""

from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np

from dagseg.errors import DataError
from dagseg.lattice import Lattice
from dagseg.numeric import Graph, Node

VARIANTS = ("unigram", "bigram", "ws-dag", "wi-dag")
DAG_VARIANTS = ("ws-dag", "wi-dag")
GATES = ("i", "o", "f", "c")
DIRECTIONS = ("fwd", "bwd")

WORD_TABLE = "embed.word"
BIGRAM_TABLE = "embed.bigram"

Span = tuple[int, int]


def param_shapes(
    variant: str,
    d_e: int,
    d_h: int,
    word_rows: int,
    bigram_rows: int = 0,
    l_max: int = 4,
) -> dict[str, tuple[int, ...]]:
    """Encoder parameter names and shapes (excluding the output layer)."""
    if variant not in VARIANTS:
        raise DataError(f"unknown encoder variant {variant!r}")
    shapes: dict[str, tuple[int, ...]] = {WORD_TABLE: (word_rows, d_e)}
    in_dim = d_e
    if variant == "bigram":
        shapes[BIGRAM_TABLE] = (bigram_rows, d_e)
        in_dim = 3 * d_e
    for d in DIRECTIONS:
        for gate in GATES:
            if variant == "wi-dag":
                for length in range(1, l_max + 1):
                    shapes[f"{d}.W_{gate}.{length}"] = (d_h, in_dim)
                    shapes[f"{d}.U_{gate}.{length}"] = (d_h, d_h)
            else:
                shapes[f"{d}.W_{gate}"] = (d_h, in_dim)
                shapes[f"{d}.U_{gate}"] = (d_h, d_h)
            shapes[f"{d}.b_{gate}"] = (d_h,)
    return shapes


def _dropout(g: Graph, z: Node, rate: float, rng: np.random.Generator | None) -> Node:
    if rng is None or rate <= 0.0:
        return z
    mask = (rng.random(z.value.shape) >= rate) / (1.0 - rate)
    return g.scale(z, mask)


def embed_unigram(
    g: Graph,
    char_ids: Sequence[int],
    dropout: float = 0.0,
    rng: np.random.Generator | None = None,
) -> list[Node]:
    return [_dropout(g, g.lookup(WORD_TABLE, c), dropout, rng) for c in char_ids]


def embed_bigram(
    g: Graph,
    char_ids: Sequence[int],
    bigram_ids: Sequence[int],
    dropout: float = 0.0,
    rng: np.random.Generator | None = None,
) -> list[Node]:
    """``bigram_ids`` holds the n+1 pair ids from ``(<BOS>, x_1)`` to ``(x_n, <EOS>)``."""
    if len(bigram_ids) != len(char_ids) + 1:
        raise DataError("bigram ids must have one more entry than characters")
    pairs = [g.lookup(BIGRAM_TABLE, b) for b in bigram_ids]
    out = []
    for i, c in enumerate(char_ids):
        z = g.concat([g.lookup(WORD_TABLE, c), pairs[i], pairs[i + 1]])
        out.append(_dropout(g, z, dropout, rng))
    return out


def _gate(g: Graph, pre: str, gate: str, z: Node, h: Node) -> Node:
    return g.linear(
        [(g.param(f"{pre}.W_{gate}"), z), (g.param(f"{pre}.U_{gate}"), h)],
        g.param(f"{pre}.b_{gate}"),
    )


def lstm_forward(g: Graph, inputs: Sequence[Node], direction: str, d_h: int) -> list[Node]:
    """Plain LSTM; ``bwd`` runs from the last position to the first."""
    n = len(inputs)
    order = range(n) if direction == "fwd" else range(n - 1, -1, -1)
    h = g.zeros(d_h)
    c = g.zeros(d_h)
    out: list[Node | None] = [None] * n
    for k in order:
        z = inputs[k]
        i_gate = g.sigmoid(_gate(g, direction, "i", z, h))
        o_gate = g.sigmoid(_gate(g, direction, "o", z, h))
        f_gate = g.sigmoid(_gate(g, direction, "f", z, h))
        cand = g.tanh(_gate(g, direction, "c", z, h))
        c = g.add(g.mul(cand, i_gate), g.mul(c, f_gate))
        h = g.mul(o_gate, g.tanh(c))
        out[k] = h
    return out


def _dag_order(lattice: Lattice, direction: str):
    """Yield ``(position, [(length, prestate_position)])`` in evaluation order."""
    n = lattice.n
    if direction == "fwd":
        for i in range(1, n + 1):
            yield i, [(length, i - length) for length, _ in lattice.fwd[i]]
    elif direction == "bwd":
        for i in range(n, 0, -1):
            yield i, [(length, i + length) for length, _ in lattice.bwd[i]]
    else:
        raise ValueError(f"unknown direction {direction!r}")


def _edge_span(i: int, length: int, direction: str) -> Span:
    return (i - length + 1, i) if direction == "fwd" else (i, i + length - 1)


def ws_dag_lstm_forward(
    g: Graph,
    lattice: Lattice,
    edge_inputs: Mapping[Span, Node],
    direction: str,
    d_h: int,
) -> list[Node]:
    """Weight-sharing DAG-LSTM.

    Gates ``i``, ``o`` and the candidate read the summed edge inputs and summed
    prestates; every edge gets its own forget gate over its prestate's cell.
    ``edge_inputs`` maps each word span ``(start, end)`` to its input vector.
    """
    zero = g.zeros(d_h)
    h = {0: zero, lattice.n + 1: zero}
    c = dict(h)
    for i, edges in _dag_order(lattice, direction):
        if not edges:
            raise DataError(f"position {i} has no incoming edge")
        zs = [edge_inputs[_edge_span(i, length, direction)] for length, _ in edges]
        z_sum = g.sum(zs)
        h_sum = g.sum([h[p] for _, p in edges])
        i_gate = g.sigmoid(_gate(g, direction, "i", z_sum, h_sum))
        o_gate = g.sigmoid(_gate(g, direction, "o", z_sum, h_sum))
        cand = g.tanh(_gate(g, direction, "c", z_sum, h_sum))
        kept = []
        for z, (_, p) in zip(zs, edges):
            f_gate = g.sigmoid(_gate(g, direction, "f", z, h[p]))
            kept.append(g.mul(c[p], f_gate))
        c[i] = g.add(g.mul(cand, i_gate), g.sum(kept))
        h[i] = g.mul(o_gate, g.tanh(c[i]))
    return [h[i] for i in range(1, lattice.n + 1)]


def _indexed_gate(
    g: Graph,
    pre: str,
    gate: str,
    terms: Sequence[tuple[int, Node, Node]],
    l_max: int,
) -> Node:
    linear_terms = []
    for length, z, h in terms:
        k = min(length, l_max)
        linear_terms.append((g.param(f"{pre}.W_{gate}.{k}"), z))
        linear_terms.append((g.param(f"{pre}.U_{gate}.{k}"), h))
    return g.linear(linear_terms, g.param(f"{pre}.b_{gate}"))


def wi_dag_lstm_forward(
    g: Graph,
    lattice: Lattice,
    edge_inputs: Mapping[Span, Node],
    direction: str,
    d_h: int,
    l_max: int,
) -> list[Node]:
    """Weight-independent DAG-LSTM: each edge is transformed by its length's weights."""
    zero = g.zeros(d_h)
    h = {0: zero, lattice.n + 1: zero}
    c = dict(h)
    for i, edges in _dag_order(lattice, direction):
        if not edges:
            raise DataError(f"position {i} has no incoming edge")
        terms = [
            (length, edge_inputs[_edge_span(i, length, direction)], h[p]) for length, p in edges
        ]
        i_gate = g.sigmoid(_indexed_gate(g, direction, "i", terms, l_max))
        o_gate = g.sigmoid(_indexed_gate(g, direction, "o", terms, l_max))
        cand = g.tanh(_indexed_gate(g, direction, "c", terms, l_max))
        kept = []
        for term, (_, p) in zip(terms, edges):
            f_gate = g.sigmoid(_indexed_gate(g, direction, "f", [term], l_max))
            kept.append(g.mul(c[p], f_gate))
        c[i] = g.add(g.mul(cand, i_gate), g.sum(kept))
        h[i] = g.mul(o_gate, g.tanh(c[i]))
    return [h[i] for i in range(1, lattice.n + 1)]


def bilstm_concat(g: Graph, fwd: Sequence[Node], bwd: Sequence[Node]) -> list[Node]:
    if len(fwd) != len(bwd):
        raise DataError(f"direction length mismatch: {len(fwd)} vs {len(bwd)}")
    return [g.concat([a, b]) for a, b in zip(fwd, bwd)]


def lattice_spans(lattice: Lattice) -> list[tuple[Span, int]]:
    """Every word occurrence in the lattice as ``(span, word_id)``, sorted by span."""
    out = []
    for i in range(1, lattice.n + 1):
        for length, idx in lattice.fwd[i]:
            out.append(((i - length + 1, i), idx))
    out.sort()
    return out


def embed_edges(
    g: Graph,
    span_rows: Mapping[Span, int],
    dropout: float = 0.0,
    rng: np.random.Generator | None = None,
) -> dict[Span, Node]:
    """One input node per word occurrence, shared by both directions."""
    return {
        span: _dropout(g, g.lookup(WORD_TABLE, row), dropout, rng)
        for span, row in span_rows.items()
    }
