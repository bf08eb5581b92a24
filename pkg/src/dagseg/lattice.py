"""Word lattices over character positions, built with an Aho-Corasick automaton.

For a sentence ``x_1..x_n`` the forward lattice lists, at each position ``i``,
the words *ending* at ``i`` as ``(length, word_id)`` edges whose prestate is
``i - length``. The backward lattice lists the words *starting* at ``i``,
with prestate ``i + length``. Positions 0 and ``n + 1`` are the sentinels.
"""

from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Sequence

from dagseg.corpus import Vocabulary

Edge = tuple[int, int]


@dataclass
class _State:
    goto: dict[str, int] = field(default_factory=dict)
    fail: int = 0
    # (length, word_id) of every entry that is a suffix of this state's path
    out: tuple[Edge, ...] = ()


class Automaton:
    """Aho-Corasick matcher over the non-special entries of a vocabulary.

    Immutable once built; rebuild to change the vocabulary.
    """

    def __init__(self, vocab: Vocabulary) -> None:
        states = [_State()]
        own: list[list[Edge]] = [[]]
        for word, idx in vocab.entries():
            s = 0
            for ch in word:
                nxt = states[s].goto.get(ch)
                if nxt is None:
                    nxt = len(states)
                    states[s].goto[ch] = nxt
                    states.append(_State())
                    own.append([])
                s = nxt
            own[s].append((len(word), idx))

        # BFS order guarantees a state's fail target is finished before it
        queue = deque()
        for nxt in states[0].goto.values():
            states[nxt].fail = 0
            queue.append(nxt)
        states[0].out = tuple(own[0])
        while queue:
            s = queue.popleft()
            st = states[s]
            st.out = tuple(sorted(own[s] + list(states[st.fail].out)))
            for ch, nxt in st.goto.items():
                f = st.fail
                while f and ch not in states[f].goto:
                    f = states[f].fail
                cand = states[f].goto.get(ch, 0)
                states[nxt].fail = cand if cand != nxt else 0
                queue.append(nxt)
        self._states = states
        self.max_len = max((len(w) for w, _ in vocab.entries()), default=0)

    def __len__(self) -> int:
        return len(self._states)

    def scan(self, chars: Sequence[str]) -> tuple[list[tuple[Edge, ...]], int]:
        """Matches ending at each position (index 0 unused) and the transition count.

        A transition is one goto or fail move; the count is at most ``2 n``.
        """
        states = self._states
        ends: list[tuple[Edge, ...]] = [()]
        s = 0
        moves = 0
        for ch in chars:
            while True:
                moves += 1
                nxt = states[s].goto.get(ch)
                if nxt is not None:
                    s = nxt
                    break
                if s == 0:
                    break
                s = states[s].fail
            ends.append(states[s].out)
        return ends, moves


def build_automaton(vocab: Vocabulary) -> Automaton:
    return Automaton(vocab)


@dataclass
class Lattice:
    n: int
    fwd: list[list[Edge]]
    bwd: list[list[Edge]]
    transitions: int = 0

    def edges(self, direction: str) -> list[list[Edge]]:
        if direction == "fwd":
            return self.fwd
        if direction == "bwd":
            return self.bwd
        raise ValueError(f"unknown direction {direction!r}")

    def edge_count(self) -> int:
        return sum(len(e) for e in self.fwd)


def build_lattice(
    chars: Sequence[str],
    automaton: Automaton,
    vocab: Vocabulary,
    max_len: int | None = None,
) -> Lattice:
    """Forward and backward word lattices for ``chars`` from a single automaton pass.

    Each position always gets a length-1 edge; characters missing from the
    vocabulary use the ``<OOV>`` id. ``max_len`` drops longer words.
    """
    n = len(chars)
    ends, moves = automaton.scan(chars)
    fwd: list[list[Edge]] = [[] for _ in range(n + 1)]
    bwd: list[list[Edge]] = [[] for _ in range(n + 2)]
    for i in range(1, n + 1):
        edges = ends[i]
        if not edges or edges[0][0] != 1:
            fwd[i].append((1, vocab.lookup(chars[i - 1])))
        for length, idx in edges:
            if max_len is not None and length > max_len:
                break
            fwd[i].append((length, idx))
    # a word ending at i with length l starts at i - l + 1; visiting i in
    # ascending order keeps each bwd list sorted by length
    for i in range(1, n + 1):
        for length, idx in fwd[i]:
            bwd[i - length + 1].append((length, idx))
    return Lattice(n, fwd, bwd, moves)


def lattice_stats(lattice: Lattice) -> dict[int, int]:
    """Forward edge count per word length (each edge appears once per direction)."""
    counts = Counter(length for edges in lattice.fwd for length, _ in edges)
    return dict(sorted(counts.items()))


def dump_lattice(lattice: Lattice, vocab: Vocabulary, direction: str = "fwd") -> str:
    """One ``i l word`` line per edge, positions ascending, lengths ascending."""
    lines = []
    edges = lattice.edges(direction)
    for i in range(1, lattice.n + 1):
        for length, idx in edges[i]:
            lines.append(f"{i} {length} {vocab.word(idx)}")
    return "\n".join(lines) + ("\n" if lines else "")
