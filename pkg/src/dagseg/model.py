"""The segmenter: vocabularies, parameters and the encode/score/decode pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from dagseg import encoders, inference
from dagseg.config import TrainConfig
from dagseg.corpus import (
    EmbeddingMatch,
    Sentence,
    Vocabulary,
    build_bigram_vocab,
    build_train_vocab,
    sentence_bigrams,
    tags_to_spans,
)
from dagseg.errors import DataError
from dagseg.lattice import Automaton, Lattice, build_automaton, build_lattice
from dagseg.numeric import Graph, Node, ParamStore, init_uniform

Span = tuple[int, int]


class VariantMismatchError(DataError):
    pass


@dataclass
class Prepared:
    """Everything about a sentence that does not depend on parameters."""

    chars: tuple[str, ...]
    char_rows: list[int]
    bigram_rows: list[int] | None = None
    lattice: Lattice | None = None
    # embedding row of every word occurrence in the lattice
    span_rows: dict[Span, int] = field(default_factory=dict)


class Segmenter:
    def __init__(
        self,
        config: TrainConfig,
        vocab: Vocabulary,
        bigram_vocab: Vocabulary | None = None,
        store: ParamStore | None = None,
    ) -> None:
        self.config = config
        self.vocab = vocab
        self.bigram_vocab = bigram_vocab
        if config.variant == "bigram" and bigram_vocab is None:
            raise DataError("bigram variant needs a bigram vocabulary")
        if store is None:
            store = ParamStore()
            for name, shape in self.param_shapes().items():
                store.add(name, shape)
            init_uniform(store, -config.init_range, config.init_range, config.seed)
        self.store = store
        self.automaton: Automaton | None = build_automaton(vocab) if self.is_dag else None

    @classmethod
    def create(cls, config: TrainConfig, corpus: Iterable[Sentence]) -> Segmenter:
        corpus = list(corpus)
        vocab = build_train_vocab(corpus)
        bigrams = build_bigram_vocab(corpus) if config.variant == "bigram" else None
        return cls(config, vocab, bigrams)

    @property
    def variant(self) -> str:
        return self.config.variant

    @property
    def is_dag(self) -> bool:
        return self.config.variant in encoders.DAG_VARIANTS

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        cfg = self.config
        shapes = encoders.param_shapes(
            cfg.variant,
            cfg.d_e,
            cfg.d_h,
            self.vocab.embedding_size(),
            len(self.bigram_vocab) if self.bigram_vocab is not None else 0,
            cfg.l_max,
        )
        shapes.update(inference.param_shapes(2 * cfg.d_h))
        return shapes

    def apply_embeddings(self, match: EmbeddingMatch) -> None:
        table = self.store[encoders.WORD_TABLE].value
        for row, vec in match.rows.items():
            table[row] = vec

    def require_dag(self, action: str) -> None:
        if not self.is_dag:
            raise VariantMismatchError(f"{action} needs a DAG variant, model is {self.variant}")

    def with_external_vocab(self, words: Iterable[str]) -> Segmenter:
        """A model whose lattices also contain ``words``, each embedded as ``<OOV>``.

        Parameters are shared with ``self``; words already known are left untouched.
        """
        self.require_dag("external vocabulary")
        vocab = self.vocab.copy()
        added = False
        for w in words:
            if w and w not in vocab:
                vocab.add(w, Vocabulary.EXTERNAL)
                added = True
        if not added:
            return self
        return Segmenter(self.config, vocab, self.bigram_vocab, self.store)

    # per-sentence pipeline

    def prepare(self, chars: Sequence[str]) -> Prepared:
        chars = tuple(chars)
        if not chars:
            raise DataError("empty sentence")
        vocab = self.vocab
        char_rows = [vocab.embed_id(vocab.lookup(ch)) for ch in chars]
        prep = Prepared(chars, char_rows)
        if self.variant == "bigram":
            prep.bigram_rows = [self.bigram_vocab.lookup(k) for k in sentence_bigrams(chars)]
        elif self.is_dag:
            lat = build_lattice(chars, self.automaton, vocab, self.config.max_word_len)
            prep.lattice = lat
            prep.span_rows = {
                span: vocab.embed_id(idx) for span, idx in encoders.lattice_spans(lat)
            }
            if self.config.iv_dropout >= 1.0:
                # a model trained with every word dropped only ever saw <OOV> on long edges
                oov = vocab.oov_id
                prep.span_rows = {
                    span: (row if span[0] == span[1] else oov)
                    for span, row in prep.span_rows.items()
                }
        return prep

    def encode(
        self,
        g: Graph,
        prep: Prepared,
        rng: np.random.Generator | None = None,
        span_rows: dict[Span, int] | None = None,
    ) -> list[Node]:
        """Hidden states; ``rng`` switches on conventional dropout, ``span_rows`` overrides edge inputs."""
        cfg = self.config
        p = cfg.dropout
        if self.variant == "unigram":
            z = encoders.embed_unigram(g, prep.char_rows, p, rng)
            fwd = encoders.lstm_forward(g, z, "fwd", cfg.d_h)
            bwd = encoders.lstm_forward(g, z, "bwd", cfg.d_h)
        elif self.variant == "bigram":
            z = encoders.embed_bigram(g, prep.char_rows, prep.bigram_rows, p, rng)
            fwd = encoders.lstm_forward(g, z, "fwd", cfg.d_h)
            bwd = encoders.lstm_forward(g, z, "bwd", cfg.d_h)
        else:
            rows = prep.span_rows if span_rows is None else span_rows
            inputs = encoders.embed_edges(g, rows, p, rng)
            if self.variant == "ws-dag":
                fwd = encoders.ws_dag_lstm_forward(g, prep.lattice, inputs, "fwd", cfg.d_h)
                bwd = encoders.ws_dag_lstm_forward(g, prep.lattice, inputs, "bwd", cfg.d_h)
            else:
                fwd = encoders.wi_dag_lstm_forward(
                    g, prep.lattice, inputs, "fwd", cfg.d_h, cfg.l_max
                )
                bwd = encoders.wi_dag_lstm_forward(
                    g, prep.lattice, inputs, "bwd", cfg.d_h, cfg.l_max
                )
        return encoders.bilstm_concat(g, fwd, bwd)

    def emissions(
        self,
        g: Graph,
        prep: Prepared,
        rng: np.random.Generator | None = None,
        span_rows: dict[Span, int] | None = None,
    ) -> Node:
        return inference.emissions(g, self.encode(g, prep, rng, span_rows))

    def transitions(self) -> tuple[np.ndarray, np.ndarray]:
        return self.store[inference.TRANS].value, self.store[inference.START].value

    def decode(self, chars: Sequence[str]) -> inference.TagPath:
        g = Graph(self.store)
        emit = self.emissions(g, self.prepare(chars)).value
        trans, start = self.transitions()
        return inference.viterbi(emit, trans, start)

    def segment(self, chars: Sequence[str]) -> list[Span]:
        return tags_to_spans(self.decode(chars).tags)

    def segment_text(self, text: str) -> list[str]:
        chars = tuple(text)
        return ["".join(chars[s - 1 : e]) for s, e in self.segment(chars)]
