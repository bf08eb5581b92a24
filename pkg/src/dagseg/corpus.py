"""Corpus ingestion, vocabularies, BMES conversion and segmentation metrics.

Positions are 1-indexed and spans are inclusive ``(start, end)`` pairs, so a
sentence of ``n`` characters is covered by spans from 1 to ``n``.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from dagseg.errors import ConfigError, DataError, InputError

Span = tuple[int, int]

_WORD_SEP = re.compile(r"[ \t]+")


class Tag(enum.IntEnum):
    B = 0
    M = 1
    E = 2
    S = 3


NUM_TAGS = len(Tag)


@dataclass(frozen=True)
class Sentence:
    chars: tuple[str, ...]
    spans: tuple[Span, ...] | None = None

    def __post_init__(self) -> None:
        if self.spans is not None:
            validate_spans(self.spans, len(self.chars))

    def __len__(self) -> int:
        return len(self.chars)

    @property
    def text(self) -> str:
        return "".join(self.chars)

    def words(self) -> list[str]:
        if self.spans is None:
            raise DataError("sentence has no gold segmentation")
        return [span_word(self.chars, s) for s in self.spans]

    @classmethod
    def from_words(cls, words: Sequence[str]) -> Sentence:
        chars: list[str] = []
        spans: list[Span] = []
        for w in words:
            if not w:
                raise DataError("empty word")
            start = len(chars) + 1
            chars.extend(w)
            spans.append((start, len(chars)))
        return cls(tuple(chars), tuple(spans))

    @classmethod
    def from_text(cls, text: str) -> Sentence:
        return cls(tuple(text))


def span_word(chars: Sequence[str], span: Span) -> str:
    return "".join(chars[span[0] - 1 : span[1]])


def validate_spans(spans: Iterable[Span], n: int) -> None:
    expected = 1
    for start, end in spans:
        if start != expected:
            kind = "gap" if start > expected else "overlap"
            raise DataError(f"{kind} in spans at position {expected}")
        if end < start:
            raise DataError(f"empty span ({start}, {end})")
        expected = end + 1
    if expected != n + 1:
        raise DataError(f"spans cover 1..{expected - 1} but sentence has {n} characters")


def _decode_lines(path: str | Path) -> Iterator[tuple[int, str]]:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    for lineno, raw in enumerate(data.split(b"\n"), start=1):
        try:
            line = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise InputError(f"{path}:{lineno}: invalid UTF-8 ({exc.reason})") from exc
        yield lineno, line.rstrip("\r")


def parse_line(line: str) -> Sentence | None:
    words = [w for w in _WORD_SEP.split(line) if w]
    if not words:
        return None
    return Sentence.from_words(words)


def load_corpus(path: str | Path) -> list[Sentence]:
    """Read a segmented corpus: one sentence per line, words separated by spaces or tabs."""
    sentences = []
    for _, line in _decode_lines(path):
        sent = parse_line(line)
        if sent is not None:
            sentences.append(sent)
    return sentences


def load_raw_text(path: str | Path) -> list[str]:
    """Unsegmented input for decoding. Whitespace inside a line is dropped."""
    lines = []
    for _, line in _decode_lines(path):
        text = _WORD_SEP.sub("", line)
        if text:
            lines.append(text)
    return lines


def load_wordlist(path: str | Path) -> list[str]:
    return [line.strip() for _, line in _decode_lines(path) if line.strip()]


def spans_to_tags(spans: Sequence[Span], n: int | None = None) -> list[Tag]:
    if n is None:
        n = spans[-1][1] if spans else 0
    validate_spans(spans, n)
    tags: list[Tag] = []
    for start, end in spans:
        if start == end:
            tags.append(Tag.S)
        else:
            tags.append(Tag.B)
            tags.extend([Tag.M] * (end - start - 1))
            tags.append(Tag.E)
    return tags


def tags_to_spans(tags: Sequence[int]) -> list[Span]:
    """Read words off a tag sequence, repairing ill-formed sequences.

    A word opens at B or S (closing any open word first) and at M/E when no
    word is open; it closes at E or S, or at the end of the sequence.
    """
    spans: list[Span] = []
    start = 0
    for i, t in enumerate(tags, start=1):
        if t == Tag.B or t == Tag.S:
            if start:
                spans.append((start, i - 1))
            start = i
        elif not start:
            start = i
        if t == Tag.E or t == Tag.S:
            spans.append((start, i))
            start = 0
    if start:
        spans.append((start, len(tags)))
    return spans


class Vocabulary:
    """Dense string-to-id mapping with the three special symbols at ids 0..2.

    Each entry carries flags: ``from_train`` (seen in training data),
    ``external`` (injected after training, embedded as ``<OOV>``) and
    ``gold_word`` (occurred as a whole word in the training segmentation;
    this, not mere presence, is what makes a word in-vocabulary for OOV recall).
    """

    OOV = "<OOV>"
    BOS = "<BOS>"
    EOS = "<EOS>"
    SPECIALS = (OOV, BOS, EOS)

    FROM_TRAIN = 1
    EXTERNAL = 2
    GOLD_WORD = 4

    def __init__(self) -> None:
        self._ids: dict[str, int] = {}
        self._words: list[str] = []
        self._flags: list[int] = []
        for sym in self.SPECIALS:
            self._append(sym, 0)

    def _append(self, word: str, flags: int) -> int:
        idx = len(self._words)
        self._ids[word] = idx
        self._words.append(word)
        self._flags.append(flags)
        return idx

    @property
    def oov_id(self) -> int:
        return 0

    @property
    def bos_id(self) -> int:
        return 1

    @property
    def eos_id(self) -> int:
        return 2

    def add(self, word: str, flags: int = FROM_TRAIN) -> int:
        if not word:
            raise DataError("empty vocabulary entry")
        idx = self._ids.get(word)
        if idx is None:
            return self._append(word, flags)
        if not self._flags[idx] & self.EXTERNAL:
            self._flags[idx] |= flags & ~self.EXTERNAL
        return idx

    def __len__(self) -> int:
        return len(self._words)

    def __contains__(self, word: object) -> bool:
        return word in self._ids

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Vocabulary):
            return NotImplemented
        return self._words == other._words and self._flags == other._flags

    def get(self, word: str) -> int | None:
        return self._ids.get(word)

    def lookup(self, word: str) -> int:
        return self._ids.get(word, 0)

    def word(self, idx: int) -> str:
        return self._words[idx]

    def flags(self, idx: int) -> int:
        return self._flags[idx]

    def is_special(self, idx: int) -> bool:
        return idx < len(self.SPECIALS)

    def is_external(self, idx: int) -> bool:
        return bool(self._flags[idx] & self.EXTERNAL)

    def is_train_word(self, word: str) -> bool:
        idx = self._ids.get(word)
        return idx is not None and bool(self._flags[idx] & self.GOLD_WORD)

    def entries(self) -> Iterator[tuple[str, int]]:
        """Non-special entries in id order."""
        for idx in range(len(self.SPECIALS), len(self._words)):
            yield self._words[idx], idx

    def embedding_size(self) -> int:
        """Rows needed in an embedding table: every id except external ones."""
        n = len(self._words)
        while n > len(self.SPECIALS) and self._flags[n - 1] & self.EXTERNAL:
            n -= 1
        return n

    def embed_id(self, idx: int) -> int:
        return self.oov_id if self._flags[idx] & self.EXTERNAL else idx

    def copy(self) -> Vocabulary:
        other = Vocabulary.__new__(Vocabulary)
        other._ids = dict(self._ids)
        other._words = list(self._words)
        other._flags = list(self._flags)
        return other

    def to_records(self) -> list[tuple[str, int]]:
        return list(zip(self._words, self._flags))

    @classmethod
    def from_records(cls, records: Iterable[tuple[str, int]]) -> Vocabulary:
        vocab = cls.__new__(cls)
        vocab._ids, vocab._words, vocab._flags = {}, [], []
        for word, flags in records:
            if word in vocab._ids:
                raise DataError(f"duplicate vocabulary entry {word!r}")
            vocab._append(word, int(flags))
        if tuple(vocab._words[: len(cls.SPECIALS)]) != cls.SPECIALS:
            raise DataError("vocabulary does not start with the special symbols")
        return vocab


def build_train_vocab(corpus: Iterable[Sentence]) -> Vocabulary:
    """Every gold word and every character, ids assigned by first occurrence."""
    vocab = Vocabulary()
    for sent in corpus:
        for word in sent.words():
            for ch in word:
                vocab.add(ch, Vocabulary.FROM_TRAIN)
            vocab.add(word, Vocabulary.FROM_TRAIN | Vocabulary.GOLD_WORD)
    return vocab


def bigram_key(left: str, right: str) -> str:
    # real bigrams have length 2; boundary keys contain a special symbol and are longer
    return left + right


def sentence_bigrams(chars: Sequence[str]) -> list[str]:
    """Keys of the n+1 consecutive pairs including the <BOS>/<EOS> boundary pairs."""
    padded = [Vocabulary.BOS, *chars, Vocabulary.EOS]
    return [bigram_key(a, b) for a, b in zip(padded, padded[1:])]


def build_bigram_vocab(corpus: Iterable[Sentence]) -> Vocabulary:
    vocab = Vocabulary()
    for sent in corpus:
        for key in sentence_bigrams(sent.chars):
            vocab.add(key)
    return vocab


@dataclass(frozen=True)
class SegMetrics:
    precision: float
    recall: float
    f_value: float
    oov_recall: float

    def format(self) -> str:
        return "\t".join(
            f"{100 * v:.2f}" for v in (self.precision, self.recall, self.f_value, self.oov_recall)
        )


def f_measure(precision: float, recall: float) -> float:
    if precision + recall <= 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def evaluate(
    gold: Sequence[Sentence],
    pred: Sequence[Sequence[Span]],
    train_vocab: Vocabulary,
) -> SegMetrics:
    """Exact-span precision/recall/F plus recall over gold words unseen in training.

    ``oov_recall`` is 0 when the gold side has no OOV words.
    """
    if len(gold) != len(pred):
        raise DataError(f"{len(gold)} gold sentences but {len(pred)} predictions")
    n_gold = n_pred = n_match = 0
    n_oov = n_oov_match = 0
    for k, (g, p) in enumerate(zip(gold, pred)):
        if g.spans is None:
            raise DataError(f"sentence {k + 1} has no gold segmentation")
        try:
            validate_spans(p, len(g))
        except DataError as exc:
            raise DataError(f"prediction for sentence {k + 1}: {exc}") from None
        pred_set = set(p)
        n_gold += len(g.spans)
        n_pred += len(pred_set)
        for span in g.spans:
            hit = span in pred_set
            n_match += hit
            if not train_vocab.is_train_word(span_word(g.chars, span)):
                n_oov += 1
                n_oov_match += hit
    precision = n_match / n_pred if n_pred else 0.0
    recall = n_match / n_gold if n_gold else 0.0
    return SegMetrics(
        precision=precision,
        recall=recall,
        f_value=f_measure(precision, recall),
        oov_recall=n_oov_match / n_oov if n_oov else 0.0,
    )


@dataclass
class EmbeddingMatch:
    rows: dict[int, np.ndarray]
    coverage: float


def load_embeddings(path: str | Path, vocab: Vocabulary, dim: int) -> EmbeddingMatch:
    """Read a word2vec text file and keep the vectors of vocabulary entries.

    ``coverage`` is the fraction of non-special vocabulary entries found.
    """
    lines = _decode_lines(path)
    try:
        lineno, header = next(lines)
    except StopIteration:
        raise InputError(f"{path}: empty embedding file") from None
    fields = header.split()
    if len(fields) != 2 or not all(f.isdigit() for f in fields):
        raise InputError(f"{path}:{lineno}: expected header 'count dim'")
    file_dim = int(fields[1])
    if file_dim != dim:
        raise ConfigError(f"{path}: embedding dim {file_dim} does not match configured {dim}")
    rows: dict[int, np.ndarray] = {}
    for lineno, line in lines:
        if not line.strip():
            continue
        fields = line.rstrip().split(" ")
        if len(fields) != dim + 1:
            raise InputError(f"{path}:{lineno}: expected token and {dim} values")
        idx = vocab.get(fields[0])
        if idx is None or vocab.is_special(idx) or vocab.is_external(idx):
            continue
        try:
            rows[idx] = np.array([float(v) for v in fields[1:]], dtype=np.float64)
        except ValueError:
            raise InputError(f"{path}:{lineno}: non-numeric value") from None
    total = sum(1 for _, idx in vocab.entries() if not vocab.is_external(idx))
    return EmbeddingMatch(rows, len(rows) / total if total else 0.0)
