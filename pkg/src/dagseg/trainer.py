"""Max-margin training with minibatch AdaGrad, dropout and IV word dropout."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from dagseg import inference
from dagseg.config import TrainConfig
from dagseg.corpus import SegMetrics, Sentence, evaluate, load_embeddings, spans_to_tags
from dagseg.errors import DataError, NumericError
from dagseg.model import Prepared, Segmenter
from dagseg.numeric import Graph, Node, adagrad_step

__all__ = [
    "EpochLog",
    "TrainConfig",
    "TrainResult",
    "Trainer",
    "apply_iv_word_dropout",
    "sentence_loss",
    "split_dev",
    "train",
]

log = logging.getLogger(__name__)

Span = tuple[int, int]


def apply_iv_word_dropout(
    span_rows: Mapping[Span, int],
    p_iv: float,
    rng: np.random.Generator,
    oov_row: int = 0,
) -> dict[Span, int]:
    """Map each multi-character word occurrence to ``<OOV>`` with probability ``p_iv``.

    Single characters are never dropped and the lattice itself is untouched.
    One decision per occurrence, shared by the forward and backward lattices.
    """
    out = dict(span_rows)
    if p_iv <= 0.0:
        return out
    for span in sorted(out):
        if span[1] > span[0] and rng.random() < p_iv:
            out[span] = oov_row
    return out


def sentence_loss(
    g: Graph,
    model: Segmenter,
    prep: Prepared,
    gold: Sequence[int],
    config: TrainConfig,
    rng: np.random.Generator | None = None,
) -> Node | None:
    """Structured hinge loss for one sentence, or ``None`` when it is zero.

    With ``rng`` given, conventional and IV word dropout are active.
    """
    span_rows = None
    if rng is not None and model.is_dag:
        span_rows = apply_iv_word_dropout(
            prep.span_rows, config.iv_dropout, rng, model.vocab.oov_id
        )
    emit = model.emissions(g, prep, rng, span_rows)
    trans_v, start_v = model.transitions()
    if config.plain_decode_train:
        pred = inference.viterbi(emit.value, trans_v, start_v).tags
    else:
        pred = inference.viterbi_cost_augmented(
            emit.value, trans_v, start_v, gold, config.eta
        ).tags
    margin = inference.hamming_margin(gold, pred, config.eta)
    trans = g.param(inference.TRANS)
    start = g.param(inference.START)
    diff = g.sub(
        inference.path_score(g, emit, trans, start, pred),
        inference.path_score(g, emit, trans, start, gold),
    )
    loss = g.add_const(diff, margin)
    if float(loss.value) <= 0.0:
        return None
    return loss


@dataclass
class EpochLog:
    epoch: int
    train_loss: float
    dev: SegMetrics | None

    def format(self) -> str:
        fields = [str(self.epoch), f"{self.train_loss:.6f}"]
        if self.dev is None:
            fields += ["-"] * 4
        else:
            fields += self.dev.format().split("\t")
        return "\t".join(fields)


@dataclass
class TrainResult:
    model: Segmenter
    history: list[EpochLog] = field(default_factory=list)
    best_epoch: int = 0


def split_dev(
    corpus: Sequence[Sentence], ratio: float, seed: int
) -> tuple[list[Sentence], list[Sentence]]:
    """Seeded shuffle, then the first ``floor(ratio * len)`` sentences become dev."""
    order = np.random.default_rng([seed, 0]).permutation(len(corpus))
    shuffled = [corpus[k] for k in order]
    n_dev = int(ratio * len(shuffled))
    return shuffled[n_dev:], shuffled[:n_dev]


class Trainer:
    """Holds the model, the prepared training data and the random streams.

    ``grad_hook(store)`` runs after each minibatch's gradients are averaged and
    before the update.
    """

    def __init__(
        self,
        model: Segmenter,
        train_set: Sequence[Sentence],
        config: TrainConfig | None = None,
        grad_hook: Callable | None = None,
    ) -> None:
        if not train_set:
            raise DataError("empty training set")
        self.model = model
        self.config = config or model.config
        self.train_set = list(train_set)
        self.gold = [spans_to_tags(s.spans, len(s)) for s in self.train_set]
        self.prepared = [model.prepare(s.chars) for s in self.train_set]
        self.shuffle_rng = np.random.default_rng([self.config.seed, 1])
        self.dropout_rng = np.random.default_rng([self.config.seed, 2])
        self.grad_hook = grad_hook
        self.epoch = 0
        embed_prefix = "embed."
        self._decay = None if self.config.l2_embeddings else (
            lambda name: not name.startswith(embed_prefix)
        )

    def batch_gradient(self, indices: Sequence[int], rng: np.random.Generator | None) -> float:
        """Accumulate the mean hinge loss gradient of a batch into the store; return the mean loss."""
        store = self.model.store
        total = 0.0
        for k in indices:
            g = Graph(store)
            loss = sentence_loss(g, self.model, self.prepared[k], self.gold[k], self.config, rng)
            if loss is not None:
                total += float(loss.value)
                g.backward(loss)
        store.scale_grad(1.0 / len(indices))
        return total / len(indices)

    def objective(self, indices: Sequence[int] | None = None, with_grad: bool = False) -> float:
        """Mean hinge loss plus ``l2/2 ||theta||^2`` without dropout.

        With ``with_grad`` the store's gradients hold the full objective gradient afterwards.
        """
        if indices is None:
            indices = range(len(self.train_set))
        store = self.model.store
        if with_grad:
            store.zero_grad()
            value = self.batch_gradient(indices, None)
        else:
            value = 0.0
            for k in indices:
                g = Graph(store)
                loss = sentence_loss(g, self.model, self.prepared[k], self.gold[k], self.config)
                if loss is not None:
                    value += float(loss.value)
            value /= len(indices)
        l2 = self.config.l2
        if l2:
            names = [p.name for p in store if self._decay is None or self._decay(p.name)]
            value += 0.5 * l2 * store.squared_norm(names)
            if with_grad:
                for name in names:
                    p = store[name]
                    if p.trainable:
                        p.grad += l2 * p.value
        return value

    def train_epoch(self) -> float:
        cfg = self.config
        order = self.shuffle_rng.permutation(len(self.train_set))
        losses = []
        for lo in range(0, len(order), cfg.batch_size):
            batch = order[lo : lo + cfg.batch_size]
            loss = self.batch_gradient(batch, self.dropout_rng)
            if not math.isfinite(loss):
                raise NumericError(f"loss diverged at epoch {self.epoch + 1}")
            if self.grad_hook is not None:
                self.grad_hook(self.model.store)
            adagrad_step(
                self.model.store,
                cfg.lr,
                cfg.l2,
                cfg.adagrad_eps,
                cfg.clip_norm,
                self._decay,
            )
            losses.append(loss * len(batch))
        self.epoch += 1
        return sum(losses) / len(order)


def evaluate_model(model: Segmenter, gold: Sequence[Sentence]) -> SegMetrics:
    pred = [model.segment(s.chars) for s in gold]
    return evaluate(gold, pred, model.vocab)


def train(
    corpus: Sequence[Sentence],
    config: TrainConfig,
    dev: Sequence[Sentence] | None = None,
    on_epoch: Callable[[EpochLog], None] | None = None,
    grad_hook: Callable | None = None,
) -> TrainResult:
    """Train for ``config.epochs`` epochs, keeping the parameters with the best dev F.

    Without an explicit ``dev`` set, ``config.dev_ratio`` of the shuffled corpus
    is held out. Without any dev data the final parameters are kept.
    """
    config.validate()
    if dev is None:
        train_set, dev_set = split_dev(corpus, config.dev_ratio, config.seed)
    else:
        train_set, dev_set = list(corpus), list(dev)
    if not train_set:
        raise DataError("empty training set")
    model = Segmenter.create(config, train_set)
    if config.embeddings:
        match = load_embeddings(config.embeddings, model.vocab, config.d_e)
        model.apply_embeddings(match)
        log.info("pre-trained embeddings cover %.2f%% of the vocabulary", 100 * match.coverage)
    trainer = Trainer(model, train_set, config, grad_hook)
    result = TrainResult(model)
    best_f = -1.0
    best_params = None
    for epoch in range(1, config.epochs + 1):
        loss = trainer.train_epoch()
        metrics = evaluate_model(model, dev_set) if dev_set else None
        entry = EpochLog(epoch, loss, metrics)
        result.history.append(entry)
        log.info("epoch %s", entry.format())
        if on_epoch is not None:
            on_epoch(entry)
        if metrics is not None and metrics.f_value > best_f:
            best_f = metrics.f_value
            best_params = model.store.snapshot()
            result.best_epoch = epoch
    if best_params is not None:
        model.store.restore(best_params)
    else:
        result.best_epoch = config.epochs
    return result
