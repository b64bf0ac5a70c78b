"""Loss, regularization, Adam optimization, the four model variants, and
evaluation.

Variants pair one of the two heads with or without the per-word attention
layer; the "plain" variants feed the frozen embedding rows straight to the
head. All randomness (init, shuffling, dropout) derives from the config
seed, so a (config, data) pair fully determines the trained model.
"""

from __future__ import annotations

import functools
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import tensor as T
from .classifiers import (
    HIDDEN_SIZE, NUM_FILTERS, WINDOW_SIZES, AttBlstmParams, TextCnnParams,
    attblstm_forward, attblstm_forward_batch, attblstm_logits_array,
    textcnn_forward, textcnn_logits_array,
)
from .corpus import DatasetSplit, Example
from .embeddings import EmbeddingMatrix
from .preattention import (
    PreAttentionParams, apply_pre_attention, attention_profile_array,
)
from .tensor import NumericError, Tensor

VARIANTS = ("text-cnn", "pre-attn-text-cnn", "att-blstm", "pre-attn-att-blstm")

# grid-searched settings reported for each head family
HEAD_DEFAULTS = {
    "text-cnn": dict(learning_rate=0.001, dropout_rate=0.4, l2_coeff=1.0),
    "att-blstm": dict(learning_rate=0.01, dropout_rate=0.5, l2_coeff=0.1),
}


def cross_entropy(logits: Tensor, label: int) -> Tensor:
    """Log-space negative log-likelihood of the true class."""
    return T.cross_entropy(logits, label)


def l2_penalty(dense_weights: Tensor, coeff: float) -> Tensor:
    """(coeff/2) * sum of squared dense-head weights; biases excluded."""
    if coeff < 0:
        raise ValueError("l2 coefficient must be >= 0")
    return T.scale(T.sumsq(dense_weights), coeff / 2.0)


def dropout(x: Tensor, rate: float, train: bool, rng: np.random.Generator | None) -> Tensor:
    """Inverted dropout: zero with probability ``rate``, scale survivors."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate {rate} outside [0, 1)")
    if not train or rate == 0.0:
        return x
    if rng is None:
        raise ValueError("training-mode dropout needs an rng")
    mask = (rng.random(x.data.shape) >= rate) / (1.0 - rate)
    return T.mul(x, Tensor(mask))


@dataclass
class AdamState:
    """First/second moment estimates plus the shared step counter."""

    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: list[tuple[str, Tensor]]) -> "AdamState":
        return cls(
            step=0,
            m={name: np.zeros_like(p.data) for name, p in params},
            v={name: np.zeros_like(p.data) for name, p in params},
        )


def optimizer_step(
    params: list[tuple[str, Tensor]],
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """One bias-corrected Adam update over the named parameters."""
    state.step += 1
    t = state.step
    for name, p in params:
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        if g.shape != p.data.shape:
            raise ValueError(f"gradient shape mismatch for {name}")
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1 ** t)
        v_hat = v / (1.0 - beta2 ** t)
        p.data -= lr * m_hat / (np.sqrt(v_hat) + eps)


@dataclass
class TrainConfig:
    variant: str
    learning_rate: float
    dropout_rate: float
    l2_coeff: float
    batch_size: int = 64
    max_epochs: int = 50
    patience: int = 5
    seed: int = 0
    max_len: int = 60
    embedding_dim: int = 300
    l2_mode: str = "penalty"  # "penalty" or "maxnorm"
    stop_at_dev_accuracy: float | None = None  # end training once dev hits this

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.l2_coeff < 0:
            raise ValueError("l2_coeff must be >= 0")
        if self.batch_size < 1 or self.patience < 1 or self.max_epochs < 1:
            raise ValueError("batch_size, patience, and max_epochs must be >= 1")
        if self.max_len < 1 or self.embedding_dim < 1:
            raise ValueError("max_len and embedding_dim must be >= 1")
        if self.l2_mode not in ("penalty", "maxnorm"):
            raise ValueError("l2_mode must be 'penalty' or 'maxnorm'")
        if self.stop_at_dev_accuracy is not None and not 0.0 < self.stop_at_dev_accuracy <= 1.0:
            raise ValueError("stop_at_dev_accuracy must lie in (0, 1]")

    @classmethod
    def for_variant(cls, variant: str, **overrides) -> "TrainConfig":
        head = "att-blstm" if variant.endswith("att-blstm") else "text-cnn"
        fields = dict(HEAD_DEFAULTS[head])
        fields.update(overrides)
        return cls(variant=variant, **fields)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)


class Model:
    """Embedding lookup + optional pre-attention + one classification head."""

    def __init__(
        self,
        variant: str,
        embeddings: EmbeddingMatrix,
        classes: int,
        rng: np.random.Generator,
        window_sizes: tuple[int, ...] = WINDOW_SIZES,
        num_filters: int = NUM_FILTERS,
        hidden: int = HIDDEN_SIZE,
    ):
        if variant not in VARIANTS:
            raise ValueError(f"unknown variant {variant!r}")
        self.variant = variant
        self.embeddings = embeddings
        self.classes = classes
        dim = embeddings.dim
        self.pre_attn = (
            PreAttentionParams.neutral(dim) if variant.startswith("pre-attn") else None
        )
        if variant.endswith("text-cnn"):
            self.head: TextCnnParams | AttBlstmParams = TextCnnParams.init(
                dim, classes, rng, window_sizes=window_sizes, num_filters=num_filters
            )
        else:
            self.head = AttBlstmParams.init(dim, classes, rng, hidden=hidden)

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        out: list[tuple[str, Tensor]] = []
        if self.pre_attn is not None:
            out.extend(self.pre_attn.named_tensors())
        out.extend(self.head.named_tensors())
        return out

    def dense_weights(self) -> Tensor:
        return self.head.dense_w

    def logits(self, token_ids, dropout_fn: Callable[[Tensor], Tensor] | None = None) -> Tensor:
        s = Tensor(self.embeddings.rows(token_ids))  # frozen rows, no grad
        u = apply_pre_attention(s, self.pre_attn) if self.pre_attn is not None else s
        if isinstance(self.head, TextCnnParams):
            return textcnn_forward(u, self.head, dropout_fn)
        return attblstm_forward(u, self.head, dropout_fn)

    def logits_array(self, token_ids) -> np.ndarray:
        """Inference forward without the tape; same math as logits()."""
        s = self.embeddings.rows(token_ids)
        if self.pre_attn is not None:
            u = s * attention_profile_array(s, self.pre_attn)[:, None]
        else:
            u = s
        if isinstance(self.head, TextCnnParams):
            return textcnn_logits_array(u, self.head)
        return attblstm_logits_array(u, self.head)

    def predict(self, token_ids) -> int:
        return int(self.logits_array(token_ids).argmax())


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    dev_accuracy: float


@dataclass
class EvalReport:
    accuracy: float
    correct: int
    total: int
    per_class: dict[int, tuple[int, int]]  # label -> (correct, total)
    loss: float


def evaluate(model: Model, examples: list[Example]) -> EvalReport:
    """Argmax accuracy and mean cross-entropy with dropout disabled."""
    if not examples:
        raise ValueError("evaluate needs at least one example")
    correct = 0
    loss_sum = 0.0
    per_class: dict[int, list[int]] = {}
    for ex in examples:
        logits = model.logits_array(ex.token_ids)
        m = logits.max()
        loss_sum += m + np.log(np.exp(logits - m).sum()) - logits[ex.label]
        hit = int(logits.argmax()) == ex.label
        correct += hit
        cls = per_class.setdefault(ex.label, [0, 0])
        cls[0] += hit
        cls[1] += 1
    return EvalReport(
        accuracy=correct / len(examples),
        correct=correct,
        total=len(examples),
        per_class={k: (v[0], v[1]) for k, v in sorted(per_class.items())},
        loss=loss_sum / len(examples),
    )


def _maxnorm_clamp(dense_w: Tensor, limit: float) -> None:
    # per-class column norms clamped to the limit
    norms = np.sqrt((dense_w.data ** 2).sum(axis=0))
    over = norms > limit
    if over.any():
        dense_w.data[:, over] *= limit / norms[over]


def _blstm_group_losses(
    model: Model, batch: list[Example], dropout_fn
) -> list[Tensor]:
    # equal-length sentences share one batched recurrence
    groups: dict[int, list[Example]] = {}
    for ex in batch:
        groups.setdefault(len(ex.token_ids), []).append(ex)
    losses: list[Tensor] = []
    for n_steps in sorted(groups):
        group = groups[n_steps]
        ids = [i for ex in group for i in ex.token_ids]
        s = Tensor(model.embeddings.rows(ids))
        u = apply_pre_attention(s, model.pre_attn) if model.pre_attn is not None else s
        logit_list = attblstm_forward_batch(u, n_steps, model.head, dropout_fn)
        losses.extend(
            cross_entropy(lg, ex.label) for lg, ex in zip(logit_list, group)
        )
    return losses


def batch_loss(
    model: Model,
    batch: list[Example],
    config: TrainConfig,
    dropout_rng: np.random.Generator | None,
) -> Tensor:
    """Mean cross-entropy over the batch plus the dense-head penalty."""
    dropout_fn = None
    if config.dropout_rate > 0 and dropout_rng is not None:
        dropout_fn = functools.partial(
            dropout, rate=config.dropout_rate, train=True, rng=dropout_rng
        )
    if isinstance(model.head, AttBlstmParams):
        losses = _blstm_group_losses(model, batch, dropout_fn)
    else:
        losses = [
            cross_entropy(model.logits(ex.token_ids, dropout_fn), ex.label)
            for ex in batch
        ]
    total = None
    for loss in losses:
        total = loss if total is None else T.add(total, loss)
    mean = T.scale(total, 1.0 / len(batch))
    if config.l2_mode == "penalty" and config.l2_coeff > 0:
        mean = T.add(mean, l2_penalty(model.dense_weights(), config.l2_coeff))
    return mean


def train(
    config: TrainConfig,
    split: DatasetSplit,
    embeddings: EmbeddingMatrix,
    vocab_fingerprint: str = "",
    log: Callable[[str], None] | None = None,
    window_sizes: tuple[int, ...] = WINDOW_SIZES,
    num_filters: int = NUM_FILTERS,
    hidden: int = HIDDEN_SIZE,
):
    """Mini-batch training with dev-accuracy early stopping.

    Keeps the best-dev parameter snapshot and returns it as a Checkpoint.
    The embedding matrix is read, never written.
    """
    from .checkpoint import Checkpoint  # local import: checkpoint depends on us

    if not split.train:
        raise ValueError("empty training split")
    if not split.dev:
        raise ValueError("training requires a dev split for model selection")

    seeds = np.random.SeedSequence(config.seed).spawn(3)
    init_rng = np.random.default_rng(seeds[0])
    shuffle_rng = np.random.default_rng(seeds[1])
    dropout_rng = np.random.default_rng(seeds[2])

    model = Model(
        config.variant, embeddings, split.class_count, init_rng,
        window_sizes=window_sizes, num_filters=num_filters, hidden=hidden,
    )
    params = model.named_parameters()
    adam = AdamState.for_params(params)

    history: list[EpochRecord] = []
    best_epoch = 0
    snapshot_epoch = 0
    best_acc = -1.0
    best_tensors: dict[str, np.ndarray] = {}
    best_adam: AdamState | None = None

    n = len(split.train)
    for epoch in range(1, config.max_epochs + 1):
        order = shuffle_rng.permutation(n)
        loss_sum = 0.0
        batches = 0
        for lo in range(0, n, config.batch_size):
            batch = [split.train[i] for i in order[lo:lo + config.batch_size]]
            for _, p in params:
                p.zero_grad()
            loss = batch_loss(model, batch, config, dropout_rng)
            if not np.isfinite(loss.data):
                raise NumericError(f"non-finite loss in epoch {epoch}")
            loss.backward()
            optimizer_step(params, adam, config.learning_rate)
            if config.l2_mode == "maxnorm" and config.l2_coeff > 0:
                _maxnorm_clamp(model.dense_weights(), config.l2_coeff)
            loss_sum += loss.item()
            batches += 1
        dev = evaluate(model, split.dev)
        record = EpochRecord(epoch, loss_sum / batches, dev.accuracy)
        history.append(record)
        if log is not None:
            log(
                f"epoch {record.epoch} train_loss {record.train_loss:.6f} "
                f"dev_accuracy {record.dev_accuracy:.6f}"
            )
        if dev.accuracy >= best_acc:
            # ties refresh the snapshot (the later model has trained longer at
            # the same dev accuracy) but only strict gains reset patience
            if dev.accuracy > best_acc:
                best_epoch = epoch
            best_acc = dev.accuracy
            snapshot_epoch = epoch
            best_tensors = {name: p.data.copy() for name, p in params}
            best_adam = AdamState(
                step=adam.step,
                m={k: a.copy() for k, a in adam.m.items()},
                v={k: a.copy() for k, a in adam.v.items()},
            )
        if (config.stop_at_dev_accuracy is not None
                and dev.accuracy >= config.stop_at_dev_accuracy):
            break
        if epoch - best_epoch >= config.patience:
            break

    return Checkpoint(
        config=config,
        vocab_fingerprint=vocab_fingerprint,
        class_count=split.class_count,
        tensors=best_tensors,
        adam=best_adam,
        history=history,
        best_epoch=best_epoch,
        snapshot_epoch=snapshot_epoch,
        window_sizes=tuple(window_sizes),
        num_filters=num_filters,
        hidden=hidden,
    )
