"""The repository's gradient gate: every differentiable block, checked
against central finite differences on batches of random small instances.

Used by both the CLI ``grad-check`` command and the acceptance suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .classifiers import (
    AttBlstmParams, LstmGates, TextCnnParams, attblstm_forward, bilstm_forward,
    lstm_step, sentence_attention, textcnn_forward,
)
from .gradcheck import GradCheckReport, grad_check
from .preattention import PreAttentionParams, apply_pre_attention
from .tensor import Tensor


@dataclass
class SuiteResult:
    name: str
    instance: int
    report: GradCheckReport

    @property
    def passed(self) -> bool:
        return self.report.passed


def _rand_pre_attn(rng, dim):
    return PreAttentionParams(
        weights=Tensor(rng.normal(size=dim), requires_grad=True),
        bias=Tensor(rng.normal(size=1), requires_grad=True),
    )


def _check_pre_attention(rng, epsilon, tolerance):
    n = int(rng.integers(1, 5))
    dim = int(rng.integers(2, 7))
    s_data = rng.normal(size=(n, dim))
    coeff = rng.normal(size=(n, dim))
    params = _rand_pre_attn(rng, dim)

    def f(w, b):
        u = apply_pre_attention(Tensor(s_data), PreAttentionParams(w, b))
        return T.tsum(T.mul(u, Tensor(coeff)))

    return grad_check(f, [params.weights, params.bias], epsilon, tolerance)


def _check_conv_pool(rng, epsilon, tolerance):
    # n >= the largest window: padded all-zero windows would sit exactly on
    # the relu kink / max-pool tie, where central differences are invalid
    n = int(rng.integers(3, 5))
    dim = int(rng.integers(2, 7))
    params = TextCnnParams.init(dim, 2, rng, window_sizes=(1, 2, 3), num_filters=2)
    for h in params.window_sizes:
        params.filter_biases[h].data = rng.normal(scale=0.1, size=2)
    u_data = rng.normal(size=(n, dim))
    coeff = rng.normal(size=params.pooled_size)
    tensors = [t for name, t in params.named_tensors() if not name.startswith("cnn.dense")]

    def f(*tensors):
        padded = T.pad_rows(Tensor(u_data), max(n, 3))
        pooled = T.concat([
            T.colmax(T.relu(T.add_rows(
                T.matmul(T.windows(padded, h), params.filters[h]),
                params.filter_biases[h],
            )))
            for h in params.window_sizes
        ])
        return T.dot(pooled, Tensor(coeff))

    return grad_check(f, tensors, epsilon, tolerance)


def _check_lstm_step(rng, epsilon, tolerance):
    dim = int(rng.integers(2, 7))
    d = int(rng.integers(1, 4))
    gates = LstmGates.init(dim, d, rng)
    x = rng.normal(size=dim)
    h_prev = rng.normal(size=d)
    c_prev = rng.normal(size=d)
    coeff_h = rng.normal(size=d)
    coeff_c = rng.normal(size=d)
    tensors = [t for _, t in gates.named_tensors("g")]

    def f(*tensors):
        h, c = lstm_step(Tensor(x), Tensor(h_prev), Tensor(c_prev), gates)
        return T.add(T.dot(h, Tensor(coeff_h)), T.dot(c, Tensor(coeff_c)))

    return grad_check(f, tensors, epsilon, tolerance)


def _check_bilstm_attention(rng, epsilon, tolerance):
    n = int(rng.integers(1, 5))
    dim = int(rng.integers(2, 7))
    d = int(rng.integers(1, 4))
    params = AttBlstmParams.init(dim, 2, rng, hidden=d)
    u_data = rng.normal(size=(n, dim))
    coeff = rng.normal(size=2 * d)
    tensors = [t for name, t in params.named_tensors() if not name.startswith("lstm.dense")]

    def f(*tensors):
        h = bilstm_forward(Tensor(u_data), params)
        gamma, _ = sentence_attention(h, params.attn_weights)
        return T.dot(T.tanh(gamma), Tensor(coeff))

    return grad_check(f, tensors, epsilon, tolerance)


def _check_loss_cnn(rng, epsilon, tolerance):
    n = int(rng.integers(3, 5))  # see _check_conv_pool on the lower bound
    dim = int(rng.integers(2, 7))
    pre = _rand_pre_attn(rng, dim)
    head = TextCnnParams.init(dim, 2, rng, window_sizes=(1, 2, 3), num_filters=2)
    for h in head.window_sizes:
        head.filter_biases[h].data = rng.normal(scale=0.1, size=2)
    s_data = rng.normal(size=(n, dim))
    label = int(rng.integers(2))
    tensors = [pre.weights, pre.bias] + [t for _, t in head.named_tensors()]

    def f(*tensors):
        u = apply_pre_attention(Tensor(s_data), pre)
        return T.cross_entropy(textcnn_forward(u, head), label)

    return grad_check(f, tensors, epsilon, tolerance)


def _check_loss_blstm(rng, epsilon, tolerance):
    n = int(rng.integers(1, 5))
    dim = int(rng.integers(2, 7))
    d = int(rng.integers(1, 4))
    pre = _rand_pre_attn(rng, dim)
    head = AttBlstmParams.init(dim, 2, rng, hidden=d)
    s_data = rng.normal(size=(n, dim))
    label = int(rng.integers(2))
    tensors = [pre.weights, pre.bias] + [t for _, t in head.named_tensors()]

    def f(*tensors):
        u = apply_pre_attention(Tensor(s_data), pre)
        return T.cross_entropy(attblstm_forward(u, head), label)

    return grad_check(f, tensors, epsilon, tolerance)


def _check_loss_blstm_batched(rng, epsilon, tolerance):
    from .classifiers import attblstm_forward_batch

    n = int(rng.integers(1, 4))
    batch = int(rng.integers(2, 4))
    dim = int(rng.integers(2, 6))
    d = int(rng.integers(1, 4))
    pre = _rand_pre_attn(rng, dim)
    head = AttBlstmParams.init(dim, 2, rng, hidden=d)
    s_data = rng.normal(size=(batch * n, dim))
    labels = [int(rng.integers(2)) for _ in range(batch)]
    tensors = [pre.weights, pre.bias] + [t for _, t in head.named_tensors()]

    def f(*tensors):
        u = apply_pre_attention(Tensor(s_data), pre)
        logits = attblstm_forward_batch(u, n, head)
        total = None
        for lg, label in zip(logits, labels):
            loss = T.cross_entropy(lg, label)
            total = loss if total is None else T.add(total, loss)
        return total

    return grad_check(f, tensors, epsilon, tolerance)


CHECKS = {
    "pre-attention": _check_pre_attention,
    "conv-pool": _check_conv_pool,
    "lstm-step": _check_lstm_step,
    "bilstm-attention": _check_bilstm_attention,
    "loss-pre-attn-text-cnn": _check_loss_cnn,
    "loss-pre-attn-att-blstm": _check_loss_blstm,
    "loss-pre-attn-att-blstm-batched": _check_loss_blstm_batched,
}


def run_suite(
    instances: int = 10,
    epsilon: float = 1e-5,
    tolerance: float = 1e-4,
    seed: int = 0,
) -> list[SuiteResult]:
    """Run every check on ``instances`` random instances each."""
    results = []
    for check_idx, (name, check) in enumerate(CHECKS.items()):
        for i in range(instances):
            # string hash() is salted per process; key streams positionally
            rng = np.random.default_rng(np.random.SeedSequence([seed, check_idx, i]))
            results.append(SuiteResult(name, i, check(rng, epsilon, tolerance)))
    return results
