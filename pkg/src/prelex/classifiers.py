"""Classification heads over the (weighted) word-vector sequence.

Two heads share the interface "sequence in, class logits out": a windowed
convolution with max-over-time pooling, and a bidirectional LSTM whose
per-position outputs are combined by a learned softmax attention. Both
optionally apply a caller-supplied dropout function to the sentence vector
right before the dense layer.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import tensor as T
from .tensor import Tensor, _accum, _node, _sigmoid_stable

WINDOW_SIZES = (1, 2, 3, 4, 5)
NUM_FILTERS = 128
HIDDEN_SIZE = 50

DropoutFn = Callable[[Tensor], Tensor]


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


def _param(data) -> Tensor:
    return Tensor(data, requires_grad=True)


@dataclass
class TextCnnParams:
    """Per-window filter banks plus the dense head.

    Filters for window h are stored as an (h*dim, num_filters) matrix so a
    bank applies as one matmul against the stacked windows.
    """

    window_sizes: tuple[int, ...]
    num_filters: int
    filters: dict[int, Tensor]
    filter_biases: dict[int, Tensor]
    dense_w: Tensor
    dense_b: Tensor

    @classmethod
    def init(
        cls,
        dim: int,
        classes: int,
        rng: np.random.Generator,
        window_sizes: tuple[int, ...] = WINDOW_SIZES,
        num_filters: int = NUM_FILTERS,
    ) -> "TextCnnParams":
        filters = {}
        biases = {}
        for h in window_sizes:
            filters[h] = _param(_glorot(rng, h * dim, num_filters, (h * dim, num_filters)))
            biases[h] = _param(np.zeros(num_filters))
        pooled = num_filters * len(window_sizes)
        dense_w = _param(_glorot(rng, pooled, classes, (pooled, classes)))
        dense_b = _param(np.zeros(classes))
        return cls(tuple(window_sizes), num_filters, filters, biases, dense_w, dense_b)

    @property
    def pooled_size(self) -> int:
        return self.num_filters * len(self.window_sizes)

    def named_tensors(self) -> list[tuple[str, Tensor]]:
        out = []
        for h in self.window_sizes:
            out.append((f"cnn.filters.h{h}", self.filters[h]))
            out.append((f"cnn.filter_bias.h{h}", self.filter_biases[h]))
        out.append(("cnn.dense.weights", self.dense_w))
        out.append(("cnn.dense.bias", self.dense_b))
        return out


@dataclass
class LstmGates:
    """One direction's gate parameters, acting on [h_prev, x_t]."""

    forget_w: Tensor
    forget_b: Tensor
    input_w: Tensor
    input_b: Tensor
    cell_w: Tensor
    cell_b: Tensor
    output_w: Tensor
    output_b: Tensor

    @classmethod
    def init(cls, dim: int, hidden: int, rng: np.random.Generator) -> "LstmGates":
        def gate():
            return _param(_glorot(rng, hidden + dim, hidden, (hidden, hidden + dim)))

        return cls(
            forget_w=gate(), forget_b=_param(np.zeros(hidden)),
            input_w=gate(), input_b=_param(np.zeros(hidden)),
            cell_w=gate(), cell_b=_param(np.zeros(hidden)),
            output_w=gate(), output_b=_param(np.zeros(hidden)),
        )

    @property
    def hidden(self) -> int:
        return self.forget_w.data.shape[0]

    def named_tensors(self, prefix: str) -> list[tuple[str, Tensor]]:
        return [
            (f"{prefix}.forget.weights", self.forget_w),
            (f"{prefix}.forget.bias", self.forget_b),
            (f"{prefix}.input.weights", self.input_w),
            (f"{prefix}.input.bias", self.input_b),
            (f"{prefix}.cell.weights", self.cell_w),
            (f"{prefix}.cell.bias", self.cell_b),
            (f"{prefix}.output.weights", self.output_w),
            (f"{prefix}.output.bias", self.output_b),
        ]


@dataclass
class AttBlstmParams:
    forward_gates: LstmGates
    backward_gates: LstmGates
    attn_weights: Tensor  # length 2*hidden
    dense_w: Tensor  # (2*hidden, classes)
    dense_b: Tensor

    @classmethod
    def init(
        cls,
        dim: int,
        classes: int,
        rng: np.random.Generator,
        hidden: int = HIDDEN_SIZE,
    ) -> "AttBlstmParams":
        fwd = LstmGates.init(dim, hidden, rng)
        bwd = LstmGates.init(dim, hidden, rng)
        attn = _param(_glorot(rng, 2 * hidden, 1, 2 * hidden))
        dense_w = _param(_glorot(rng, 2 * hidden, classes, (2 * hidden, classes)))
        dense_b = _param(np.zeros(classes))
        return cls(fwd, bwd, attn, dense_w, dense_b)

    @property
    def hidden(self) -> int:
        return self.forward_gates.hidden

    def named_tensors(self) -> list[tuple[str, Tensor]]:
        out = self.forward_gates.named_tensors("lstm.forward")
        out += self.backward_gates.named_tensors("lstm.backward")
        out.append(("lstm.attention.weights", self.attn_weights))
        out.append(("lstm.dense.weights", self.dense_w))
        out.append(("lstm.dense.bias", self.dense_b))
        return out


def window_concat(u: Tensor, i: int, h: int) -> Tensor:
    """Concatenate rows i..i+h-1 (1-based) of the sentence matrix."""
    n = u.data.shape[0]
    if not 1 <= i <= n - h + 1:
        raise ValueError(f"window start {i} out of range for n={n}, h={h}")
    return T.concat([T.row(u, j) for j in range(i - 1, i - 1 + h)])


def conv_feature(u: Tensor, filt: Tensor, bias: Tensor, h: int) -> Tensor:
    """Feature map of one filter over all windows: relu(filt . window + bias)."""
    if filt.data.ndim != 1 or filt.data.shape[0] != h * u.data.shape[1]:
        raise ValueError("filter length must be window size times word dim")
    if u.data.shape[0] < h:
        raise RuntimeError(
            f"sentence of {u.data.shape[0]} rows is shorter than window {h}; "
            "pad before convolving"
        )
    return T.relu(T.add_scalar(T.matvec(T.windows(u, h), filt), bias))


def max_over_time(feature_map: Tensor) -> Tensor:
    """Largest activation of a feature map; ties route to the first position."""
    return T.vec_max(feature_map)


def textcnn_forward(
    u: Tensor,
    params: TextCnnParams,
    dropout_fn: DropoutFn | None = None,
) -> Tensor:
    """Sentence matrix -> class logits via convolution and max pooling."""
    if u.data.shape[0] == 0:
        raise ValueError("empty sentence")
    padded = T.pad_rows(u, max(u.data.shape[0], max(params.window_sizes)))
    pooled_parts = []
    for h in params.window_sizes:
        scores = T.add_rows(T.matmul(T.windows(padded, h), params.filters[h]),
                            params.filter_biases[h])
        pooled_parts.append(T.colmax(T.relu(scores)))
    pooled = T.concat(pooled_parts)
    if dropout_fn is not None:
        pooled = dropout_fn(pooled)
    return T.add(T.vecmat(pooled, params.dense_w), params.dense_b)


def lstm_step(
    x_t: Tensor, h_prev: Tensor, c_prev: Tensor, gates: LstmGates
) -> tuple[Tensor, Tensor]:
    """One gated recurrence step; returns (hidden state, cell state)."""
    d = gates.hidden
    if x_t.data.ndim != 1 or h_prev.data.shape != (d,) or c_prev.data.shape != (d,):
        raise ValueError("lstm_step state shapes do not match the gate parameters")
    z = T.concat([h_prev, x_t])
    f = T.sigmoid(T.add(T.matvec(gates.forget_w, z), gates.forget_b))
    i = T.sigmoid(T.add(T.matvec(gates.input_w, z), gates.input_b))
    c_tilde = T.tanh(T.add(T.matvec(gates.cell_w, z), gates.cell_b))
    o = T.sigmoid(T.add(T.matvec(gates.output_w, z), gates.output_b))
    c_t = T.add(T.mul(f, c_prev), T.mul(i, c_tilde))
    h_t = T.mul(o, T.tanh(c_t))
    return h_t, c_t


def _direction_states(u_data: np.ndarray, w: np.ndarray, b: np.ndarray,
                      d: int, reverse: bool):
    """Numpy recurrence over one direction; returns states plus the caches
    backprop-through-time needs."""
    n = u_data.shape[0]
    w_h = w[:, :d]
    x_pre = u_data @ w[:, d:].T + b  # (n, 4d)
    seq = list(range(n - 1, -1, -1)) if reverse else list(range(n))
    states = np.empty((n, d))
    cells = np.empty((n, d))
    gates_act = np.empty((n, 3 * d))
    cand = np.empty((n, d))
    cell_tanh = np.empty((n, d))
    h = np.zeros(d)
    c = np.zeros(d)
    for t in seq:
        pre = w_h @ h + x_pre[t]
        fio = _sigmoid_stable(pre[:3 * d])
        ct = np.tanh(pre[3 * d:])
        c = fio[:d] * c + fio[d:2 * d] * ct
        tc = np.tanh(c)
        h = fio[2 * d:] * tc
        states[t] = h
        cells[t] = c
        gates_act[t] = fio
        cand[t] = ct
        cell_tanh[t] = tc
    return seq, states, cells, gates_act, cand, cell_tanh


def _fused_gate_tensors(gates: LstmGates) -> tuple[Tensor, Tensor]:
    # gate order [f, i, o, c~] throughout
    w_all = T.concat_rows([gates.forget_w, gates.input_w, gates.output_w, gates.cell_w])
    b_all = T.concat([gates.forget_b, gates.input_b, gates.output_b, gates.cell_b])
    return w_all, b_all


def _lstm_direction(u: Tensor, gates: LstmGates, reverse: bool) -> Tensor:
    """All hidden states of one direction as an (n, d) tensor, row t being
    the state at position t.

    The recurrence runs as one tape node with hand-written backprop through
    time: per-step gradients are carried through the gate algebra and the
    parameter gradients fall out as stacked matmuls at the end. Iterating
    lstm_step gives the same values; this form is what makes
    sentence-length sequences affordable. The grad-check suite verifies it
    against finite differences through the whole recurrence.
    """
    d = gates.hidden
    n = u.data.shape[0]
    w_all, b_all = _fused_gate_tensors(gates)
    w = w_all.data
    w_h = w[:, :d]
    w_x = w[:, d:]
    seq, states, cells, gates_act, cand, cell_tanh = _direction_states(
        u.data, w, b_all.data, d, reverse
    )

    out = _node(states, (u, w_all, b_all))

    def backward():
        g_states = out.grad  # (n, d)
        dpre = np.empty((n, 4 * d))
        prev_states = np.zeros((n, d))  # processing-order predecessor of each position
        dh_carry = np.zeros(d)
        dc_carry = np.zeros(d)
        for j in range(n - 1, -1, -1):
            t = seq[j]
            f = gates_act[t, :d]
            i = gates_act[t, d:2 * d]
            o = gates_act[t, 2 * d:]
            ct = cand[t]
            tc = cell_tanh[t]
            c_prev = cells[seq[j - 1]] if j > 0 else np.zeros(d)
            if j > 0:
                prev_states[t] = states[seq[j - 1]]
            gh = g_states[t] + dh_carry
            dc = dc_carry + gh * o * (1.0 - tc * tc)
            row = dpre[t]
            row[:d] = dc * c_prev * f * (1.0 - f)
            row[d:2 * d] = dc * ct * i * (1.0 - i)
            row[2 * d:3 * d] = gh * tc * o * (1.0 - o)
            row[3 * d:] = dc * i * (1.0 - ct * ct)
            dh_carry = w_h.T @ row
            dc_carry = dc * f
        if w_all.requires_grad:
            dw = np.empty_like(w)
            dw[:, :d] = dpre.T @ prev_states
            dw[:, d:] = dpre.T @ u.data
            _accum(w_all, dw)
        _accum(b_all, dpre.sum(axis=0))
        if u.requires_grad:
            _accum(u, dpre @ w_x)

    out._backward = backward
    return out


def bilstm_forward(u: Tensor, params: AttBlstmParams) -> Tensor:
    """Run both directions from zero states; column i is [fwd_i ; bwd_i]."""
    n = u.data.shape[0]
    if n == 0:
        raise ValueError("empty sentence")
    fwd = _lstm_direction(u, params.forward_gates, reverse=False)
    bwd = _lstm_direction(u, params.backward_gates, reverse=True)
    return T.concat_rows([T.transpose(fwd), T.transpose(bwd)])


def sentence_attention(
    h: Tensor, attn_weights: Tensor, keep: np.ndarray | None = None
) -> tuple[Tensor, Tensor]:
    """Combine BiLSTM columns into one vector by learned softmax attention.

    ``keep`` marks real (non-PAD) positions; masked columns get weight zero
    and are excluded from the softmax. Returns (sentence vector, weights).
    """
    n = h.data.shape[1]
    if attn_weights.data.shape != (h.data.shape[0],):
        raise ValueError("attention vector length must match the state size")
    if keep is None:
        keep = np.ones(n, dtype=bool)
    scores = T.vecmat(attn_weights, T.tanh(h))
    alpha = T.masked_softmax(scores, keep)
    return T.matvec(h, alpha), alpha


def attblstm_forward(
    u: Tensor,
    params: AttBlstmParams,
    dropout_fn: DropoutFn | None = None,
    keep: np.ndarray | None = None,
) -> Tensor:
    """Sentence matrix -> class logits via BiLSTM plus sentence attention."""
    h = bilstm_forward(u, params)
    gamma, _ = sentence_attention(h, params.attn_weights, keep)
    hstar = T.tanh(gamma)
    if dropout_fn is not None:
        hstar = dropout_fn(hstar)
    return T.add(T.vecmat(hstar, params.dense_w), params.dense_b)


def _lstm_direction_batch(u: Tensor, n_steps: int, gates: LstmGates,
                          reverse: bool) -> Tensor:
    """Batched recurrence over equal-length sentences stacked row-wise.

    ``u`` holds B sentences of n_steps rows each, concatenated; the output
    keeps the same layout with d columns. Same hand-written BPTT as
    _lstm_direction, with the batch dimension carried through every step.
    """
    d = gates.hidden
    total = u.data.shape[0]
    if n_steps < 1 or total % n_steps:
        raise ValueError(f"{total} stacked rows do not divide into length-{n_steps} sentences")
    b = total // n_steps
    w_all, b_all = _fused_gate_tensors(gates)
    w = w_all.data
    w_h = w[:, :d]
    w_x = w[:, d:]
    x_pre = u.data @ w_x.T + b_all.data  # (B*n, 4d)

    seq = list(range(n_steps - 1, -1, -1)) if reverse else list(range(n_steps))
    base = np.arange(b) * n_steps
    states = np.empty((total, d))
    cells = np.empty((total, d))
    gates_act = np.empty((total, 3 * d))
    cand = np.empty((total, d))
    cell_tanh = np.empty((total, d))
    h = np.zeros((d, b))
    c = np.zeros((d, b))
    for t in seq:
        rows = base + t
        pre = w_h @ h + x_pre[rows].T  # (4d, B)
        fio = _sigmoid_stable(pre[:3 * d])
        ct = np.tanh(pre[3 * d:])
        c = fio[:d] * c + fio[d:2 * d] * ct
        tc = np.tanh(c)
        h = fio[2 * d:] * tc
        states[rows] = h.T
        cells[rows] = c.T
        gates_act[rows] = fio.T
        cand[rows] = ct.T
        cell_tanh[rows] = tc.T

    out = _node(states, (u, w_all, b_all))

    def backward():
        g_states = out.grad
        dpre = np.empty((total, 4 * d))
        prev_states = np.zeros((total, d))
        dh_carry = np.zeros((d, b))
        dc_carry = np.zeros((d, b))
        for j in range(n_steps - 1, -1, -1):
            t = seq[j]
            rows = base + t
            fio = gates_act[rows].T
            f = fio[:d]
            i = fio[d:2 * d]
            o = fio[2 * d:]
            ct = cand[rows].T
            tc = cell_tanh[rows].T
            if j > 0:
                prev_rows = base + seq[j - 1]
                c_prev = cells[prev_rows].T
                prev_states[rows] = states[prev_rows]
            else:
                c_prev = np.zeros((d, b))
            gh = g_states[rows].T + dh_carry
            dc = dc_carry + gh * o * (1.0 - tc * tc)
            block = np.empty((4 * d, b))
            block[:d] = dc * c_prev * f * (1.0 - f)
            block[d:2 * d] = dc * ct * i * (1.0 - i)
            block[2 * d:3 * d] = gh * tc * o * (1.0 - o)
            block[3 * d:] = dc * i * (1.0 - ct * ct)
            dpre[rows] = block.T
            dh_carry = w_h.T @ block
            dc_carry = dc * f
        if w_all.requires_grad:
            dw = np.empty_like(w)
            dw[:, :d] = dpre.T @ prev_states
            dw[:, d:] = dpre.T @ u.data
            _accum(w_all, dw)
        _accum(b_all, dpre.sum(axis=0))
        if u.requires_grad:
            _accum(u, dpre @ w_x)

    out._backward = backward
    return out


def attblstm_forward_batch(
    u: Tensor,
    n_steps: int,
    params: AttBlstmParams,
    dropout_fn: DropoutFn | None = None,
) -> list[Tensor]:
    """Logits for a stack of equal-length sentences (rows grouped by sentence)."""
    b = u.data.shape[0] // n_steps
    fwd = _lstm_direction_batch(u, n_steps, params.forward_gates, reverse=False)
    bwd = _lstm_direction_batch(u, n_steps, params.backward_gates, reverse=True)
    h_all = T.concat_rows([T.transpose(fwd), T.transpose(bwd)])  # (2d, B*n)
    logits = []
    for s in range(b):
        h = T.col_slice(h_all, s * n_steps, (s + 1) * n_steps)
        gamma, _ = sentence_attention(h, params.attn_weights)
        hstar = T.tanh(gamma)
        if dropout_fn is not None:
            hstar = dropout_fn(hstar)
        logits.append(T.add(T.vecmat(hstar, params.dense_w), params.dense_b))
    return logits


def textcnn_logits_array(u_data: np.ndarray, params: TextCnnParams) -> np.ndarray:
    """Inference-only forward on plain arrays (no tape)."""
    n = u_data.shape[0]
    if n == 0:
        raise ValueError("empty sentence")
    target = max(n, max(params.window_sizes))
    if target > n:
        u_data = np.vstack([u_data, np.zeros((target - n, u_data.shape[1]))])
    dim = u_data.shape[1]
    pooled_parts = []
    for h in params.window_sizes:
        nw = target - h + 1
        win = np.empty((nw, h * dim))
        for j in range(h):
            win[:, j * dim:(j + 1) * dim] = u_data[j:j + nw]
        scores = win @ params.filters[h].data + params.filter_biases[h].data
        pooled_parts.append(np.maximum(scores, 0.0).max(axis=0))
    pooled = np.concatenate(pooled_parts)
    return pooled @ params.dense_w.data + params.dense_b.data


def attblstm_logits_array(u_data: np.ndarray, params: AttBlstmParams) -> np.ndarray:
    """Inference-only forward on plain arrays (no tape)."""
    n = u_data.shape[0]
    if n == 0:
        raise ValueError("empty sentence")
    d = params.hidden
    halves = []
    for gates, reverse in ((params.forward_gates, False), (params.backward_gates, True)):
        w = np.concatenate(
            [gates.forget_w.data, gates.input_w.data, gates.output_w.data,
             gates.cell_w.data], axis=0)
        b = np.concatenate(
            [gates.forget_b.data, gates.input_b.data, gates.output_b.data,
             gates.cell_b.data])
        halves.append(_direction_states(u_data, w, b, d, reverse)[1])
    h = np.concatenate([halves[0].T, halves[1].T], axis=0)  # (2d, n)
    scores = params.attn_weights.data @ np.tanh(h)
    e = np.exp(scores - scores.max())
    alpha = e / e.sum()
    hstar = np.tanh(h @ alpha)
    return hstar @ params.dense_w.data + params.dense_b.data
