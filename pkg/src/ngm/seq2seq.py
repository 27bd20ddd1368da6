"""GRU sequence-to-sequence models with attention and a copy gate.

One model class serves all three roles (sentence-to-n-gram encoder, its
inverse decoder, and the question-to-program programmer).  The encoder
consumes the context prepended to the source; each decoder step mixes a
generation softmax over the vocabulary with a copy distribution over the
concatenated context+source positions:

    p(y) = gate * softmax(W_out h + b_out) + (1 - gate) * scatter(attention)

with a scalar sigmoid gate over [decoder state; attention context].

Scoring/gradients run on the autodiff tape; beam decoding runs on plain
numpy forward passes.  All arithmetic is float64.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Protocol, Sequence

import numpy as np

from . import autodiff as ad
from . import vocab as V
from .errors import (InvalidDimsError, LengthOverflowError,
                     NonFiniteGradientError)

NEG_INF = -1e30


@dataclass(frozen=True)
class ModelDims:
    vocab_size: int
    max_source_len: int
    max_target_len: int
    embed_dim: int = 8
    hidden_dim: int = 8

    def __post_init__(self):
        for field in ("vocab_size", "max_source_len", "max_target_len",
                      "embed_dim", "hidden_dim"):
            if getattr(self, field) <= 0:
                raise InvalidDimsError(f"{field} must be positive")


def param_shapes(dims: ModelDims) -> list[tuple[str, tuple[int, int]]]:
    v, e, h = dims.vocab_size, dims.embed_dim, dims.hidden_dim
    return [
        ("embedding", (v, e)),
        ("enc_wx", (e, 3 * h)),
        ("enc_wh", (h, 3 * h)),
        ("enc_b", (1, 3 * h)),
        ("dec_wx", (e, 3 * h)),
        ("dec_wh", (h, 3 * h)),
        ("dec_b", (1, 3 * h)),
        ("att_w", (h, h)),
        ("out_w", (h, v)),
        ("out_b", (1, v)),
        ("copy_w", (2 * h, 1)),
        ("copy_b", (1, 1)),
    ]


@dataclass
class Seq2SeqModel:
    dims: ModelDims
    params: dict[str, np.ndarray]

    def copy(self) -> "Seq2SeqModel":
        return Seq2SeqModel(self.dims, {k: v.copy() for k, v in self.params.items()})


def init_model(dims: ModelDims, seed: int) -> Seq2SeqModel:
    """Uniform(-0.08, 0.08) parameters from a seeded generator."""
    rng = np.random.default_rng(seed)
    params = {name: rng.uniform(-0.08, 0.08, shape)
              for name, shape in param_shapes(dims)}
    return Seq2SeqModel(dims, params)


class Masker(Protocol):
    """Step-wise allowed-token oracle for constrained decoding.

    States must be immutable (hypotheses share and fork them).
    """

    def init(self): ...
    def allowed(self, state) -> Iterable[int]: ...
    def advance(self, state, token: int): ...


class FreeMasker:
    """Allows a fixed alphabet at every step."""

    def __init__(self, alphabet: Iterable[int]):
        self._alphabet = tuple(sorted(set(alphabet)))

    def init(self):
        return None

    def allowed(self, state):
        return self._alphabet

    def advance(self, state, token):
        return None


def _check_lengths(dims: ModelDims, source, context, target=None):
    if len(source) + len(context) > dims.max_source_len:
        raise LengthOverflowError(
            f"context+source length {len(source) + len(context)} exceeds "
            f"{dims.max_source_len}")
    if len(source) + len(context) == 0:
        raise LengthOverflowError("encoder input is empty")
    if target is not None and len(target) > dims.max_target_len + 1:
        raise LengthOverflowError(
            f"target length {len(target)} exceeds {dims.max_target_len + 1}")


# --- tape-based scoring -------------------------------------------------

def _encode_graph(p, ids: np.ndarray, lens: np.ndarray, hidden: int):
    emb = ad.embed(p["embedding"], ids)
    xp = ad.add(ad.dot(emb, p["enc_wx"]), p["enc_b"])
    b = ids.shape[0]
    h = ad.constant(np.zeros((b, hidden)))
    states = []
    for t in range(ids.shape[1]):
        h = ad.gru_step(ad.slice_time(xp, t), h, p["enc_wh"])
        states.append(h)
    enc = ad.stack_time(states)
    return enc, ad.gather_time(enc, lens - 1)


def score_batch(model: Seq2SeqModel, batch: Sequence[tuple], use_copy: bool = True):
    """Teacher-forced log-probabilities for (source, context, target, weight) rows.

    Builds one tape graph over the whole batch.  Returns (per-row log
    probabilities as a float array, weighted-sum scalar Tensor); call
    .backward() on the scalar to accumulate weighted gradients.
    """
    dims = model.dims
    b = len(batch)
    if b == 0:
        return np.zeros(0), None
    enc_ids, enc_lens, tgt_ids, tgt_lens, weights = [], [], [], [], []
    for source, context, target, weight in batch:
        _check_lengths(dims, source, context, target)
        enc_ids.append(list(context) + list(source))
        enc_lens.append(len(context) + len(source))
        tgt_ids.append(list(target))
        tgt_lens.append(len(target))
        weights.append(weight)
    s = max(enc_lens)
    t_max = max(tgt_lens)
    ids = np.full((b, s), V.PAD, dtype=np.int64)
    att_mask = np.full((b, s), NEG_INF)
    for i, row in enumerate(enc_ids):
        ids[i, :len(row)] = row
        att_mask[i, :len(row)] = 0.0
    if t_max == 0:
        return np.zeros(b), None
    tgt = np.full((b, t_max), V.EOS, dtype=np.int64)
    step_mask = np.zeros((b, t_max))
    for i, row in enumerate(tgt_ids):
        tgt[i, :len(row)] = row
        step_mask[i, :len(row)] = 1.0
    dec_in = np.concatenate([np.full((b, 1), V.GO, dtype=np.int64), tgt[:, :-1]], axis=1)

    p = {k: ad.param(arr) for k, arr in model.params.items()}
    hidden = dims.hidden_dim
    enc, h = _encode_graph(p, ids, np.asarray(enc_lens), hidden)
    logp = None
    for t in range(t_max):
        emb = ad.embed(p["embedding"], dec_in[:, t])
        xp = ad.add(ad.dot(emb, p["dec_wx"]), p["dec_b"])
        h = ad.gru_step(xp, h, p["dec_wh"])
        q = ad.dot(h, p["att_w"])
        scores = ad.reshape(ad.bmm(enc, ad.reshape(q, (b, hidden, 1))), (b, s))
        attw = ad.softmax(ad.add_const(scores, att_mask))
        gen = ad.softmax(ad.add(ad.dot(h, p["out_w"]), p["out_b"]))
        if use_copy:
            ctx = ad.reshape(ad.bmm(ad.reshape(attw, (b, 1, s)), enc), (b, hidden))
            gate = ad.sigmoid(ad.add(ad.dot(ad.concat([h, ctx]), p["copy_w"]),
                                     p["copy_b"]))
            copy = ad.scatter_probs(attw, ids, dims.vocab_size)
            probs = ad.add(ad.mul(gate, gen), ad.mul(ad.one_minus(gate), copy))
        else:
            probs = gen
        step = ad.mul_const(ad.log(ad.pick(probs, tgt[:, t])), step_mask[:, t])
        logp = step if logp is None else ad.add(logp, step)
    scalar = ad.weighted_sum(logp, np.asarray(weights, dtype=np.float64))
    return logp.data.copy(), _Graph(scalar, p)


@dataclass
class _Graph:
    scalar: ad.Tensor
    params: dict[str, ad.Tensor]


def score_sequence(model: Seq2SeqModel, source, context, target,
                   use_copy: bool = True) -> float:
    """Log-probability of `target` given context+source (teacher forced)."""
    logps, _ = score_batch(model, [(source, context, target, 0.0)], use_copy)
    return float(logps[0])


def compute_gradients(model: Seq2SeqModel, batch: Sequence[tuple],
                      use_copy: bool = True):
    """Sum of weight * grad(log P(target | source, context)) over the batch.

    Returns ({param name: gradient array}, per-row log probabilities).
    Raises NonFiniteGradientError if any accumulator is not finite.
    """
    logps, graph = score_batch(model, batch, use_copy)
    shapes = dict(param_shapes(model.dims))
    if graph is None:
        return {k: np.zeros(s) for k, s in shapes.items()}, logps
    graph.scalar.backward()
    grads = {}
    for name, tensor in graph.params.items():
        g = tensor.grad if tensor.grad is not None else np.zeros(shapes[name])
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(f"non-finite gradient in {name}")
        grads[name] = g
    return grads, logps


# --- numpy-only forward for decoding ------------------------------------

def _gru_step_np(xp, h, w_h):
    hh = h.shape[1]
    rec = h @ w_h
    z = 1.0 / (1.0 + np.exp(-(xp[:, :hh] + rec[:, :hh])))
    r = 1.0 / (1.0 + np.exp(-(xp[:, hh:2 * hh] + rec[:, hh:2 * hh])))
    c = np.tanh(xp[:, 2 * hh:] + r * rec[:, 2 * hh:])
    return z * h + (1.0 - z) * c


def encode_np(model: Seq2SeqModel, ids: Sequence[int]):
    """Encoder states (S, H) for one concatenated context+source row."""
    p = model.params
    ids = np.asarray(ids, dtype=np.int64)
    xp = p["embedding"][ids] @ p["enc_wx"] + p["enc_b"]
    h = np.zeros((1, model.dims.hidden_dim))
    states = []
    for t in range(len(ids)):
        h = _gru_step_np(xp[None, t], h, p["enc_wh"])
        states.append(h[0])
    return np.asarray(states)


def decode_step_np(model: Seq2SeqModel, h, in_ids, enc, att_mask, src_ids,
                   use_copy: bool = True):
    """One decoder step over R hypothesis rows; returns (h', probs (R, V))."""
    p = model.params
    xp = p["embedding"][in_ids] @ p["dec_wx"] + p["dec_b"]
    h = _gru_step_np(xp, h, p["dec_wh"])
    scores = np.einsum("rsh,rh->rs", enc, h @ p["att_w"]) + att_mask
    scores -= scores.max(axis=1, keepdims=True)
    e = np.exp(scores)
    attw = e / e.sum(axis=1, keepdims=True)
    logits = h @ p["out_w"] + p["out_b"]
    logits -= logits.max(axis=1, keepdims=True)
    ge = np.exp(logits)
    gen = ge / ge.sum(axis=1, keepdims=True)
    if not use_copy:
        return h, gen
    ctx = np.einsum("rs,rsh->rh", attw, enc)
    gate = 1.0 / (1.0 + np.exp(-(np.concatenate([h, ctx], axis=1) @ p["copy_w"]
                                 + p["copy_b"])))
    probs = gate * gen
    rows = np.arange(src_ids.shape[0])[:, None]
    np.add.at(probs, (np.broadcast_to(rows, src_ids.shape), src_ids),
              (1.0 - gate) * attw)
    return h, probs


@dataclass(frozen=True)
class Hypothesis:
    tokens: tuple[int, ...]
    log_prob: float


@dataclass
class _Hyp:
    tokens: tuple[int, ...]
    score: float
    state: object
    h: np.ndarray
    done: bool


def beam_decode_many(model: Seq2SeqModel, items: Sequence[tuple],
                     beam_width: int, use_copy: bool = True,
                     max_len: int | None = None) -> list[list[Hypothesis]]:
    """Length-synchronous beam search over several (source, context, masker)
    items at once, batching the network step across all live hypotheses.

    Tokens come from the masker's allowed set; a hypothesis ends when it
    emits EOS, and EOS is forced once max_len tokens were emitted.
    Finished hypotheses stay in the beam competing on raw log-probability.
    Returns, per item, up to beam_width finished hypotheses sorted by
    log-probability descending (EOS excluded from tokens, included in the
    score).
    """
    items = list(items)
    if not items:
        return []
    dims = model.dims
    if max_len is None:
        max_len = dims.max_target_len
    encs, masks, srcs, beams = [], [], [], []
    for source, context, masker in items:
        _check_lengths(dims, source, context)
        row = list(context) + list(source)
        enc = encode_np(model, row)
        encs.append(enc)
        masks.append(np.zeros(len(row)))
        srcs.append(np.asarray(row, dtype=np.int64))
        beams.append([_Hyp((), 0.0, masker.init(), enc[-1], False)])

    s_max = max(e.shape[0] for e in encs)
    enc_pad, mask_pad, src_pad = [], [], []
    for enc, mask, src in zip(encs, masks, srcs):
        pad = s_max - enc.shape[0]
        enc_pad.append(np.pad(enc, ((0, pad), (0, 0))))
        mask_pad.append(np.concatenate([mask, np.full(pad, NEG_INF)]))
        src_pad.append(np.pad(src, (0, pad), constant_values=V.PAD))

    for step in range(max_len + 1):
        live = [(i, j) for i, beam in enumerate(beams)
                for j, hyp in enumerate(beam) if not hyp.done]
        if not live:
            break
        h = np.stack([beams[i][j].h for i, j in live])
        in_ids = np.asarray([beams[i][j].tokens[-1] if beams[i][j].tokens else V.GO
                             for i, j in live], dtype=np.int64)
        enc = np.stack([enc_pad[i] for i, _ in live])
        att = np.stack([mask_pad[i] for i, _ in live])
        src = np.stack([src_pad[i] for i, _ in live])
        h_new, probs = decode_step_np(model, h, in_ids, enc, att, src, use_copy)

        candidates: list[list[_Hyp]] = [
            [hyp for hyp in beam if hyp.done] for beam in beams]
        for r, (i, j) in enumerate(live):
            hyp = beams[i][j]
            masker = items[i][2]
            allowed = (V.EOS,) if step == max_len else tuple(masker.allowed(hyp.state))
            for tok in allowed:
                score = hyp.score + float(np.log(probs[r, tok]))
                if tok == V.EOS:
                    candidates[i].append(_Hyp(hyp.tokens, score, None, _NO_H, True))
                else:
                    candidates[i].append(_Hyp(hyp.tokens + (tok,), score,
                                              masker.advance(hyp.state, tok),
                                              h_new[r], False))
        beams = [sorted(cands, key=lambda c: (-c.score, c.tokens))[:beam_width]
                 for cands in candidates]

    return [[Hypothesis(hyp.tokens, hyp.score) for hyp in beam if hyp.done]
            for beam in beams]


_NO_H = np.zeros(0)


def beam_decode(model: Seq2SeqModel, source, context, beam_width: int,
                masker: Masker, use_copy: bool = True,
                max_len: int | None = None) -> list[Hypothesis]:
    return beam_decode_many(model, [(source, context, masker)], beam_width,
                            use_copy, max_len)[0]
