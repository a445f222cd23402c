"""Attention decoder: alignment model, decoder GRU, readout, greedy and beam search.

The decoder state is updated by a GRU whose input is the previous target
embedding concatenated with the attention context.  The readout is a
single-layer tanh followed by a softmax over the target vocabulary.
"""

from dataclasses import dataclass

import numpy as np

from .cells import CellParams, cell_backward, cell_forward
from .errors import DimensionError
from .numerics import softmax
from .vocab import BOS, EOS

__all__ = [
    "AttentionParams",
    "DecoderParams",
    "DecodeState",
    "init_state",
    "attend",
    "decoder_step",
    "output_distribution",
    "greedy_decode",
    "beam_decode",
]


@dataclass
class AttentionParams:
    w_a: np.ndarray  # (a, d_dec)
    u_a: np.ndarray  # (a, 2d)
    v_a: np.ndarray  # (a,)


@dataclass
class DecoderParams:
    att: AttentionParams
    cell: CellParams      # input dim e_tgt + 2d, hidden d_dec
    tgt_emb: np.ndarray   # (|V_tgt|, e_tgt)
    w_y: np.ndarray       # (o, e_tgt)
    w_s: np.ndarray       # (o, d_dec)
    w_m: np.ndarray       # (o, 2d)
    w_o: np.ndarray       # (|V_tgt|, o)
    w_init: np.ndarray    # (d_dec, d)


@dataclass
class DecodeState:
    s: np.ndarray
    prev_token: int
    step: int


def init_state(ann, dp):
    """Initial decoder state from the backward encoder state at the sentence start."""
    d = dp.w_init.shape[1]
    if ann.shape[1] != 2 * d:
        raise DimensionError(
            "annotations have dim %d, expected %d" % (ann.shape[1], 2 * d)
        )
    return np.tanh(dp.w_init @ ann[0, d:])


def _attend_forward(s_prev, ann, ap):
    q = ann @ ap.u_a.T + (ap.w_a @ s_prev)  # (N, a)
    u = np.tanh(q)
    scores = u @ ap.v_a
    alpha = softmax(scores)
    m = alpha @ ann
    return alpha, m, (s_prev, ann, u, alpha)


def attend(s_prev, ann, ap):
    """Alignment weights over annotations and the resulting context vector."""
    alpha, m, _ = _attend_forward(s_prev, ann, ap)
    return alpha, m


def _attend_backward(cache, ap, dm, grads_att, d_ann):
    """Returns the gradient wrt the query state; annotation grads accumulate in place."""
    s_prev, ann, u, alpha = cache
    d_alpha = ann @ dm
    d_ann += alpha[:, None] * dm[None, :]
    d_scores = alpha * (d_alpha - float(d_alpha @ alpha))
    grads_att.v_a += u.T @ d_scores
    dq = d_scores[:, None] * ap.v_a[None, :] * (1.0 - u * u)
    dq_sum = dq.sum(axis=0)
    grads_att.w_a += np.outer(dq_sum, s_prev)
    grads_att.u_a += dq.T @ ann
    d_ann += dq @ ap.u_a
    return ap.w_a.T @ dq_sum


def decoder_step(state, m, dp):
    """Advance the decoder GRU one step on (previous embedding, context)."""
    x = np.concatenate([dp.tgt_emb[state.prev_token], m])
    s, _ = cell_forward("gru", [(x, state.s)], dp.cell)
    return DecodeState(s=s, prev_token=state.prev_token, step=state.step + 1)


def output_distribution(state, m, dp):
    """Probabilities over the target vocabulary for the current step."""
    emb_prev = dp.tgt_emb[state.prev_token]
    t = np.tanh(dp.w_y @ emb_prev + dp.w_s @ state.s + dp.w_m @ m)
    return softmax(dp.w_o @ t)


def _step_scores(s_prev, prev_token, ann, dp):
    """One full decoding step: returns (new state, log-probabilities)."""
    _, m, _ = _attend_forward(s_prev, ann, dp.att)
    x = np.concatenate([dp.tgt_emb[prev_token], m])
    s, _ = cell_forward("gru", [(x, s_prev)], dp.cell)
    emb_prev = dp.tgt_emb[prev_token]
    t = np.tanh(dp.w_y @ emb_prev + dp.w_s @ s + dp.w_m @ m)
    probs = softmax(dp.w_o @ t)
    return s, np.log(probs)


def greedy_decode(ann, dp, max_len):
    """Argmax decoding from BOS; ties break toward the lowest token id."""
    s = init_state(ann, dp)
    prev = BOS
    out = []
    for _ in range(max_len):
        s, logp = _step_scores(s, prev, ann, dp)
        tok = int(np.argmax(logp))
        if tok == EOS:
            break
        out.append(tok)
        prev = tok
    return out


def beam_decode(ann, dp, max_len, beam_width, length_norm=True):
    """Beam search; with ``beam_width == 1`` the result equals greedy decoding.

    Final hypotheses are ranked by total log-probability, divided by the
    number of scored tokens when ``length_norm`` is on.
    """
    if beam_width < 1:
        raise ValueError("beam width must be >= 1")
    s0 = init_state(ann, dp)
    live = [(0.0, [], s0, BOS)]  # (logp sum, emitted tokens, state, prev token)
    finished = []  # (logp sum, n scored steps, tokens)
    for _ in range(max_len):
        if not live:
            break
        candidates = []
        for beam_idx, (score, toks, s, prev) in enumerate(live):
            s_new, logp = _step_scores(s, prev, ann, dp)
            for tok in range(logp.shape[0]):
                candidates.append(
                    (score + float(logp[tok]), tok, beam_idx, s_new, toks)
                )
        candidates.sort(key=lambda c: (-c[0], c[1], c[2]))
        next_live = []
        for score, tok, _, s_new, toks in candidates[:beam_width]:
            if tok == EOS:
                finished.append((score, len(toks) + 1, toks))
            else:
                next_live.append((score, toks + [tok], s_new, tok))
        live = next_live
    for score, toks, _, _ in live:  # ran out of length without EOS
        finished.append((score, max(len(toks), 1), toks))
    def rank(item):
        score, steps, toks = item
        return score / steps if length_norm else score
    best = max(finished, key=rank)
    return best[2]
