"""Full lattice-to-sequence model: parameter store, teacher-forced loss, backprop.

Parameters live in named 64-bit tensors; the name -> array mapping is the
single source of truth for checkpoints, the optimizer and gradient checks.
Backpropagation replays recorded forward intermediates in reverse order
(decoder steps last-to-first, then the two encoder directions); there is no
general-purpose differentiation engine.
"""

from dataclasses import dataclass

import numpy as np

from .cells import CellParams, ComposeParams, cell_backward, cell_forward
from .decoder import (
    AttentionParams,
    DecoderParams,
    _attend_backward,
    _attend_forward,
    beam_decode,
    greedy_decode,
)
from .encoder import (
    EncoderParams,
    EncoderSideParams,
    encode_bidirectional,
    encode_bidirectional_backward,
)
from .errors import EmptyInputError
from .numerics import softmax
from .vocab import BOS, EOS

__all__ = ["ModelConfig", "Seq2SeqModel"]


@dataclass
class ModelConfig:
    cell: str = "dwl"          # gru | swl | dwl
    compose: str = "gate"      # pool | gate
    embed_dim: int = 320
    hidden: int = 512

    def as_dict(self):
        return {
            "cell": self.cell,
            "compose": self.compose,
            "embed_dim": self.embed_dim,
            "hidden": self.hidden,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            cell=d["cell"],
            compose=d["compose"],
            embed_dim=int(d["embed_dim"]),
            hidden=int(d["hidden"]),
        )


def _cell_param_shapes(prefix, input_dim, hidden_dim):
    d, e = hidden_dim, input_dim
    return {
        prefix + ".w_r": (d, e), prefix + ".u_r": (d, d),
        prefix + ".w_z": (d, e), prefix + ".u_z": (d, d),
        prefix + ".w": (d, e), prefix + ".u": (d, d),
    }


def _shapes(config, n_src, n_tgt):
    e, d = config.embed_dim, config.hidden
    shapes = {"emb.src": (n_src, e), "emb.tgt": (n_tgt, e)}
    for side in ("fwd", "bwd"):
        shapes.update(_cell_param_shapes("enc.%s.cell" % side, e, d))
        if config.compose == "gate" and config.cell in ("swl", "dwl"):
            if config.cell == "swl":
                shapes["enc.%s.gate_x.u" % side] = (e,)
                shapes["enc.%s.gate_x.b" % side] = ()
            shapes["enc.%s.gate_h.u" % side] = (d,)
            shapes["enc.%s.gate_h.b" % side] = ()
    shapes.update({
        "dec.att.w_a": (d, d), "dec.att.u_a": (d, 2 * d), "dec.att.v_a": (d,),
        "dec.out.w_y": (e, e), "dec.out.w_s": (e, d), "dec.out.w_m": (e, 2 * d),
        "dec.out.w_o": (n_tgt, e),
        "dec.w_init": (d, d),
    })
    shapes.update(_cell_param_shapes("dec.cell", e + 2 * d, d))
    return shapes


def _init_tensor(name, shape, rng):
    if name.startswith("emb."):
        return rng.uniform(-0.1, 0.1, size=shape)
    if ".gate_" in name:
        return np.zeros(shape)  # gating starts as uniform averaging
    if len(shape) == 2:
        fan_out, fan_in = shape
    elif len(shape) == 1:
        fan_in, fan_out = shape[0], 1
    else:
        fan_in = fan_out = 1
    s = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-s, s, size=shape)


def _cell_view(store, prefix):
    return CellParams(**{f: store[prefix + "." + f] for f in CellParams.FIELDS})


def _gate_view(store, prefix):
    key = prefix + ".u"
    if key not in store:
        return None
    return ComposeParams(u=store[prefix + ".u"], b=store[prefix + ".b"])


@dataclass
class _Views:
    """Structured windows onto a name -> tensor store; no copies."""

    enc: EncoderParams
    dec: DecoderParams
    src_emb: np.ndarray
    tgt_emb: np.ndarray


def _build_views(store, config):
    sides = {}
    for side in ("fwd", "bwd"):
        sides[side] = EncoderSideParams(
            cell=_cell_view(store, "enc.%s.cell" % side),
            compose_x=_gate_view(store, "enc.%s.gate_x" % side),
            compose_h=_gate_view(store, "enc.%s.gate_h" % side),
        )
    enc = EncoderParams(
        fwd=sides["fwd"], bwd=sides["bwd"],
        cell_kind=config.cell, compose_mode=config.compose,
    )
    dec = DecoderParams(
        att=AttentionParams(
            w_a=store["dec.att.w_a"], u_a=store["dec.att.u_a"], v_a=store["dec.att.v_a"]
        ),
        cell=_cell_view(store, "dec.cell"),
        tgt_emb=store["emb.tgt"],
        w_y=store["dec.out.w_y"], w_s=store["dec.out.w_s"],
        w_m=store["dec.out.w_m"], w_o=store["dec.out.w_o"],
        w_init=store["dec.w_init"],
    )
    return _Views(enc=enc, dec=dec, src_emb=store["emb.src"], tgt_emb=store["emb.tgt"])


class Seq2SeqModel:
    """Lattice encoder + attention decoder over fixed vocabularies."""

    def __init__(self, config, src_vocab, tgt_vocab, seed=0, tensors=None):
        self.config = config
        self.src_vocab = src_vocab
        self.tgt_vocab = tgt_vocab
        shapes = _shapes(config, len(src_vocab), len(tgt_vocab))
        if tensors is not None:
            missing = sorted(set(shapes) - set(tensors))
            if missing:
                raise ValueError("checkpoint lacks tensors: %s" % missing)
            self.store = {name: np.asarray(tensors[name], dtype=np.float64)
                          for name in shapes}
        else:
            rng = np.random.default_rng(seed)
            self.store = {}
            for name in sorted(shapes):  # lexicographic draw order: reproducible
                self.store[name] = _init_tensor(name, shapes[name], rng)
        self.views = _build_views(self.store, config)

    # -- parameter plumbing -------------------------------------------------

    def parameters(self):
        """Name -> tensor, in lexicographic name order."""
        return {name: self.store[name] for name in sorted(self.store)}

    def new_grads(self):
        store = {name: np.zeros_like(t) for name, t in self.store.items()}
        return store, _build_views(store, self.config)

    # -- encoding and decoding ---------------------------------------------

    def encode(self, lat):
        return encode_bidirectional(lat, self.views.src_emb, self.src_vocab, self.views.enc)

    def decode_greedy(self, lat, max_len=50):
        ann, _ = self.encode(lat)
        return greedy_decode(ann, self.views.dec, max_len)

    def decode_beam(self, lat, max_len=50, beam_width=1, length_norm=True):
        if beam_width == 1:
            return greedy_decode(self.encode(lat)[0], self.views.dec, max_len)
        ann, _ = self.encode(lat)
        return beam_decode(ann, self.views.dec, max_len, beam_width, length_norm)

    # -- training loss ------------------------------------------------------

    def sequence_loss(self, lat, target_ids, grads=None):
        """Teacher-forced cross-entropy and exact gradients for one sentence.

        ``target_ids`` must be non-empty and end with EOS.  When ``grads`` (a
        store from :func:`new_grads`) is given, gradients are accumulated into
        it and the same store is returned; otherwise a fresh store is used.
        """
        if not target_ids:
            raise EmptyInputError("target must contain at least the EOS token")
        if target_ids[-1] != EOS:
            raise ValueError("target must end with EOS (id %d)" % EOS)
        dp = self.views.dec
        d = self.config.hidden

        ann, enc_cache = self.encode(lat)
        b1 = ann[0, d:]
        s0_pre = dp.w_init @ b1
        s = np.tanh(s0_pre)

        history = [BOS] + list(target_ids[:-1])
        steps = []
        loss = 0.0
        for prev, gold in zip(history, target_ids):
            alpha, m, att_cache = _attend_forward(s, ann, dp.att)
            x = np.concatenate([dp.tgt_emb[prev], m])
            s_new, cell_tape = cell_forward("gru", [(x, s)], dp.cell)
            emb_prev = dp.tgt_emb[prev]
            t = np.tanh(dp.w_y @ emb_prev + dp.w_s @ s_new + dp.w_m @ m)
            probs = softmax(dp.w_o @ t)
            loss -= float(np.log(probs[gold]))
            steps.append((prev, gold, att_cache, cell_tape, m, s_new, t, probs))
            s = s_new

        if grads is None:
            grads, gviews = self.new_grads()
        else:
            gviews = _build_views(grads, self.config)
        self._backward(lat, ann, enc_cache, b1, s0_pre, steps, grads, gviews)
        return loss, grads

    def _backward(self, lat, ann, enc_cache, b1, s0_pre, steps, grads, gviews):
        dp = self.views.dec
        gd = gviews.dec
        e = self.config.embed_dim
        d = self.config.hidden
        d_ann = np.zeros_like(ann)
        ds_next = np.zeros(d)

        for prev, gold, att_cache, cell_tape, m, s_new, t, probs in reversed(steps):
            emb_prev = dp.tgt_emb[prev]
            d_logits = probs.copy()
            d_logits[gold] -= 1.0
            gd.w_o += np.outer(d_logits, t)
            dt = dp.w_o.T @ d_logits
            dt_pre = dt * (1.0 - t * t)
            gd.w_y += np.outer(dt_pre, emb_prev)
            d_emb_prev = dp.w_y.T @ dt_pre
            gd.w_s += np.outer(dt_pre, s_new)
            ds = dp.w_s.T @ dt_pre + ds_next
            gd.w_m += np.outer(dt_pre, m)
            dm = dp.w_m.T @ dt_pre

            cg = cell_backward(cell_tape, ds)
            for f in CellParams.FIELDS:
                tgt = getattr(gd.cell, f)
                np.add(tgt, getattr(cg.cell, f), out=tgt)
            dx = cg.d_x[0]
            ds_prev = cg.d_h_pre[0]
            d_emb_prev = d_emb_prev + dx[:e]
            dm = dm + dx[e:]

            ds_prev = ds_prev + _attend_backward(att_cache, dp.att, dm, gd.att, d_ann)
            grads["emb.tgt"][prev] += d_emb_prev
            ds_next = ds_prev

        da = ds_next * (1.0 - np.tanh(s0_pre) ** 2)
        grads["dec.w_init"] += np.outer(da, b1)
        d_ann[0, d:] += dp.w_init.T @ da

        encode_bidirectional_backward(
            enc_cache, d_ann, gviews.enc.fwd, gviews.enc.bwd, grads["emb.src"]
        )
