"""Training loop, Rmsprop, and the finite-difference certification harness.

The optimizer is the Graves-style Rmsprop: exponential averages of the
gradient and its square, update ``-lr * g / sqrt(n - m^2 + eps)``; with
momentum fixed at zero there is no velocity term.  Batch loss is the mean
over sentences so the learning rate keeps its meaning across batch sizes.
"""

from dataclasses import dataclass

import numpy as np

from .cells import (
    CellParams,
    ComposeParams,
    cell_backward,
    cell_forward,
)
from .errors import ShapeError
from .lattice import build_lattice
from .model import ModelConfig, Seq2SeqModel
from .numerics import central_difference_grad, global_norm, global_norm_clip
from .vocab import EOS, Vocab

__all__ = [
    "Hyperparams",
    "RmspropState",
    "rmsprop_update",
    "TrainConfig",
    "TrainResult",
    "train",
    "sequence_loss",
    "grad_check",
    "grad_check_model",
    "relative_error",
]


@dataclass
class Hyperparams:
    embed_dim: int = 320
    hidden: int = 512
    lr: float = 5e-4
    batch: int = 80
    clip: float = 1.0
    rmsprop_rho: float = 0.99
    rmsprop_eps: float = 1e-4
    rmsprop_momentum: float = 0.0
    max_src_chars: int = 70
    max_tgt_words: int = 50
    patience_epochs: int = 5

    def __post_init__(self):
        for name in ("embed_dim", "hidden", "batch", "clip",
                     "rmsprop_rho", "rmsprop_eps", "max_src_chars",
                     "max_tgt_words", "patience_epochs"):
            if getattr(self, name) <= 0:
                raise ValueError("%s must be positive" % name)
        if self.lr < 0:  # lr = 0 is legal: a no-op trainer used to verify plumbing
            raise ValueError("lr must be non-negative")


class RmspropState:
    """Per-parameter first/second moment accumulators."""

    def __init__(self, params):
        self.n = {name: np.zeros_like(t) for name, t in params.items()}
        self.m = {name: np.zeros_like(t) for name, t in params.items()}
        self.step = 0


def rmsprop_update(params, grads, state, hp):
    """One in-place Rmsprop step over every named tensor."""
    if set(params) != set(grads):
        raise ShapeError("parameter and gradient stores name different tensors")
    rho, eps, lr = hp.rmsprop_rho, hp.rmsprop_eps, hp.lr
    for name in sorted(params):
        g = grads[name]
        if g.shape != params[name].shape:
            raise ShapeError("gradient %s has shape %s, parameter has %s"
                             % (name, g.shape, params[name].shape))
        n, m = state.n[name], state.m[name]
        n *= rho
        n += (1.0 - rho) * g * g
        m *= rho
        m += (1.0 - rho) * g
        params[name] -= lr * g / np.sqrt(n - m * m + eps)
    state.step += 1


def sequence_loss(lat, target_ids, model, grads=None):
    """Teacher-forced loss and exact gradients; thin front for the model method."""
    return model.sequence_loss(lat, target_ids, grads=grads)


# ---------------------------------------------------------------------------
# Training loop


@dataclass
class TrainConfig:
    model: ModelConfig
    hyper: Hyperparams
    seed: int = 0
    max_epochs: int = 10000
    max_updates: int | None = None
    val_max_len: int = 50
    log_sink: object | None = None  # anything with .write, gets the log lines


@dataclass
class TrainResult:
    model: Seq2SeqModel          # parameters of the best validation epoch
    best_val_acc: float
    updates: int
    epochs: int
    log_lines: list
    post_clip_norms: list
    filtered: int = 0


def filter_pairs(pairs, hp):
    """Drop sentence pairs above the length limits; returns (kept, dropped count)."""
    kept = [
        (lat, tgt) for lat, tgt in pairs
        if lat.n <= hp.max_src_chars and len(tgt) <= hp.max_tgt_words
    ]
    return kept, len(pairs) - len(kept)


def _validation_accuracy(model, val_pairs, max_len):
    matches = 0
    total = 0
    for lat, target_ids in val_pairs:
        ref = target_ids[:-1]  # strip EOS
        hyp = model.decode_greedy(lat, max_len=max_len)
        for h, r in zip(hyp, ref):
            if h == r:
                matches += 1
        total += len(ref)
    return matches / total if total else 1.0


def train(cfg, train_pairs, val_pairs, src_vocab, tgt_vocab):
    """Seeded minibatch training with early stopping on validation accuracy.

    ``train_pairs`` / ``val_pairs`` are lists of (WordLattice, target id list
    ending in EOS).  Same seed and data give bitwise-identical results.
    """
    hp = cfg.hyper
    train_pairs, dropped = filter_pairs(train_pairs, hp)
    if not train_pairs:
        raise ValueError("no training sentences left after length filtering")
    model = Seq2SeqModel(cfg.model, src_vocab, tgt_vocab, seed=cfg.seed)
    params = model.parameters()
    opt = RmspropState(params)
    shuffle_rng = np.random.default_rng(cfg.seed + 1)

    names = sorted(params)
    log_lines = []
    post_clip_norms = []
    best_acc = -1.0
    best_tensors = None
    stale_epochs = 0
    updates = 0
    epoch = 0

    def emit(line):
        log_lines.append(line)
        if cfg.log_sink is not None:
            cfg.log_sink.write(line + "\n")

    for epoch in range(cfg.max_epochs):
        order = shuffle_rng.permutation(len(train_pairs))
        epoch_loss = 0.0
        seen = 0
        budget_hit = False
        for start in range(0, len(order), hp.batch):
            chunk = order[start : start + hp.batch]
            grads, _ = model.new_grads()
            for idx in chunk:  # fixed order: deterministic reduction
                lat, tgt = train_pairs[idx]
                loss, _ = model.sequence_loss(lat, tgt, grads=grads)
                epoch_loss += loss
            seen += len(chunk)
            inv = 1.0 / len(chunk)
            for name in names:
                grads[name] *= inv
            clipped = global_norm_clip([grads[n] for n in names], hp.clip)
            clipped = dict(zip(names, clipped))
            post_clip_norms.append(global_norm(clipped.values()))
            rmsprop_update(params, clipped, opt, hp)
            updates += 1
            if cfg.max_updates is not None and updates >= cfg.max_updates:
                budget_hit = True
                break

        val_acc = _validation_accuracy(model, val_pairs, cfg.val_max_len)
        emit("epoch %d loss %.6f val_acc %.6f" % (epoch, epoch_loss / seen, val_acc))
        if val_acc > best_acc:
            best_acc = val_acc
            best_tensors = {n: params[n].copy() for n in names}
            stale_epochs = 0
        else:
            stale_epochs += 1
        if budget_hit or stale_epochs >= hp.patience_epochs:
            break

    best_model = Seq2SeqModel(cfg.model, src_vocab, tgt_vocab, tensors=best_tensors)
    return TrainResult(
        model=best_model,
        best_val_acc=best_acc,
        updates=updates,
        epochs=epoch + 1,
        log_lines=log_lines,
        post_clip_norms=post_clip_norms,
        filtered=dropped,
    )


# ---------------------------------------------------------------------------
# Gradient certification


def relative_error(a, n):
    return abs(a - n) / max(1e-8, abs(a) + abs(n))


def _flatten(arrays):
    return np.concatenate([a.reshape(-1) for a in arrays]) if arrays else np.zeros(0)


def _unflatten(vec, templates):
    out = []
    pos = 0
    for t in templates:
        out.append(vec[pos : pos + t.size].reshape(t.shape))
        pos += t.size
    return out


def grad_check(cell_kind, compose_mode="pool", dim=4, k=1, seed=0, h=1e-5,
               corrupt=False, diff_floor=1e-9):
    """Max relative error between analytic and central-difference cell gradients.

    Checks the scalar ``<upstream, h_out>`` against perturbations of every
    parameter entry and every input entry.  The standard GRU takes a single
    (input, state) pair, so ``k`` is forced to 1 for it.  ``corrupt`` flips
    the sign of one analytic gradient entry; the harness must then report a
    large error (a planted-bug self-test).

    Differences below ``diff_floor`` count as agreement: central differences
    of a unit-scale scalar cannot resolve below roughly eps/(2h), so for
    gradient entries that are themselves tiny the relative error measures
    only the oracle's roundoff, not the implementation.
    """
    if cell_kind == "gru":
        k = 1
    rng = np.random.default_rng(seed)
    d = e = dim
    params = CellParams(
        w_r=rng.uniform(-0.7, 0.7, (d, e)), u_r=rng.uniform(-0.7, 0.7, (d, d)),
        w_z=rng.uniform(-0.7, 0.7, (d, e)), u_z=rng.uniform(-0.7, 0.7, (d, d)),
        w=rng.uniform(-0.7, 0.7, (d, e)), u=rng.uniform(-0.7, 0.7, (d, d)),
    )
    gate_x = gate_h = None
    if compose_mode == "gate" and cell_kind in ("swl", "dwl"):
        if cell_kind == "swl":
            gate_x = ComposeParams(u=rng.uniform(-0.7, 0.7, e), b=np.asarray(rng.uniform(-0.3, 0.3)))
        gate_h = ComposeParams(u=rng.uniform(-0.7, 0.7, d), b=np.asarray(rng.uniform(-0.3, 0.3)))
    xs = [rng.uniform(-1.0, 1.0, e) for _ in range(k)]
    hs = [rng.uniform(-0.9, 0.9, d) for _ in range(k)]
    upstream = rng.uniform(-1.0, 1.0, d)

    tensors = [getattr(params, f) for f in CellParams.FIELDS]
    if gate_x is not None:
        tensors += [gate_x.u, gate_x.b]
    if gate_h is not None:
        tensors += [gate_h.u, gate_h.b]
    tensors += xs + hs

    def rebuild(vec):
        parts = _unflatten(vec, tensors)
        p = CellParams(*parts[:6])
        pos = 6
        gx = gh = None
        if gate_x is not None:
            gx = ComposeParams(u=parts[pos], b=parts[pos + 1])
            pos += 2
        if gate_h is not None:
            gh = ComposeParams(u=parts[pos], b=parts[pos + 1])
            pos += 2
        nx = parts[pos : pos + k]
        nh = parts[pos + k : pos + 2 * k]
        return p, gx, gh, list(zip(nx, nh))

    def f(vec):
        p, gx, gh, inputs = rebuild(vec)
        out, _ = cell_forward(cell_kind, inputs, p, compose_x=gx, compose_h=gh,
                              mode=compose_mode)
        return float(upstream @ out)

    x0 = _flatten(tensors)
    numeric = central_difference_grad(f, x0, h=h)

    inputs = list(zip(xs, hs))
    out, tape = cell_forward(cell_kind, inputs, params, compose_x=gate_x,
                             compose_h=gate_h, mode=compose_mode)
    cg = cell_backward(tape, upstream)
    analytic_tensors = [getattr(cg.cell, f_) for f_ in CellParams.FIELDS]
    if gate_x is not None:
        analytic_tensors += [cg.compose_x.u, cg.compose_x.b]
    if gate_h is not None:
        analytic_tensors += [cg.compose_h.u, cg.compose_h.b]
    analytic_tensors += cg.d_x + cg.d_h_pre
    analytic = _flatten([np.asarray(t) for t in analytic_tensors])
    if corrupt:
        analytic = analytic.copy()
        analytic[0] = -analytic[0] - 1.0
    return max(
        0.0 if abs(a - n) < diff_floor else relative_error(a, n)
        for a, n in zip(analytic, numeric)
    )


def grad_check_model(dim=4, cell="dwl", compose="gate", seed=1, h=1e-5,
                     diff_floor=1e-9):
    """End-to-end check of ``sequence_loss`` gradients on a small merged lattice.

    Differences below ``diff_floor`` count as agreement: central differences
    at step ``h`` on a loss of a few nats cannot resolve below roughly
    ``eps * loss / h`` (~1e-11), so near-zero gradient entries would
    otherwise report pure float64 roundoff as error.
    """
    chars = "abcd"
    if cell == "gru":  # the standard GRU only accepts chain lattices
        lat = build_lattice(chars, [["ab", "c", "d"]])
    else:
        lat = build_lattice(chars, [["ab", "cd"], ["a", "bcd"], ["ab", "c", "d"]])
    surfaces = sorted({e.surface for e in lat.edges})
    src_vocab = Vocab([s for w in surfaces for s in (w, w[::-1])])
    tgt_vocab = Vocab(["X", "Y", "Z"])
    target = [tgt_vocab.id("X"), tgt_vocab.id("Y"), EOS]
    config = ModelConfig(cell=cell, compose=compose, embed_dim=dim, hidden=dim)
    model = Seq2SeqModel(config, src_vocab, tgt_vocab, seed=seed)
    rng = np.random.default_rng(seed + 1)
    for name, t in model.parameters().items():
        if ".gate_" in name:  # zero-initialized; randomize so the check exercises them
            t += rng.uniform(-0.5, 0.5, size=t.shape)

    _, grads = model.sequence_loss(lat, target)
    params = model.parameters()
    worst = 0.0
    for name in sorted(params):
        t = params[name]
        flat = t.reshape(-1)
        gflat = grads[name].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            lp, _ = model.sequence_loss(lat, target)
            flat[i] = orig - h
            lm, _ = model.sequence_loss(lat, target)
            flat[i] = orig
            numeric = (lp - lm) / (2.0 * h)
            if abs(float(gflat[i]) - numeric) < diff_floor:
                continue
            worst = max(worst, relative_error(float(gflat[i]), numeric))
    return worst
