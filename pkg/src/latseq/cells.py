"""Recurrent cells over lattice topology.

Three cell kinds:

* ``gru``  -- the standard gated recurrent unit; one input, one predecessor.
* ``swl``  -- shallow word-lattice GRU: the K inputs and the K predecessor
  states are each composed into one vector first, then a standard GRU runs
  on the composed pair.
* ``dwl``  -- deep word-lattice GRU: a full GRU runs per incoming edge and
  the K per-edge hidden states are composed afterwards.

Two composition functions merge K vectors into one:

* ``pool`` -- elementwise maximum.
* ``gate`` -- a learned scalar weight per component, sigmoid-activated and
  normalized to sum to one; the output is the weighted sum.

Every forward pass records its intermediates on a tape; ``cell_backward``
replays the tape and returns exact analytic gradients.  On a chain (K = 1)
all three kinds coincide bitwise with the standard GRU.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, EmptyInputError, StateError, TopologyError

__all__ = [
    "CellParams",
    "ComposeParams",
    "CellGrads",
    "gru_step",
    "swl_gru_step",
    "dwl_gru_step",
    "compose_pool",
    "compose_gate",
    "cell_forward",
    "cell_backward",
]

CELL_KINDS = ("gru", "swl", "dwl")
COMPOSE_MODES = ("pool", "gate")


@dataclass
class CellParams:
    """GRU weight matrices; no bias vectors inside the gates."""

    w_r: np.ndarray  # (d, e) reset gate, input side
    u_r: np.ndarray  # (d, d) reset gate, state side
    w_z: np.ndarray  # (d, e) update gate, input side
    u_z: np.ndarray  # (d, d) update gate, state side
    w: np.ndarray    # (d, e) candidate, input side
    u: np.ndarray    # (d, d) candidate, state side

    FIELDS = ("w_r", "u_r", "w_z", "u_z", "w", "u")

    @property
    def input_dim(self):
        return self.w.shape[1]

    @property
    def hidden_dim(self):
        return self.w.shape[0]

    @classmethod
    def zeros(cls, input_dim, hidden_dim):
        d, e = hidden_dim, input_dim
        return cls(
            w_r=np.zeros((d, e)), u_r=np.zeros((d, d)),
            w_z=np.zeros((d, e)), u_z=np.zeros((d, d)),
            w=np.zeros((d, e)), u=np.zeros((d, d)),
        )

    def zeros_like(self):
        return CellParams(*(np.zeros_like(getattr(self, f)) for f in self.FIELDS))


@dataclass
class ComposeParams:
    """Gating composition: one scalar weight per component, ``sigmoid(u . v + b)``."""

    u: np.ndarray  # (dim,)
    b: np.ndarray  # scalar, kept as a 0-d array so updates stay uniform

    @classmethod
    def zeros(cls, dim):
        return cls(u=np.zeros(dim), b=np.zeros(()))

    def zeros_like(self):
        return ComposeParams(u=np.zeros_like(self.u), b=np.zeros_like(self.b))


@dataclass
class CellGrads:
    """Gradients returned by :func:`cell_backward`, one entry per forward input."""

    d_x: list          # gradient per input vector, in edge order
    d_h_pre: list      # gradient per predecessor state, in edge order
    cell: CellParams
    compose_x: ComposeParams | None = None
    compose_h: ComposeParams | None = None


def _check_inputs(inputs, params):
    if not inputs:
        raise EmptyInputError("a cell step needs at least one (input, state) pair")
    e, d = params.input_dim, params.hidden_dim
    for x, h in inputs:
        if x.shape != (e,):
            raise DimensionError("input has shape %s, expected (%d,)" % (x.shape, e))
        if h.shape != (d,):
            raise DimensionError("state has shape %s, expected (%d,)" % (h.shape, d))


# ---------------------------------------------------------------------------
# Standard GRU


def _gru_forward(x, h_prev, p):
    r = _sigmoid(p.w_r @ x + p.u_r @ h_prev)
    z = _sigmoid(p.w_z @ x + p.u_z @ h_prev)
    rh = r * h_prev
    h_bar = np.tanh(p.w @ x + p.u @ rh)
    h = z * h_prev + (1.0 - z) * h_bar
    return h, (x, h_prev, r, z, rh, h_bar)


def _sigmoid(a):
    out = np.empty_like(a)
    pos = a >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
    ex = np.exp(a[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _gru_backward(cache, p, dh, gp):
    """Accumulates parameter gradients into ``gp``; returns (dx, dh_prev)."""
    x, h_prev, r, z, rh, h_bar = cache
    dz = dh * (h_prev - h_bar)
    dh_bar = dh * (1.0 - z)
    dh_prev = dh * z

    da_h = dh_bar * (1.0 - h_bar * h_bar)
    gp.w += np.outer(da_h, x)
    gp.u += np.outer(da_h, rh)
    dx = p.w.T @ da_h
    drh = p.u.T @ da_h
    dr = drh * h_prev
    dh_prev = dh_prev + drh * r

    da_r = dr * r * (1.0 - r)
    gp.w_r += np.outer(da_r, x)
    gp.u_r += np.outer(da_r, h_prev)
    dx += p.w_r.T @ da_r
    dh_prev = dh_prev + p.u_r.T @ da_r

    da_z = dz * z * (1.0 - z)
    gp.w_z += np.outer(da_z, x)
    gp.u_z += np.outer(da_z, h_prev)
    dx += p.w_z.T @ da_z
    dh_prev = dh_prev + p.u_z.T @ da_z
    return dx, dh_prev


# ---------------------------------------------------------------------------
# Composition functions


def _pool_forward(vs):
    stacked = np.stack(vs)
    winner = np.argmax(stacked, axis=0)  # ties go to the lowest component index
    out = stacked[winner, np.arange(stacked.shape[1])]
    return out, (winner, len(vs))


def _pool_backward(cache, dout):
    winner, k = cache
    dvs = [np.zeros_like(dout) for _ in range(k)]
    for i, w in enumerate(winner):
        dvs[w][i] += dout[i]
    return dvs


def _gate_forward(vs, cp):
    stacked = np.stack(vs)
    if cp.u.shape != (stacked.shape[1],):
        raise DimensionError(
            "gate weight has dim %s, components have dim %d"
            % (cp.u.shape, stacked.shape[1])
        )
    raw = _sigmoid(stacked @ cp.u + cp.b)  # (K,), each in (0, 1)
    total = raw.sum()
    weights = raw / total
    out = weights @ stacked
    return out, weights, (stacked, raw, weights, total)


def _gate_backward(cache, cp, dout, gcp):
    stacked, raw, weights, total = cache
    dvs = weights[:, None] * dout[None, :]
    dw = stacked @ dout                                # (K,)
    draw = (dw - float(dw @ weights)) / total
    da = draw * raw * (1.0 - raw)
    gcp.u += stacked.T @ da
    gcp.b += da.sum()
    dvs = dvs + np.outer(da, cp.u)
    return [dvs[i] for i in range(dvs.shape[0])]


def compose_pool(vs):
    """Elementwise maximum of K equal-length vectors; identity for K = 1."""
    if not vs:
        raise EmptyInputError("compose_pool needs at least one vector")
    dims = {v.shape for v in vs}
    if len(dims) != 1:
        raise DimensionError("compose_pool: mixed dims %s" % dims)
    out, _ = _pool_forward(vs)
    return out


def compose_gate(vs, cp):
    """Gated combination; returns (output, normalized weights).

    The weights are exposed so a trained model's tokenization preferences can
    be inspected directly.
    """
    if not vs:
        raise EmptyInputError("compose_gate needs at least one vector")
    dims = {v.shape for v in vs}
    if len(dims) != 1:
        raise DimensionError("compose_gate: mixed dims %s" % dims)
    out, weights, _ = _gate_forward(vs, cp)
    return out, weights


# ---------------------------------------------------------------------------
# Lattice cells


@dataclass
class CellTape:
    """Forward intermediates needed for the analytic backward pass."""

    kind: str
    mode: str
    k: int
    params: CellParams
    compose_x: ComposeParams | None
    compose_h: ComposeParams | None
    gru_caches: list
    gate_x_cache: tuple | None = None
    gate_h_cache: tuple | None = None
    pool_x_cache: tuple | None = None
    pool_h_cache: tuple | None = None
    out_cache: tuple | None = None  # dwl composition over the K hidden states


def cell_forward(kind, inputs, params, compose_x=None, compose_h=None, mode="pool"):
    """One cell step.  ``inputs`` is a list of (x, h_pre) pairs in edge order.

    Returns ``(h, tape)``; feed the tape to :func:`cell_backward` for
    gradients.  ``compose_x`` is only consulted by the shallow cell in gate
    mode (the input-side and state-side gates act on different dimensions).
    """
    if kind not in CELL_KINDS:
        raise ValueError("unknown cell kind %r" % kind)
    if mode not in COMPOSE_MODES:
        raise ValueError("unknown compose mode %r" % mode)
    _check_inputs(inputs, params)
    k = len(inputs)
    tape = CellTape(kind=kind, mode=mode, k=k, params=params,
                    compose_x=compose_x, compose_h=compose_h, gru_caches=[])

    if kind == "gru":
        if k != 1:
            raise TopologyError("standard GRU cannot merge %d incoming edges" % k)
        h, cache = _gru_forward(inputs[0][0], inputs[0][1], params)
        tape.gru_caches.append(cache)
        return h, tape

    if kind == "swl":
        xs = [x for x, _ in inputs]
        hs = [h for _, h in inputs]
        if mode == "pool":
            x_c, tape.pool_x_cache = _pool_forward(xs)
            h_c, tape.pool_h_cache = _pool_forward(hs)
        else:
            if compose_x is None or compose_h is None:
                raise ValueError("gate mode needs compose parameters")
            x_c, _, tape.gate_x_cache = _gate_forward(xs, compose_x)
            h_c, _, tape.gate_h_cache = _gate_forward(hs, compose_h)
        h, cache = _gru_forward(x_c, h_c, params)
        tape.gru_caches.append(cache)
        return h, tape

    # dwl: one full GRU per incoming edge, then compose the hidden states.
    branch = []
    for x, h_pre in inputs:
        hk, cache = _gru_forward(x, h_pre, params)
        tape.gru_caches.append(cache)
        branch.append(hk)
    if mode == "pool":
        h, tape.out_cache = _pool_forward(branch)
    else:
        if compose_h is None:
            raise ValueError("gate mode needs compose parameters")
        h, _, tape.out_cache = _gate_forward(branch, compose_h)
    return h, tape


def cell_backward(tape, upstream):
    """Exact gradients of ``<upstream, h>`` with respect to inputs and parameters."""
    if tape is None or not tape.gru_caches:
        raise StateError("no recorded forward intermediates")
    p = tape.params
    gp = p.zeros_like()
    gcx = tape.compose_x.zeros_like() if tape.compose_x is not None else None
    gch = tape.compose_h.zeros_like() if tape.compose_h is not None else None

    if tape.kind == "gru":
        dx, dh = _gru_backward(tape.gru_caches[0], p, upstream, gp)
        return CellGrads(d_x=[dx], d_h_pre=[dh], cell=gp)

    if tape.kind == "swl":
        dx_c, dh_c = _gru_backward(tape.gru_caches[0], p, upstream, gp)
        if tape.mode == "pool":
            d_xs = _pool_backward(tape.pool_x_cache, dx_c)
            d_hs = _pool_backward(tape.pool_h_cache, dh_c)
        else:
            d_xs = _gate_backward(tape.gate_x_cache, tape.compose_x, dx_c, gcx)
            d_hs = _gate_backward(tape.gate_h_cache, tape.compose_h, dh_c, gch)
        return CellGrads(d_x=d_xs, d_h_pre=d_hs, cell=gp,
                         compose_x=gcx, compose_h=gch)

    # dwl
    if tape.mode == "pool":
        d_branch = _pool_backward(tape.out_cache, upstream)
    else:
        d_branch = _gate_backward(tape.out_cache, tape.compose_h, upstream, gch)
    d_xs, d_hs = [], []
    for cache, dhk in zip(tape.gru_caches, d_branch):
        dx, dh = _gru_backward(cache, p, dhk, gp)
        d_xs.append(dx)
        d_hs.append(dh)
    return CellGrads(d_x=d_xs, d_h_pre=d_hs, cell=gp, compose_h=gch)


# ---------------------------------------------------------------------------
# Convenience step functions (forward only)


def gru_step(x, h_prev, params):
    """Standard GRU transition."""
    h, _ = cell_forward("gru", [(x, h_prev)], params)
    return h


def swl_gru_step(inputs, params, compose_x=None, compose_h=None, mode="pool"):
    """Shallow word-lattice GRU: compose first, then one standard GRU."""
    h, _ = cell_forward("swl", inputs, params,
                        compose_x=compose_x, compose_h=compose_h, mode=mode)
    return h


def dwl_gru_step(inputs, params, compose_h=None, mode="pool"):
    """Deep word-lattice GRU: one GRU per edge, then compose the hidden states."""
    h, _ = cell_forward("dwl", inputs, params, compose_h=compose_h, mode=mode)
    return h
