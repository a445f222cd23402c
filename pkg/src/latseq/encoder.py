"""Bidirectional lattice encoder.

The forward pass walks lattice nodes left to right; at every node the cell
merges all incoming edges (word embedding + predecessor state, ordered by
ascending start index).  The backward pass runs the same recurrence on the
reversed lattice.  One annotation per node ``v_1..v_N`` is the concatenation
of the forward and backward states, so the attention length always equals
the character count regardless of how many tokenizations the lattice holds.

Edges of a reversed lattice carry reversed surfaces; the vocabulary used for
training therefore includes the reversal of every edge surface so the
backward recurrence sees distinct embeddings rather than UNK (see
``vocab.surfaces_with_reversals``).
"""

from dataclasses import dataclass

import numpy as np

from .cells import CellParams, ComposeParams, cell_backward, cell_forward
from .errors import TopologyError
from .lattice import incoming_edges, reverse

__all__ = [
    "EncoderSideParams",
    "EncoderParams",
    "embed_edge",
    "encode_forward",
    "encode_backward",
    "encode_bidirectional",
    "encode_bidirectional_backward",
]


@dataclass
class EncoderSideParams:
    """Parameters for one direction of the encoder."""

    cell: CellParams
    compose_x: ComposeParams | None = None  # input-side gate (swl + gate only)
    compose_h: ComposeParams | None = None  # state-side gate (swl/dwl + gate)

    def zeros_like(self):
        return EncoderSideParams(
            cell=self.cell.zeros_like(),
            compose_x=self.compose_x.zeros_like() if self.compose_x is not None else None,
            compose_h=self.compose_h.zeros_like() if self.compose_h is not None else None,
        )


@dataclass
class EncoderParams:
    fwd: EncoderSideParams
    bwd: EncoderSideParams
    cell_kind: str = "dwl"
    compose_mode: str = "pool"


def embed_edge(edge, table, vocab):
    """Embedding row for the edge's surface; out-of-vocabulary words map to UNK."""
    token_id = vocab.id(edge.surface)
    return table[token_id], token_id


@dataclass
class _ForwardCache:
    lat: object
    states: list       # N+1 node states; index 0 is the zero initial state
    tapes: list        # per node, None where the node has no incoming edge
    edge_lists: list   # per node, incoming edges in order
    token_ids: list    # per node, embedding rows used, aligned with edge_lists
    side: EncoderSideParams


def encode_forward(lat, table, vocab, side, kind, mode):
    """Run one direction of the lattice recurrence; returns (states, cache).

    Nodes that no edge reaches (interior positions of a chain's words) keep
    the zero state; validated lattices never strand a node that an edge
    touches, so such nodes carry no information by construction.
    """
    d = side.cell.hidden_dim
    n = lat.n
    states = [np.zeros(d)]
    tapes = [None]
    edge_lists = [[]]
    token_ids = [[]]
    for t in range(1, n + 1):
        edges = incoming_edges(lat, t)
        if not edges:
            states.append(np.zeros(d))
            tapes.append(None)
            edge_lists.append([])
            token_ids.append([])
            continue
        if kind == "gru" and len(edges) > 1:
            raise TopologyError(
                "node %d has %d incoming edges; the standard GRU requires a chain"
                % (t, len(edges))
            )
        inputs = []
        ids = []
        for e in edges:
            vec, tok = embed_edge(e, table, vocab)
            inputs.append((vec, states[e.start]))
            ids.append(tok)
        h, tape = cell_forward(
            kind, inputs, side.cell,
            compose_x=side.compose_x, compose_h=side.compose_h, mode=mode,
        )
        states.append(h)
        tapes.append(tape)
        edge_lists.append(edges)
        token_ids.append(ids)
    return states, _ForwardCache(lat, states, tapes, edge_lists, token_ids, side)


def encode_backward(cache, d_states, grads, d_table):
    """Reverse traversal of one direction.

    ``d_states`` is an (N+1, d) array seeded with the loss gradient at every
    node state; predecessor contributions are accumulated in place while
    walking nodes in descending index.  Parameter gradients go into ``grads``
    (an :class:`EncoderSideParams` of matching shapes), embedding-row
    gradients into ``d_table``.
    """
    n = cache.lat.n
    for t in range(n, 0, -1):
        tape = cache.tapes[t]
        if tape is None:
            continue
        cg = cell_backward(tape, d_states[t])
        _accumulate_cell(grads.cell, cg.cell)
        if cg.compose_x is not None and grads.compose_x is not None:
            grads.compose_x.u += cg.compose_x.u
            grads.compose_x.b += cg.compose_x.b
        if cg.compose_h is not None and grads.compose_h is not None:
            grads.compose_h.u += cg.compose_h.u
            grads.compose_h.b += cg.compose_h.b
        for edge, tok, dx, dh in zip(
            cache.edge_lists[t], cache.token_ids[t], cg.d_x, cg.d_h_pre
        ):
            d_table[tok] += dx
            d_states[edge.start] += dh


def _accumulate_cell(into, delta):
    for f in CellParams.FIELDS:
        target = getattr(into, f)
        np.add(target, getattr(delta, f), out=target)


@dataclass
class _BiCache:
    lat: object
    rev: object
    fwd: _ForwardCache
    bwd: _ForwardCache


def encode_bidirectional(lat, table, vocab, ep):
    """Annotations for ``v_1..v_N``: concat(forward state, backward state).

    The backward direction is the forward recurrence on the reversed lattice;
    its state at reversed node ``N - v`` is the backward state at ``v``.
    """
    rev = reverse(lat)
    f_states, f_cache = encode_forward(
        lat, table, vocab, ep.fwd, ep.cell_kind, ep.compose_mode
    )
    b_states, b_cache = encode_forward(
        rev, table, vocab, ep.bwd, ep.cell_kind, ep.compose_mode
    )
    n = lat.n
    ann = np.stack(
        [np.concatenate([f_states[i], b_states[n - i]]) for i in range(1, n + 1)]
    )
    return ann, _BiCache(lat, rev, f_cache, b_cache)


def encode_bidirectional_backward(cache, d_ann, grads_fwd, grads_bwd, d_table):
    """Backpropagate annotation gradients through both directions."""
    n = cache.lat.n
    d = cache.fwd.side.cell.hidden_dim
    df = np.zeros((n + 1, d))
    db = np.zeros((n + 1, d))
    for i in range(1, n + 1):
        df[i] = d_ann[i - 1, :d]
        db[n - i] = d_ann[i - 1, d:]
    encode_backward(cache.fwd, df, grads_fwd, d_table)
    encode_backward(cache.bwd, db, grads_bwd, d_table)
