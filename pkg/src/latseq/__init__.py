"""Word-lattice recurrent encoders for attention-based sequence-to-sequence translation."""

from .cells import (
    CellParams,
    ComposeParams,
    compose_gate,
    compose_pool,
    dwl_gru_step,
    gru_step,
    swl_gru_step,
)
from .estimator import LatticeTranslator
from .lattice import (
    LatticeEdge,
    WordLattice,
    build_lattice,
    chain_from_tokenization,
    incoming_edges,
    read_lattices,
    reverse,
    validate,
    write_lattices,
)
from .model import ModelConfig, Seq2SeqModel
from .training import Hyperparams, TrainConfig, grad_check, train
from .vocab import Vocab, build_vocab

__all__ = [
    "CellParams",
    "ComposeParams",
    "Hyperparams",
    "LatticeEdge",
    "LatticeTranslator",
    "ModelConfig",
    "Seq2SeqModel",
    "TrainConfig",
    "Vocab",
    "WordLattice",
    "build_lattice",
    "build_vocab",
    "chain_from_tokenization",
    "compose_gate",
    "compose_pool",
    "dwl_gru_step",
    "grad_check",
    "gru_step",
    "incoming_edges",
    "read_lattices",
    "reverse",
    "swl_gru_step",
    "train",
    "validate",
    "write_lattices",
]
