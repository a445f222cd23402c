"""Scikit-learn style front door: fit on (lattice, target tokens) pairs, predict tokens.

``LatticeTranslator`` wraps vocabulary construction, model initialization and
the training loop behind the usual ``fit`` / ``predict`` / ``score`` surface
so the lattice encoder composes with sklearn tooling (``get_params`` /
``set_params`` / ``clone`` come from ``BaseEstimator``).
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .cells import CELL_KINDS, COMPOSE_MODES
from .lattice import WordLattice, validate
from .model import ModelConfig
from .training import Hyperparams, TrainConfig, train
from .vocab import EOS, Vocab, build_vocab, surfaces_with_reversals

__all__ = ["LatticeTranslator", "check_lattices", "check_targets"]


def check_lattices(X, deep=False):
    """Validate an iterable of lattices; returns them as a list."""
    X = list(X)
    if not X:
        raise ValueError("need at least one lattice")
    for i, lat in enumerate(X):
        if not isinstance(lat, WordLattice):
            raise TypeError("item %d is %r, expected WordLattice" % (i, type(lat)))
        if deep:
            violations = validate(lat)
            if violations:
                raise ValueError("lattice %d is invalid: %s" % (i, violations[0]))
    return X


def check_targets(y, n):
    y = [list(t) for t in y]
    if len(y) != n:
        raise ValueError("got %d targets for %d lattices" % (len(y), n))
    for i, t in enumerate(y):
        if not t:
            raise ValueError("target %d is empty" % i)
        if not all(isinstance(tok, str) for tok in t):
            raise TypeError("target %d must be a sequence of token strings" % i)
    return y


class LatticeTranslator(BaseEstimator):
    """Lattice-to-sequence translator with a word-lattice GRU encoder.

    Parameters mirror the training hyperparameters; the defaults are the
    full-scale settings, so desk-scale runs usually shrink ``embed_dim`` /
    ``hidden`` and the batch size.
    """

    def __init__(self, cell="dwl", compose="gate", embed_dim=320, hidden=512,
                 learning_rate=5e-4, batch_size=80, clip_norm=1.0, rho=0.99,
                 epsilon=1e-4, patience=5, max_epochs=10000, max_updates=None,
                 src_vocab_size=50000, tgt_vocab_size=50000,
                 validation_fraction=0.1, max_len=50, beam_width=1,
                 length_norm=True, seed=0, log_sink=None):
        self.cell = cell
        self.compose = compose
        self.embed_dim = embed_dim
        self.hidden = hidden
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.clip_norm = clip_norm
        self.rho = rho
        self.epsilon = epsilon
        self.patience = patience
        self.max_epochs = max_epochs
        self.max_updates = max_updates
        self.src_vocab_size = src_vocab_size
        self.tgt_vocab_size = tgt_vocab_size
        self.validation_fraction = validation_fraction
        self.max_len = max_len
        self.beam_width = beam_width
        self.length_norm = length_norm
        self.seed = seed
        self.log_sink = log_sink

    def _check_config(self):
        if self.cell not in CELL_KINDS:
            raise ValueError("cell must be one of %s" % (CELL_KINDS,))
        if self.compose not in COMPOSE_MODES:
            raise ValueError("compose must be one of %s" % (COMPOSE_MODES,))
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must lie in [0, 1)")

    def fit(self, X, y, validation_data=None):
        """Train on lattices ``X`` and token-sequence targets ``y``.

        ``validation_data`` is an optional ``(lattices, targets)`` pair used
        for early stopping; without it a tail fraction of the training data
        is held out (after a seeded shuffle).
        """
        self._check_config()
        X = check_lattices(X)
        y = check_targets(y, len(X))

        self.src_vocab_ = build_vocab(surfaces_with_reversals(X), self.src_vocab_size)
        self.tgt_vocab_ = build_vocab(
            (tok for t in y for tok in t), self.tgt_vocab_size
        )
        pairs = [
            (lat, [self.tgt_vocab_.id(tok) for tok in t] + [EOS])
            for lat, t in zip(X, y)
        ]
        if validation_data is not None:
            vx = check_lattices(validation_data[0])
            vy = check_targets(validation_data[1], len(vx))
            val_pairs = [
                (lat, [self.tgt_vocab_.id(tok) for tok in t] + [EOS])
                for lat, t in zip(vx, vy)
            ]
            train_pairs = pairs
        else:
            rng = np.random.default_rng(self.seed)
            order = rng.permutation(len(pairs))
            n_val = max(1, int(len(pairs) * self.validation_fraction))
            val_pairs = [pairs[i] for i in order[:n_val]]
            train_pairs = [pairs[i] for i in order[n_val:]]

        cfg = TrainConfig(
            model=ModelConfig(cell=self.cell, compose=self.compose,
                              embed_dim=self.embed_dim, hidden=self.hidden),
            hyper=Hyperparams(embed_dim=self.embed_dim, hidden=self.hidden,
                              lr=self.learning_rate, batch=self.batch_size,
                              clip=self.clip_norm, rmsprop_rho=self.rho,
                              rmsprop_eps=self.epsilon,
                              patience_epochs=self.patience),
            seed=self.seed,
            max_epochs=self.max_epochs,
            max_updates=self.max_updates,
            val_max_len=self.max_len,
            log_sink=self.log_sink,
        )
        result = train(cfg, train_pairs, val_pairs, self.src_vocab_, self.tgt_vocab_)
        self.model_ = result.model
        self.train_result_ = result
        return self

    def _fitted_model(self):
        model = getattr(self, "model_", None)
        if model is None:
            raise NotFittedError("call fit before predict/score")
        return model

    def predict(self, X):
        """Decode each lattice to a list of target token strings."""
        model = self._fitted_model()
        X = check_lattices(X)
        out = []
        for lat in X:
            ids = model.decode_beam(lat, max_len=self.max_len,
                                    beam_width=self.beam_width,
                                    length_norm=self.length_norm)
            out.append([self.tgt_vocab_.token(i) for i in ids])
        return out

    def score(self, X, y):
        """Corpus token accuracy of greedy/beam output against ``y``."""
        from .evaluate import token_accuracy

        y = check_targets(y, len(list(X)))
        return token_accuracy(self.predict(X), y)
