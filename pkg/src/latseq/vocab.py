"""Frequency-truncated vocabularies with reserved BOS/EOS/UNK entries."""

import hashlib
from collections import Counter

from .errors import EmptyCorpusError

__all__ = ["Vocab", "build_vocab", "surfaces_with_reversals"]

BOS, EOS, UNK = 0, 1, 2
RESERVED = ("<s>", "</s>", "<unk>")


class Vocab:
    """Dense id space: reserved ids 0-2, then tokens in rank order."""

    def __init__(self, tokens):
        self.tokens = list(RESERVED) + [t for t in tokens if t not in RESERVED]
        self.map = {t: i for i, t in enumerate(self.tokens)}

    def __len__(self):
        return len(self.tokens)

    def id(self, token):
        return self.map.get(token, UNK)

    def token(self, token_id):
        return self.tokens[token_id]

    def fingerprint(self):
        payload = "\n".join(self.tokens).encode("utf-8")
        return hashlib.sha256(payload).hexdigest()

    def save(self, path):
        with open(path, "w", encoding="utf-8") as f:
            for t in self.tokens[len(RESERVED):]:
                f.write(t + "\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as f:
            return cls([line.rstrip("\n") for line in f if line.rstrip("\n")])


def build_vocab(token_stream, size):
    """Most frequent tokens first, ties broken lexicographically, truncated to ``size``.

    ``size`` counts the three reserved entries.
    """
    if size < 4:
        raise ValueError("vocabulary size must be at least 4")
    counts = Counter(token_stream)
    for r in RESERVED:
        counts.pop(r, None)
    if not counts:
        raise EmptyCorpusError("no tokens in the input stream")
    ranked = sorted(counts, key=lambda t: (-counts[t], t))
    return Vocab(ranked[: size - len(RESERVED)])


def surfaces_with_reversals(lattices):
    """Edge surfaces of the given lattices plus their reversals.

    The backward encoder runs on reversed lattices whose edges carry reversed
    surfaces; including the reversals keeps those lookups in-vocabulary.
    """
    for lat in lattices:
        for e in lat.edges:
            yield e.surface
            yield e.surface[::-1]
