"""Synthetic ambiguous-segmentation translation task.

A desk-scale stand-in for translating a language without word delimiters:
source sentences are character sequences built by concatenating words from a
small inventory, each word has a unique target translation, and three
simulated segmenters tokenize every sentence -- one perfectly (the oracle)
and two with boundary noise.  The inventory is segmentation-ambiguous by
construction: it contains compound words whose characters also spell a
sequence of shorter inventory words with different translations.

Boundary-noise model: each internal word boundary of the oracle tokenization
is dropped (merging the neighbours) with probability ``noise``, and each
resulting multi-character token is split at a random internal position with
probability ``noise``.
"""

import os
import string
from dataclasses import dataclass

import numpy as np

from .errors import SpecError

__all__ = ["ToyTaskSpec", "gen_toy", "corrupt_tokenization"]

SPLITS = (("train", 0.8), ("valid", 0.1), ("test", 0.1))
FILE_KINDS = ("src", "seg1", "seg2", "seg3", "tgt")


@dataclass
class ToyTaskSpec:
    sentences: int = 2000
    noise: float = 0.3
    seed: int = 11
    alphabet_size: int = 10
    base_words: int = 18
    compound_words: int = 6
    min_words: int = 2
    max_words: int = 6

    def __post_init__(self):
        if self.sentences < 10:
            raise SpecError("need at least 10 sentences to split 80/10/10")
        if not 0.0 <= self.noise <= 1.0:
            raise SpecError("noise must lie in [0, 1]")
        if not 2 <= self.alphabet_size <= 26:
            raise SpecError("alphabet size must lie in [2, 26]")
        if self.base_words < 4 or self.compound_words < 1:
            raise SpecError("inventory too small to be ambiguous")
        if not 1 <= self.min_words <= self.max_words:
            raise SpecError("word-count range is empty")


def _make_inventory(spec, rng):
    """Words and their translations; translations are the uppercased surfaces."""
    alphabet = string.ascii_lowercase[: spec.alphabet_size]
    words = []
    seen = set()
    attempts = 0
    while len(words) < spec.base_words:
        attempts += 1
        if attempts > 10000:
            raise SpecError("cannot draw %d distinct base words" % spec.base_words)
        length = int(rng.integers(2, 5))
        w = "".join(alphabet[i] for i in rng.integers(0, len(alphabet), length))
        if w not in seen:
            seen.add(w)
            words.append(w)
    compounds = 0
    attempts = 0
    while compounds < spec.compound_words:
        attempts += 1
        if attempts > 10000:
            raise SpecError("cannot build %d ambiguous compounds" % spec.compound_words)
        u, v = (words[int(i)] for i in rng.integers(0, spec.base_words, 2))
        w = u + v
        if len(w) <= 8 and w not in seen:
            seen.add(w)
            words.append(w)
            compounds += 1
    return [(w, w.upper()) for w in words]


def corrupt_tokenization(tokens, noise, rng):
    """Perturb word boundaries: merge neighbours, then split long tokens.

    Splits never re-create a boundary the merge phase just removed, so at
    noise 1.0 the output always differs from the input at every original
    boundary.
    """
    merged = [(tokens[0], set())]
    for tok in tokens[1:]:
        if rng.random() < noise:
            prev, bounds = merged[-1]
            merged[-1] = (prev + tok, bounds | {len(prev)})
        else:
            merged.append((tok, set()))
    out = []
    for tok, bounds in merged:
        cuts = [c for c in range(1, len(tok)) if c not in bounds]
        if cuts and rng.random() < noise:
            cut = cuts[int(rng.integers(0, len(cuts)))]
            out.append(tok[:cut])
            out.append(tok[cut:])
        else:
            out.append(tok)
    return out


def gen_toy(spec, out_dir):
    """Generate the corpus files; deterministic for a given spec.

    Writes ``<split>.<kind>.txt`` for split in train/valid/test and kind in
    src (raw characters), seg1 (oracle tokenization), seg2/seg3 (corrupted
    segmenters), tgt (target sentence).  Returns the path map.
    """
    rng = np.random.default_rng(spec.seed)
    inventory = _make_inventory(spec, rng)
    translations = dict(inventory)
    surfaces = [w for w, _ in inventory]

    # The ambiguity invariant: some surface has two tokenizations with
    # different translations.
    ambiguous = any(u + v in translations for u in surfaces for v in surfaces)
    if not ambiguous:
        raise SpecError("inventory contains no ambiguous character string")

    rows = []
    for _ in range(spec.sentences):
        k = int(rng.integers(spec.min_words, spec.max_words + 1))
        picks = [surfaces[int(i)] for i in rng.integers(0, len(surfaces), k)]
        oracle = picks
        seg2 = corrupt_tokenization(oracle, spec.noise, rng)
        seg3 = corrupt_tokenization(oracle, spec.noise, rng)
        target = [translations[w] for w in oracle]
        rows.append(("".join(oracle), oracle, seg2, seg3, target))

    os.makedirs(out_dir, exist_ok=True)
    n = len(rows)
    n_train = int(n * SPLITS[0][1])
    n_valid = int(n * SPLITS[1][1])
    bounds = {
        "train": (0, n_train),
        "valid": (n_train, n_train + n_valid),
        "test": (n_train + n_valid, n),
    }
    paths = {}
    for split, (lo, hi) in bounds.items():
        part = rows[lo:hi]
        columns = {
            "src": [r[0] for r in part],
            "seg1": [" ".join(r[1]) for r in part],
            "seg2": [" ".join(r[2]) for r in part],
            "seg3": [" ".join(r[3]) for r in part],
            "tgt": [" ".join(r[4]) for r in part],
        }
        for kind in FILE_KINDS:
            path = os.path.join(out_dir, "%s.%s.txt" % (split, kind))
            with open(path, "w", encoding="utf-8") as f:
                for line in columns[kind]:
                    f.write(line + "\n")
            paths["%s.%s" % (split, kind)] = path
    return paths
