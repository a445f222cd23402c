"""Corpus token accuracy: the desk-scale stand-in for translation scoring."""

from .errors import LengthMismatchError

__all__ = ["token_accuracy", "evaluate_accuracy"]


def token_accuracy(hyp_sentences, ref_sentences):
    """Fraction of reference tokens matched at the same position.

    Hypothesis tokens beyond the reference length earn no credit and cost
    nothing; missing tokens count as misses.
    """
    if len(hyp_sentences) != len(ref_sentences):
        raise LengthMismatchError(
            "hypothesis has %d sentences, reference has %d"
            % (len(hyp_sentences), len(ref_sentences))
        )
    matches = 0
    total = 0
    for hyp, ref in zip(hyp_sentences, ref_sentences):
        for h, r in zip(hyp, ref):
            if h == r:
                matches += 1
        total += len(ref)
    if total == 0:
        return 1.0 if all(len(h) == 0 for h in hyp_sentences) else 0.0
    return matches / total


def evaluate_accuracy(hyp_path, ref_path):
    """Token accuracy between two parallel token files (one sentence per line)."""
    with open(hyp_path, encoding="utf-8") as f:
        hyp = [line.split() for line in f]
    with open(ref_path, encoding="utf-8") as f:
        ref = [line.split() for line in f]
    return token_accuracy(hyp, ref)
