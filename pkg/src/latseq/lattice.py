"""Word lattices: DAGs over character-boundary positions whose edges are candidate words.

A lattice over a character sequence ``c_1..c_N`` has nodes ``v_0..v_N`` where
``v_i`` sits between ``c_i`` and ``c_{i+1}``.  An edge ``(i, j)`` with ``i < j``
carries the word ``c_{i+1:j}``.  Merging several tokenizations of the same
sentence yields a lattice that compactly encodes all of them.
"""

from dataclasses import dataclass

from .errors import EmptyInputError, MismatchError, ParseError

__all__ = [
    "LatticeEdge",
    "WordLattice",
    "Violation",
    "chain_from_tokenization",
    "build_lattice",
    "validate",
    "reverse",
    "incoming_edges",
    "outgoing_edges",
    "write_lattices",
    "read_lattices",
]


@dataclass(frozen=True, order=True)
class LatticeEdge:
    """Edge from node ``start`` to node ``end`` carrying the covered word."""

    start: int
    end: int
    surface: str


@dataclass(frozen=True)
class Violation:
    """One validation failure; ``subject`` names the offending edge or node."""

    rule: str
    subject: str
    message: str

    def __str__(self):
        return "%s [%s]: %s" % (self.rule, self.subject, self.message)


class WordLattice:
    """Immutable lattice over a character sequence.

    Edge identity is the span ``(start, end)`` alone; for spans read off the
    same character sequence the span determines the surface, so merging
    deduplicates by span.  Edges are kept sorted by ``(start, end)``.
    """

    __slots__ = ("chars", "edges", "_by_end")

    def __init__(self, chars, edges):
        if len(chars) < 1:
            raise EmptyInputError("character sequence must be non-empty")
        dedup = {}
        for e in edges:
            dedup[(e.start, e.end)] = e
        object.__setattr__(self, "chars", chars)
        object.__setattr__(
            self, "edges", tuple(dedup[k] for k in sorted(dedup))
        )
        by_end = {}
        for e in self.edges:
            by_end.setdefault(e.end, []).append(e)
        object.__setattr__(self, "_by_end", by_end)

    def __setattr__(self, name, value):
        raise AttributeError("WordLattice is immutable")

    @property
    def n(self):
        """Character count; nodes are 0..n."""
        return len(self.chars)

    def spans(self):
        return {(e.start, e.end) for e in self.edges}

    def __eq__(self, other):
        if not isinstance(other, WordLattice):
            return NotImplemented
        return self.chars == other.chars and self.edges == other.edges

    def __hash__(self):
        return hash((self.chars, self.edges))

    def __repr__(self):
        return "WordLattice(chars=%r, edges=%d)" % (self.chars, len(self.edges))


def _check_tokenization(chars, tokens, index=None):
    joined = "".join(tokens)
    if joined != chars:
        where = "" if index is None else " (tokenization %d)" % index
        raise MismatchError(
            "tokens%s concatenate to %r, expected %r" % (where, joined, chars)
        )


def chain_from_tokenization(chars, tokens):
    """Single-path lattice with one edge per token."""
    _check_tokenization(chars, tokens)
    edges = []
    pos = 0
    for tok in tokens:
        edges.append(LatticeEdge(pos, pos + len(tok), tok))
        pos += len(tok)
    return WordLattice(chars, edges)


def build_lattice(chars, tokenizations):
    """Merge several tokenizations of ``chars`` into one lattice.

    Identical tokens from different tokenizations collapse onto a single edge
    because edge identity is the span.
    """
    if not tokenizations:
        raise EmptyInputError("need at least one tokenization")
    edges = []
    for i, tokens in enumerate(tokenizations):
        _check_tokenization(chars, tokens, index=i)
        pos = 0
        for tok in tokens:
            edges.append(LatticeEdge(pos, pos + len(tok), tok))
            pos += len(tok)
    return WordLattice(chars, edges)


def validate(lat):
    """Return all invariant violations; an empty list means the lattice is valid.

    Valid means: every edge runs left to right with a surface matching the
    covered characters, every edge lies on some ``v_0 -> v_N`` path, and at
    least one such path exists.
    """
    violations = []
    n = lat.n
    for e in lat.edges:
        subject = "edge %d:%d" % (e.start, e.end)
        if not (0 <= e.start < e.end <= n):
            violations.append(
                Violation("span", subject, "span must satisfy 0 <= start < end <= N")
            )
            continue
        expected = lat.chars[e.start : e.end]
        if e.surface != expected:
            violations.append(
                Violation(
                    "surface",
                    subject,
                    "surface %r does not spell characters %r" % (e.surface, expected),
                )
            )

    # Forward reachability from v_0 and backward reachability from v_N.
    fwd = {0}
    for e in lat.edges:  # edges sorted by start, so one left-to-right sweep suffices
        if e.start in fwd:
            fwd.add(e.end)
    bwd = {n}
    for e in reversed(lat.edges):
        if e.end in bwd:
            bwd.add(e.start)

    if n not in fwd:
        violations.append(
            Violation("connectivity", "node %d" % n, "no path from v_0 to v_N")
        )
    for e in lat.edges:
        subject = "edge %d:%d" % (e.start, e.end)
        if e.start not in fwd:
            violations.append(
                Violation(
                    "reachability",
                    subject,
                    "node %d not reachable from v_0" % e.start,
                )
            )
        if e.end not in bwd:
            violations.append(
                Violation(
                    "reachability",
                    subject,
                    "node %d cannot reach v_%d" % (e.end, n),
                )
            )
    return violations


def reverse(lat):
    """Mirror the lattice: edge ``(i, j, s)`` becomes ``(N-j, N-i, reversed(s))``.

    An involution: ``reverse(reverse(lat)) == lat``.
    """
    n = lat.n
    edges = [
        LatticeEdge(n - e.end, n - e.start, e.surface[::-1]) for e in lat.edges
    ]
    return WordLattice(lat.chars[::-1], edges)


def incoming_edges(lat, v):
    """Edges ending at node ``v``, ordered by ascending start index."""
    return list(lat._by_end.get(v, ()))


def outgoing_edges(lat, v):
    """Edges starting at node ``v``, ordered by ascending end index."""
    return sorted(
        (e for e in lat.edges if e.start == v), key=lambda e: e.end
    )


def write_lattices(lattices, sink):
    """Write lattices in the line-based text format, one blank line between blocks."""
    first = True
    for lat in lattices:
        if not first:
            sink.write("\n")
        first = False
        sink.write("LATTICE %d\n" % lat.n)
        for e in lat.edges:
            if any(ch.isspace() for ch in e.surface):
                raise ParseError(
                    "surface %r contains whitespace and cannot be serialized" % e.surface
                )
            sink.write("EDGE %d %d %s\n" % (e.start, e.end, e.surface))


def read_lattices(source):
    """Parse the text format produced by :func:`write_lattices`."""
    lattices = []
    n = None
    edges = []
    header_line = None

    def finish(at_line):
        nonlocal n, edges, header_line
        if n is None:
            return
        if not edges:
            raise ParseError("lattice with no edges", line=header_line)
        chars = [None] * n
        for lineno, e in edges:
            for off, ch in enumerate(e.surface):
                i = e.start + off
                if chars[i] is None:
                    chars[i] = ch
                elif chars[i] != ch:
                    raise ParseError(
                        "surface %r conflicts with character %r at position %d"
                        % (e.surface, chars[i], i + 1),
                        line=lineno,
                    )
        for i, ch in enumerate(chars):
            if ch is None:
                raise ParseError(
                    "character %d covered by no edge" % (i + 1), line=header_line
                )
        lattices.append(WordLattice("".join(chars), [e for _, e in edges]))
        n = None
        edges = []
        header_line = None

    for lineno, raw in enumerate(source, start=1):
        line = raw.rstrip("\n")
        if not line.strip():
            finish(lineno)
            continue
        fields = line.split(" ")
        if fields[0] == "LATTICE":
            if n is not None:
                raise ParseError("LATTICE header inside an open block", line=lineno)
            if len(fields) != 2:
                raise ParseError("expected 'LATTICE <N>'", line=lineno)
            try:
                n = int(fields[1])
            except ValueError:
                raise ParseError("character count %r is not an integer" % fields[1], line=lineno)
            if n < 1:
                raise ParseError("character count must be >= 1", line=lineno)
            header_line = lineno
        elif fields[0] == "EDGE":
            if n is None:
                raise ParseError("EDGE before LATTICE header", line=lineno)
            if len(fields) != 4:
                raise ParseError("expected 'EDGE <start> <end> <surface>'", line=lineno)
            try:
                start, end = int(fields[1]), int(fields[2])
            except ValueError:
                raise ParseError("edge endpoints must be integers", line=lineno)
            if not (0 <= start < end <= n):
                raise ParseError(
                    "edge span %d:%d violates 0 <= start < end <= %d" % (start, end, n),
                    line=lineno,
                )
            surface = fields[3]
            if len(surface) != end - start:
                raise ParseError(
                    "surface %r has length %d, span covers %d characters"
                    % (surface, len(surface), end - start),
                    line=lineno,
                )
            edges.append((lineno, LatticeEdge(start, end, surface)))
        else:
            raise ParseError("unknown record %r" % fields[0], line=lineno)
    finish(None)
    return lattices
