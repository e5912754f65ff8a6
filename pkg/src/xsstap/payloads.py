"""Trackable payloads and recovery of their sanitized reflections.

A payload is eight runs of random lowercase letters joined by seven
syntactically interesting characters. The letters survive every common
server-side escaping pass unchanged (except for case folding), while each
joiner either survives, gets encoded into a short substitute, or is dropped.
The identification pattern derived from a payload therefore matches the
letter runs case-insensitively and allows a bounded gap where each joiner
stood, which recovers the reflection no matter which sanitizer ran over it.
"""

from __future__ import annotations

import random
import re
import string
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

__all__ = [
    "JOINERS",
    "RUN_LENGTHS",
    "Payload",
    "IdentificationPattern",
    "PayloadMatch",
    "PlaceholderAllocator",
    "canonical_payload",
    "derive_pattern",
    "find_matches",
    "generate_payload",
    "payload_stream",
    "prefix_probe",
    "substitute_placeholders",
]

# joiner order is fixed; together the seven cover string breaking in HTML,
# attributes, JS strings, CSS, and URLs
JOINERS = b"<\"'&:\\/"
RUN_LENGTHS = (6, 2, 2, 2, 2, 2, 2, 4)

# an escaped joiner never expands past this many bytes (&quot; is 6, %5C is
# 3, \x5c is 4); 20 leaves slack for double encoding
GAP_LIMIT = 20
_GAP = ".{0,%d}" % GAP_LIMIT


@dataclass(frozen=True)
class Payload:
    """One injected marker value, held as its eight letter runs."""

    runs: tuple[str, ...]

    @property
    def identifier(self) -> str:
        """The letters alone; unique per payload with overwhelming odds."""
        return "".join(self.runs)

    def encode(self) -> bytes:
        out = bytearray(self.runs[0].encode("ascii"))
        for joiner, run in zip(JOINERS, self.runs[1:]):
            out.append(joiner)
            out += run.encode("ascii")
        return bytes(out)


@dataclass(frozen=True)
class IdentificationPattern:
    """Compiled recognizer for one payload's (possibly encoded) reflection."""

    payload: Payload
    text: str
    regex: re.Pattern[bytes] = field(compare=False, repr=False)


@dataclass(frozen=True)
class PayloadMatch:
    """One reflection found in a response body."""

    payload: Payload
    start: int
    end: int
    data: bytes


def canonical_payload() -> Payload:
    """The fixed a..v payload used in documentation and golden tests."""
    return Payload(runs=("abcdef", "gh", "ij", "kl", "mn", "op", "qr", "stuv"))


def generate_payload(rng: random.Random) -> Payload:
    """Draw one payload; adjacent letters never repeat."""
    letters = []
    prev = ""
    for _ in range(sum(RUN_LENGTHS)):
        choice = rng.choice(string.ascii_lowercase)
        while choice == prev:
            choice = rng.choice(string.ascii_lowercase)
        letters.append(choice)
        prev = choice
    runs = []
    pos = 0
    for n in RUN_LENGTHS:
        runs.append("".join(letters[pos : pos + n]))
        pos += n
    return Payload(runs=tuple(runs))


def payload_stream(seed: int) -> Iterator[Payload]:
    """Endless deterministic payload supply for one scan."""
    master = random.Random(seed)
    while True:
        yield generate_payload(random.Random(master.getrandbits(64)))


def derive_pattern(payload: Payload) -> IdentificationPattern:
    parts: list[str] = []
    for i, run in enumerate(payload.runs):
        if i:
            parts.append(_GAP)
        parts.extend("(%s|%s)" % (c, c.upper()) for c in run)
    text = "".join(parts)
    regex = re.compile(text.encode("ascii"), re.DOTALL)
    return IdentificationPattern(payload=payload, text=text, regex=regex)


def find_matches(
    data: bytes, patterns: Sequence[IdentificationPattern]
) -> list[PayloadMatch]:
    """Locate every reflection in *data*, resolving overlaps.

    Candidates from all patterns are merged; where two overlap the one
    starting first wins, with the longer span breaking ties.
    """
    candidates: list[PayloadMatch] = []
    for pattern in patterns:
        for m in pattern.regex.finditer(data):
            candidates.append(
                PayloadMatch(pattern.payload, m.start(), m.end(), m.group(0))
            )
    candidates.sort(key=lambda c: (c.start, c.start - c.end))
    accepted: list[PayloadMatch] = []
    cursor = 0
    for candidate in candidates:
        if candidate.start >= cursor:
            accepted.append(candidate)
            cursor = candidate.end
    return accepted


class PlaceholderAllocator:
    """Hands out lowercase-only tokens that are fresh for a given document.

    Lowercase letters cannot terminate a string, close a tag, or otherwise
    change parsing state in any of the grammars we analyze, so swapping a
    reflection for such a token preserves the surrounding syntax tree.
    """

    def __init__(self) -> None:
        self._counter = 0

    def allocate(self, document: bytes) -> bytes:
        while True:
            token = self._render(self._counter)
            self._counter += 1
            if token not in document:
                return token

    @staticmethod
    def _render(counter: int) -> bytes:
        digits = []
        for _ in range(8):
            digits.append(string.ascii_lowercase[counter % 26])
            counter //= 26
        return b"ph" + "".join(reversed(digits)).encode("ascii")


def substitute_placeholders(
    data: bytes,
    matches: Iterable[PayloadMatch],
    allocator: PlaceholderAllocator,
) -> tuple[bytes, list[tuple[bytes, PayloadMatch]]]:
    """Replace each matched span with a fresh token.

    Returns the rewritten document and the (token, match) pairs in document
    order. Every token occurs exactly once in the result.
    """
    ordered = sorted(matches, key=lambda m: m.start)
    for _ in range(5):
        pieces: list[bytes] = []
        mapping: list[tuple[bytes, PayloadMatch]] = []
        last = 0
        for match in ordered:
            token = allocator.allocate(data)
            pieces.append(data[last : match.start])
            pieces.append(token)
            mapping.append((token, match))
            last = match.end
        pieces.append(data[last:])
        result = b"".join(pieces)
        # splicing could in principle assemble a token out of fragments;
        # retry with fresh tokens in that unlikely case
        if all(result.count(token) == 1 for token, _ in mapping):
            return result, mapping
    raise RuntimeError("could not allocate collision-free placeholders")


def prefix_probe(value: bytes) -> re.Pattern[bytes] | None:
    """Recognizer for the leading bytes of a stored value.

    Used to cheaply test whether a fetched value can show up in a response
    at all: letters match case-insensitively, digits literally, and any
    other byte may have been encoded, so it becomes a bounded gap. Values
    whose prefix carries fewer than four alphanumerics give no usable
    signal and yield ``None``.
    """
    prefix = value[:GAP_LIMIT]
    parts: list[str] = []
    alnum = 0
    for byte in prefix:
        if 0x61 <= byte <= 0x7A or 0x41 <= byte <= 0x5A:
            low = chr(byte).lower()
            parts.append("(%s|%s)" % (low, low.upper()))
            alnum += 1
        elif 0x30 <= byte <= 0x39:
            parts.append(chr(byte))
            alnum += 1
        else:
            parts.append(_GAP)
    if alnum < 4:
        return None
    return re.compile("".join(parts).encode("ascii"), re.DOTALL)
