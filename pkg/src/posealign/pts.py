"""Reader/writer for the IBUG .pts landmark annotation format.

The grammar is::

    version: 1
    n_points: <int>
    {
    <float> <float>        (n_points rows)
    }

Parsing tolerates CR/LF line endings and arbitrary whitespace between
tokens; serialization always emits the canonical form above with
shortest-round-trip float formatting, so parse/serialize round-trips are
bit-exact.
"""

from __future__ import annotations

import re

import numpy as np

from .errors import PtsParseError

_VERSION_RE = re.compile(r"^version\s*:\s*(\S+)$")
_NPOINTS_RE = re.compile(r"^n_points\s*:\s*(\S+)$")


def parse_pts(text: str) -> np.ndarray:
    """Parse a .pts document into an (N, 2) float64 array of pixel points."""
    lines = text.replace("\r\n", "\n").replace("\r", "\n").split("\n")

    # Iterate over non-blank lines but keep true line numbers for errors.
    numbered = [(i + 1, ln.strip()) for i, ln in enumerate(lines) if ln.strip()]
    pos = 0

    def take(what):
        nonlocal pos
        if pos >= len(numbered):
            last = numbered[-1][0] if numbered else 1
            raise PtsParseError(f"unexpected end of document, expected {what}", last)
        item = numbered[pos]
        pos += 1
        return item

    lineno, line = take("version header")
    m = _VERSION_RE.match(line)
    if not m:
        raise PtsParseError(f"expected 'version: 1' header, got {line!r}", lineno)
    if m.group(1) != "1":
        raise PtsParseError(f"unsupported version {m.group(1)!r}", lineno)

    lineno, line = take("n_points header")
    m = _NPOINTS_RE.match(line)
    if not m:
        raise PtsParseError(f"expected 'n_points: <int>' header, got {line!r}", lineno)
    try:
        n_points = int(m.group(1))
    except ValueError:
        raise PtsParseError(f"non-integer point count {m.group(1)!r}", lineno) from None
    if n_points < 1:
        raise PtsParseError(f"point count must be >= 1, got {n_points}", lineno)

    lineno, line = take("opening brace")
    if line != "{":
        raise PtsParseError(f"expected '{{', got {line!r}", lineno)

    points = np.empty((n_points, 2), dtype=np.float64)
    for i in range(n_points):
        lineno, line = take(f"point row {i + 1}")
        if line == "}":
            raise PtsParseError(
                f"point count mismatch: header says {n_points}, found {i}", lineno
            )
        tokens = line.split()
        if len(tokens) != 2:
            raise PtsParseError(f"expected two coordinates, got {line!r}", lineno)
        for j, tok in enumerate(tokens):
            try:
                points[i, j] = float(tok)
            except ValueError:
                raise PtsParseError(f"non-numeric token {tok!r}", lineno) from None

    lineno, line = take("closing brace")
    if line != "}":
        raise PtsParseError(f"expected '}}' after {n_points} points, got {line!r}", lineno)

    return points


def serialize_pts(points) -> str:
    """Serialize an (N, 2) point array to canonical .pts text."""
    pts = np.asarray(points, dtype=np.float64)
    rows = [f"{float(x)!r} {float(y)!r}" for x, y in pts]
    return "version: 1\nn_points: {}\n{{\n{}\n}}\n".format(len(pts), "\n".join(rows))
