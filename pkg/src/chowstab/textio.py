"""Plain-text formats for polynomials, matrices and bundle frames.

Polynomial: one term per line, ``e0 e1 ... eN : re [im]``. Matrix: one row
per line, whitespace-separated Python complex literals (``1``, ``-2.5j``,
``1+2j``). Bundle frame: ``entry i j`` headers, each followed by the
polynomial lines of that entry. ``#`` starts a comment everywhere.
Errors carry the 1-based line number.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .polynomial import HomogeneousPolynomial
from .projlin import ContractError


class ParseError(ContractError):
    def __init__(self, lineno: int, msg: str, source: str = "<text>"):
        super().__init__(f"{source}:{lineno}: {msg}")
        self.lineno = lineno


def _lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line


def _term(lineno: int, line: str, source: str):
    if ":" not in line:
        raise ParseError(lineno, "expected 'exponents : coefficient'", source)
    left, right = line.split(":", 1)
    try:
        exps = tuple(int(v) for v in left.split())
    except ValueError:
        raise ParseError(lineno, f"bad exponent list {left.strip()!r}", source) from None
    parts = right.split()
    try:
        vals = [float(v) for v in parts]
    except ValueError:
        raise ParseError(lineno, f"bad coefficient {right.strip()!r}", source) from None
    if len(vals) not in (1, 2):
        raise ParseError(lineno, "coefficient must be 're' or 're im'", source)
    if not exps or any(e < 0 for e in exps):
        raise ParseError(lineno, "exponents must be non-negative integers", source)
    return exps, complex(vals[0], vals[1] if len(vals) == 2 else 0.0)


def _build_poly(terms, first_line: int, source: str) -> HomogeneousPolynomial:
    if not terms:
        raise ParseError(first_line, "no terms", source)
    lengths = {len(e) for e, _, _ in terms}
    if len(lengths) != 1:
        bad = next(ln for e, _, ln in terms if len(e) != len(terms[0][0]))
        raise ParseError(bad, "exponent vectors have different lengths", source)
    d0 = sum(terms[0][0])
    for e, _, ln in terms:
        if sum(e) != d0:
            raise ParseError(ln, f"term of degree {sum(e)} in a degree-{d0} form", source)
    acc = {}
    for e, c, _ in terms:
        acc[e] = acc.get(e, 0) + c
    try:
        return HomogeneousPolynomial.from_terms(acc)
    except ContractError as exc:
        raise ParseError(first_line, str(exc), source) from None


def parse_polynomial(text: str, source: str = "<text>") -> HomogeneousPolynomial:
    terms = [(*_term(ln, line, source), ln) for ln, line in _lines(text)]
    return _build_poly(terms, 1, source)


def format_polynomial(f: HomogeneousPolynomial) -> str:
    out = []
    for e, c in sorted(f.terms.items()):
        out.append(" ".join(str(v) for v in e) + f" : {c.real:.17g} {c.imag:.17g}")
    return "\n".join(out) + "\n"


def parse_matrix(text: str, source: str = "<text>") -> np.ndarray:
    rows, width = [], None
    for ln, line in _lines(text):
        try:
            row = [complex(tok) for tok in line.split()]
        except ValueError as exc:
            raise ParseError(ln, f"bad matrix entry ({exc})", source) from None
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise ParseError(ln, f"row has {len(row)} entries, expected {width}", source)
        rows.append(row)
    if not rows:
        raise ParseError(1, "empty matrix", source)
    m = np.array(rows, dtype=complex)
    if m.shape[0] != m.shape[1]:
        raise ParseError(len(rows), f"matrix is {m.shape[0]}x{m.shape[1]}, not square", source)
    if not np.all(np.isfinite(m)):
        raise ParseError(1, "non-finite entry", source)
    return m


def format_matrix(m: np.ndarray) -> str:
    return "\n".join(" ".join(repr(complex(v)) for v in row) for row in np.asarray(m)) + "\n"


def parse_bundle_frame(text: str, source: str = "<text>") -> list[list[HomogeneousPolynomial]]:
    """Frame entries keyed by ``entry i j`` headers; every (i, j) must appear once."""
    blocks: dict[tuple, list] = {}
    starts: dict[tuple, int] = {}
    current = None
    for ln, line in _lines(text):
        if line.startswith("entry"):
            parts = line.split()
            try:
                key = (int(parts[1]), int(parts[2]))
            except (IndexError, ValueError):
                raise ParseError(ln, "expected 'entry <row> <col>'", source) from None
            if key in blocks:
                raise ParseError(ln, f"duplicate entry {key}", source)
            blocks[key], starts[key], current = [], ln, key
            continue
        if current is None:
            raise ParseError(ln, "term before any 'entry' header", source)
        blocks[current].append((*_term(ln, line, source), ln))
    if not blocks:
        raise ParseError(1, "no frame entries", source)
    rows = max(k[0] for k in blocks) + 1
    cols = max(k[1] for k in blocks) + 1
    out = []
    for i in range(rows):
        row = []
        for j in range(cols):
            if (i, j) not in blocks:
                raise ParseError(1, f"missing entry {i} {j}", source)
            row.append(_build_poly(blocks[(i, j)], starts[(i, j)], source))
        out.append(row)
    return out


def read_text(path: str | Path) -> tuple[str, str]:
    p = Path(path)
    if not p.is_file():
        raise ContractError(f"file not found: {p}")
    return p.read_text(), str(p)


def parse_profile_table(text: str) -> list[dict]:
    """Read back a profile table with header ``t,value,stderr[,seed]``."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ParseError(1, "empty table")
    header = lines[0].split(",")
    if header[:3] != ["t", "value", "stderr"]:
        raise ParseError(1, f"unexpected header {lines[0]!r}")
    rows = []
    for ln, line in enumerate(lines[1:], 2):
        vals = line.split(",")
        if len(vals) != len(header):
            raise ParseError(ln, "wrong number of columns")
        try:
            rows.append({h: (int(v) if h == "seed" else float(v)) for h, v in zip(header, vals)})
        except ValueError:
            raise ParseError(ln, "non-numeric field") from None
    return rows
