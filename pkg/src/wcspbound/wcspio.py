"""Reading and writing instances, plus the normalized-bound score.

Two formats are handled:

* the plain-text cost function network (``.wcsp``) format, read only.  Costs
  are minimized there, so weights are their negation and any cost at or above
  the declared upper bound becomes a hard ``-inf`` weight;
* a small native format that stores maximization weights verbatim::

      variables 3
      domains 2 2 2
      scope 0 : 3 5
      scope 0 1 : 11 9 5 12

  Weights of a scope are listed in lexicographic order of its value tuples
  (first variable most significant); ``-inf`` marks a hard constraint.
"""
from __future__ import annotations

import math
from typing import Iterator

import numpy as np

from .core import WcspStructure


class ParseError(ValueError):
    """Malformed instance document; the message names the offending line."""


# -- cost function network format -------------------------------------------------


class _Tokens:
    def __init__(self, text: str):
        self._items = [
            (tok, n) for n, line in enumerate(text.splitlines(), 1) for tok in line.split()
        ]
        self.pos = 0

    def __bool__(self):
        return self.pos < len(self._items)

    def line(self) -> int:
        if self.pos < len(self._items):
            return self._items[self.pos][1]
        return self._items[-1][1] if self._items else 0

    def next(self, what: str) -> str:
        if self.pos >= len(self._items):
            raise ParseError(f"unexpected end of file while reading {what}")
        tok = self._items[self.pos][0]
        self.pos += 1
        return tok

    def int(self, what: str) -> int:
        line, tok = self.line(), self.next(what)
        try:
            return int(tok)
        except ValueError:
            raise ParseError(f"line {line}: expected integer {what}, got {tok!r}") from None

    def number(self, what: str) -> float:
        line, tok = self.line(), self.next(what)
        try:
            val = float(tok)
        except ValueError:
            raise ParseError(f"line {line}: expected number {what}, got {tok!r}") from None
        if not math.isfinite(val):
            raise ParseError(f"line {line}: {what} must be finite")
        return val


def parse_wcsp_file(data: bytes | str):
    """Parse a cost function network document into ``(structure, weights)``."""
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    tok = _Tokens(text)
    tok.next("instance name")
    nvar = tok.int("variable count")
    tok.int("maximum domain size")
    ncons = tok.int("constraint count")
    ub = tok.number("upper bound")
    if nvar < 1:
        raise ParseError("line 1: variable count must be positive")
    if ncons < 0:
        raise ParseError("line 1: constraint count must be non-negative")
    domains = [tok.int("domain size") for _ in range(nvar)]
    if any(d < 1 for d in domains):
        raise ParseError("domain sizes must be positive")

    def weight(cost: float) -> float:
        return -math.inf if cost >= ub else -cost

    tables: dict[tuple, np.ndarray] = {}
    constant = 0.0
    for c in range(ncons):
        line = tok.line()
        arity = tok.int("arity")
        if arity > 2:
            raise ParseError(f"line {line}: unsupported arity {arity} (at most 2)")
        if arity < 0:
            raise ParseError(f"line {line}: negative arity")
        scope = [tok.int("variable index") for _ in range(arity)]
        for v in scope:
            if not 0 <= v < nvar:
                raise ParseError(f"line {line}: variable {v} out of range")
        if len(set(scope)) != len(scope):
            raise ParseError(f"line {line}: repeated variable in scope")
        default = tok.number("default cost")
        ntup = tok.int("tuple count")
        if ntup < 0:
            raise ParseError(f"line {line}: negative tuple count")
        if arity == 0:
            if ntup not in (0, 1):
                raise ParseError(f"line {line}: a constant term lists at most one tuple")
            cost = tok.number("cost") if ntup else default
            constant += weight(cost)
            continue
        order = sorted(range(arity), key=lambda p: scope[p])
        key = tuple(scope[p] for p in order)
        dims = [domains[v] for v in key]
        table = np.full(dims, weight(default))
        seen = set()
        for _ in range(ntup):
            tline = tok.line()
            vals = [tok.int("tuple value") for _ in range(arity)]
            cost = tok.number("tuple cost")
            for v, val in zip(scope, vals):
                if not 0 <= val < domains[v]:
                    raise ParseError(f"line {tline}: value {val} out of range for variable {v}")
            idx = tuple(vals[p] for p in order)
            if idx in seen:
                raise ParseError(f"line {tline}: duplicate tuple")
            seen.add(idx)
            table[idx] = weight(cost)
        flat = table.ravel()
        tables[key] = tables[key] + flat if key in tables else flat
    if tok:
        raise ParseError(f"line {tok.line()}: trailing data after {ncons} constraints")

    if not tables:
        tables[(0,)] = np.zeros(domains[0])
    scopes = list(tables)
    structure = WcspStructure(domains, scopes)
    f = np.concatenate([tables[s] for s in structure.scopes])
    # constant term folded into the first scope
    f[structure.block(0)] += constant
    return structure, structure.weights(f)


# -- native format ----------------------------------------------------------------


def _native_lines(text: str) -> Iterator[tuple[int, list[str]]]:
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield n, line.split()


def _weight_token(tok: str, n: int) -> float:
    if tok == "-inf":
        return -math.inf
    try:
        val = float(tok)
    except ValueError:
        raise ParseError(f"line {n}: bad weight {tok!r}") from None
    if not math.isfinite(val):
        raise ParseError(f"line {n}: weights must be finite or -inf, got {tok!r}")
    return val


def parse_native(document: str | bytes):
    """Parse a native document into ``(structure, weights)``."""
    text = document.decode("utf-8") if isinstance(document, bytes) else document
    nvar = None
    domains = None
    scopes, blocks = [], []
    for n, toks in _native_lines(text):
        head = toks[0]
        if head == "variables":
            if nvar is not None or len(toks) != 2:
                raise ParseError(f"line {n}: expected a single 'variables N' line")
            try:
                nvar = int(toks[1])
            except ValueError:
                raise ParseError(f"line {n}: bad variable count {toks[1]!r}") from None
            if nvar < 1:
                raise ParseError(f"line {n}: variable count must be positive")
        elif head == "domains":
            if nvar is None or domains is not None:
                raise ParseError(f"line {n}: 'domains' must follow 'variables' once")
            try:
                domains = [int(t) for t in toks[1:]]
            except ValueError:
                raise ParseError(f"line {n}: domain sizes must be integers") from None
            if len(domains) != nvar or any(d < 1 for d in domains):
                raise ParseError(f"line {n}: expected {nvar} positive domain sizes")
        elif head == "scope":
            if domains is None:
                raise ParseError(f"line {n}: 'scope' before 'domains'")
            if ":" not in toks:
                raise ParseError(f"line {n}: missing ':' between variables and weights")
            colon = toks.index(":")
            try:
                vars_ = [int(t) for t in toks[1:colon]]
            except ValueError:
                raise ParseError(f"line {n}: scope variables must be integers") from None
            if not vars_:
                raise ParseError(f"line {n}: empty scope")
            if vars_ != sorted(set(vars_)):
                raise ParseError(f"line {n}: scope variables must be strictly ascending")
            if vars_[0] < 0 or vars_[-1] >= nvar:
                raise ParseError(f"line {n}: scope variable out of range")
            if tuple(vars_) in scopes:
                raise ParseError(f"line {n}: duplicate scope {tuple(vars_)}")
            weights = [_weight_token(t, n) for t in toks[colon + 1 :]]
            size = int(np.prod([domains[v] for v in vars_]))
            if len(weights) != size:
                raise ParseError(f"line {n}: scope {tuple(vars_)} needs {size} weights, got {len(weights)}")
            scopes.append(tuple(vars_))
            blocks.append(weights)
        else:
            raise ParseError(f"line {n}: unknown keyword {head!r}")
    if domains is None:
        raise ParseError("document lacks 'variables' and 'domains' lines")
    if not scopes:
        raise ParseError("document declares no scope")
    structure = WcspStructure(domains, scopes)
    return structure, structure.weights([w for b in blocks for w in b])


def _fmt(w: float) -> str:
    return "-inf" if w == -math.inf else repr(float(w))


def emit_native(structure: WcspStructure, f) -> str:
    lines = [
        f"variables {structure.variable_count}",
        "domains " + " ".join(str(d) for d in structure.domain_sizes),
    ]
    for s, scope in enumerate(structure.scopes):
        ws = " ".join(_fmt(w) for w in f[structure.block(s)])
        lines.append(f"scope {' '.join(map(str, scope))} : {ws}")
    return "\n".join(lines) + "\n"


# -- scoring ----------------------------------------------------------------------


def normalized_bound(b_m: float, b_w: float, b_b: float) -> float:
    """Score a bound between the worst (0) and the best (1) bound of an instance.

    Bounds of a maximization problem: smaller is better, so ``b_w >= b_m >= b_b``.
    Bounds within ``1e-4 * |b_b|`` or ``0.01`` of the best count as best.
    """
    if not (b_w >= b_m >= b_b):
        raise ValueError(f"expected worst >= method >= best, got {b_w}, {b_m}, {b_b}")
    if b_w == b_b:
        return 1.0
    if abs(b_m - b_b) <= 1e-4 * abs(b_b) or abs(b_m - b_b) <= 0.01:
        return 1.0
    return (b_w - b_m) / (b_w - b_b)
