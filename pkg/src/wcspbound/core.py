"""WCSP structure, weight vectors and the per-scope bound.

Weights are plain ``float64`` numpy arrays indexed by dense tuple index;
hard constraints are ``-inf``.  Crisp CSP instances are boolean arrays of
the same length.  Variables are numbered from 0.
"""
from __future__ import annotations

import itertools
from typing import Iterable, Iterator, Sequence

import numpy as np

#: absolute tolerance used by every activity test
ACTIVE_TOL = 1e-9

#: default cap on |D|^|V| for exhaustive enumeration
DEFAULT_SCALE_CAP = 2 ** 22

NEG_INF = -np.inf


class OracleScaleError(RuntimeError):
    """Raised when exhaustive enumeration would exceed the configured cap."""


class WcspStructure:
    """Fixed (domains, variables, scopes) triple with a dense tuple table.

    Scope blocks are laid out in declaration order.  Inside a block the
    value tuples are in lexicographic order, first variable most significant,
    so ``(S, k)`` with ``S = (0, 1)`` and ``D = {0, 1}`` is laid out as
    ``(0,0), (0,1), (1,0), (1,1)``.
    """

    def __init__(self, domain_sizes: Sequence[int], scopes: Iterable[Iterable[int]]):
        self.domain_sizes = tuple(int(d) for d in domain_sizes)
        if not self.domain_sizes:
            raise ValueError("structure needs at least one variable")
        if any(d < 1 for d in self.domain_sizes):
            raise ValueError("domain sizes must be positive")
        n = len(self.domain_sizes)

        normalized = []
        for scope in scopes:
            s = tuple(sorted(int(v) for v in scope))
            if not s:
                raise ValueError("the empty scope is not allowed")
            if len(set(s)) != len(s):
                raise ValueError(f"scope {s} repeats a variable")
            if s[0] < 0 or s[-1] >= n:
                raise ValueError(f"scope {s} references an unknown variable")
            normalized.append(s)
        if len(set(normalized)) != len(normalized):
            raise ValueError("scopes must be distinct")
        self.scopes: tuple[tuple[int, ...], ...] = tuple(normalized)

        sizes = [int(np.prod([self.domain_sizes[v] for v in s])) for s in self.scopes]
        self.block_sizes = tuple(sizes)
        self.offsets = tuple(int(o) for o in np.concatenate([[0], np.cumsum(sizes)]))
        self.n_tuples = self.offsets[-1]
        # mixed-radix strides inside each block
        self._strides = []
        for s in self.scopes:
            strides = [1] * len(s)
            for pos in range(len(s) - 2, -1, -1):
                strides[pos] = strides[pos + 1] * self.domain_sizes[s[pos + 1]]
            self._strides.append(tuple(strides))
        # per block: (block_size, arity) array of the value tuples
        self.block_values = [
            np.array(list(itertools.product(*(range(self.domain_sizes[v]) for v in sc))), dtype=np.int64)
            for sc in self.scopes
        ]

        self.scope_index = {s: i for i, s in enumerate(self.scopes)}
        self.tuple_scope = np.repeat(np.arange(len(self.scopes)), sizes)
        self._assign_idx: np.ndarray | None = None

    # -- tuple table -------------------------------------------------------

    @property
    def variable_count(self) -> int:
        return len(self.domain_sizes)

    @property
    def n_scopes(self) -> int:
        return len(self.scopes)

    def block(self, s: int) -> slice:
        return slice(self.offsets[s], self.offsets[s + 1])

    def tuple_index(self, scope: Sequence[int] | int, values: Sequence[int]) -> int:
        """Dense index of the structured tuple ``(scope, values)``."""
        s = scope if isinstance(scope, (int, np.integer)) else self.scope_index[tuple(sorted(scope))]
        values = tuple(values)
        strides = self._strides[s]
        if len(values) != len(strides):
            raise ValueError("value tuple does not match scope arity")
        idx = self.offsets[s]
        for v, val, st in zip(self.scopes[s], values, strides):
            if not 0 <= val < self.domain_sizes[v]:
                raise ValueError(f"value {val} out of range for variable {v}")
            idx += val * st
        return idx

    def tuple_of(self, t: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
        """Inverse of :meth:`tuple_index`: ``(scope, values)``."""
        s = int(self.tuple_scope[t])
        rem = t - self.offsets[s]
        values = []
        for st in self._strides[s]:
            q, rem = divmod(rem, st)
            values.append(q)
        return self.scopes[s], tuple(values)

    def tuple_values(self, t: int) -> tuple[int, ...]:
        return self.tuple_of(t)[1]

    def unary_index(self, var: int) -> int | None:
        """Scope index of ``{var}`` or None when the unary scope is absent."""
        return self.scope_index.get((var,))

    def has_all_unary(self) -> bool:
        return all((v,) in self.scope_index for v in range(self.variable_count))

    def is_binary(self) -> bool:
        return all(len(s) <= 2 for s in self.scopes)

    def describe(self, t: int) -> str:
        scope, values = self.tuple_of(t)
        sc = "{" + ",".join(str(v) for v in scope) + "}"
        return f"({sc},{values[0] if len(values) == 1 else values})"

    # -- assignments -------------------------------------------------------

    def assignment_count(self) -> int:
        return int(np.prod(self.domain_sizes, dtype=object))

    def assignments(self, cap: int = DEFAULT_SCALE_CAP) -> Iterator[tuple[int, ...]]:
        """All assignments in lexicographic order (variable 0 most significant)."""
        self._guard(cap)
        return itertools.product(*(range(d) for d in self.domain_sizes))

    def _guard(self, cap: int) -> None:
        if self.assignment_count() > cap:
            raise OracleScaleError(
                f"oracle scale exceeded: {self.assignment_count()} assignments > cap {cap}"
            )

    def assignment_matrix(self, cap: int = DEFAULT_SCALE_CAP) -> np.ndarray:
        """``(n_assignments, n_scopes)`` array of the tuple used in each scope."""
        self._guard(cap)
        if self._assign_idx is None:
            grid = np.array(list(self.assignments(cap)), dtype=np.int64).reshape(
                -1, self.variable_count
            )
            cols = []
            for s, scope in enumerate(self.scopes):
                col = np.full(len(grid), self.offsets[s], dtype=np.int64)
                for v, st in zip(scope, self._strides[s]):
                    col += grid[:, v] * st
                cols.append(col)
            self._assign_idx = np.stack(cols, axis=1)
        return self._assign_idx

    def restrict(self, x: Sequence[int], scope: Sequence[int]) -> tuple[int, ...]:
        return tuple(x[v] for v in sorted(scope))

    def used_tuples(self, x: Sequence[int]) -> list[int]:
        """Dense index of the tuple used by ``x`` in each scope, in scope order."""
        self.check_assignment(x)
        return [self.tuple_index(s, self.restrict(x, scope)) for s, scope in enumerate(self.scopes)]

    def check_assignment(self, x: Sequence[int]) -> None:
        if len(x) != self.variable_count:
            raise ValueError("assignment length differs from the variable count")
        for v, val in enumerate(x):
            if not 0 <= val < self.domain_sizes[v]:
                raise ValueError(f"value {val} out of range for variable {v}")

    def indicator(self, x: Sequence[int]) -> np.ndarray:
        phi = np.zeros(self.n_tuples, dtype=np.int8)
        phi[self.used_tuples(x)] = 1
        return phi

    # -- weights -----------------------------------------------------------

    def zeros(self) -> np.ndarray:
        return np.zeros(self.n_tuples)

    def weights(self, values: Iterable[float]) -> np.ndarray:
        f = np.asarray(list(values), dtype=float)
        if f.shape != (self.n_tuples,):
            raise ValueError(f"expected {self.n_tuples} weights, got {f.shape}")
        if np.isnan(f).any() or np.isposinf(f).any():
            raise ValueError("weights must be finite or -inf")
        return f

    def evaluate(self, f: np.ndarray, x: Sequence[int]) -> float:
        """Objective of assignment ``x``; ``-inf`` entries propagate."""
        return float(sum(f[t] for t in self.used_tuples(x)))

    def evaluate_all(self, f, cap: int = DEFAULT_SCALE_CAP) -> np.ndarray:
        """Objective of every assignment, in :meth:`assignments` order.

        ``f`` may be a dense array or a sparse ``{index: value}`` mapping.
        """
        if isinstance(f, dict):
            f = self.dense(f)
        return f[self.assignment_matrix(cap)].sum(axis=1)

    def dense(self, d: dict) -> np.ndarray:
        out = np.zeros(self.n_tuples)
        for t, v in d.items():
            out[t] = v
        return out

    def scope_maxima(self, f: np.ndarray) -> np.ndarray:
        return np.maximum.reduceat(f, self.offsets[:-1])

    def upper_bound(self, f: np.ndarray) -> float:
        """Sum over scopes of the largest weight in the scope."""
        return float(self.scope_maxima(f).sum())

    def gaps(self, f: np.ndarray) -> np.ndarray:
        """Per-tuple distance below its scope maximum (``inf`` for ``-inf`` weights)."""
        maxima = self.scope_maxima(f)[self.tuple_scope]
        with np.errstate(invalid="ignore"):
            return maxima - f

    def active_set(self, f: np.ndarray) -> np.ndarray:
        return self.theta_active_set(f, 0.0)

    def theta_active_set(self, f: np.ndarray, theta: float) -> np.ndarray:
        """Tuples within ``theta`` of their scope maximum (never ``-inf`` ones)."""
        if theta < 0:
            raise ValueError("theta must be non-negative")
        return (self.gaps(f) <= max(theta, ACTIVE_TOL)) & np.isfinite(f)

    # -- helpers -----------------------------------------------------------

    def block_of_var(self, var: int, value: int, s: int) -> list[int]:
        """Indices of tuples ``(S, l)`` in scope ``s`` with ``l[var] == value``."""
        pos = self.scopes[s].index(var)
        hits = np.nonzero(self.block_values[s][:, pos] == value)[0]
        return [self.offsets[s] + int(h) for h in hits]

    def with_unary_scopes(self, f: np.ndarray | None = None):
        """Structure with a unary scope added for every variable that lacks one.

        Added scopes carry zero weights, so objectives and the bound are unchanged.
        Returns ``(structure, f_embedded)`` (``f_embedded`` is None when ``f`` is).
        """
        missing = [(v,) for v in range(self.variable_count) if (v,) not in self.scope_index]
        if not missing:
            return self, (None if f is None else np.array(f, dtype=float))
        new = WcspStructure(self.domain_sizes, list(self.scopes) + missing)
        if f is None:
            return new, None
        g = new.zeros()
        g[: self.n_tuples] = f
        return new, g

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, WcspStructure)
            and self.domain_sizes == other.domain_sizes
            and self.scopes == other.scopes
        )

    def __hash__(self) -> int:
        return hash((self.domain_sizes, self.scopes))

    def __repr__(self) -> str:
        return f"WcspStructure(domain_sizes={self.domain_sizes}, scopes={self.scopes})"
