"""Factor-graph data model, ``.fg`` file I/O, validation, and structural queries.

A factor graph is a bipartite graph of variables (finite domains, ids dense in
``[0, N)``) and factors (nonnegative dense tables over an ordered scope of
variables). Tables use little-endian linear indexing: the first scope variable
cycles fastest, so the flat index of the joint assignment ``(x_1, ..., x_k)``
over domain sizes ``(d_1, ..., d_k)`` is ``x_1 + d_1*(x_2 + d_2*(x_3 + ...))``.

Graphs are immutable after construction and safe for concurrent shared reads.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from math import prod
from typing import Iterable, Sequence, TextIO

import numpy as np

from .errors import FgFormatError

__all__ = [
    "Variable",
    "Factor",
    "FactorGraph",
    "Violation",
    "parse_fg",
    "write_fg",
    "validate",
    "markov_blanket",
    "graphs_equal",
]


@dataclass(frozen=True)
class Variable:
    id: int
    domain_size: int


@dataclass(frozen=True, eq=False)
class Factor:
    """Nonnegative dense table over an ordered, duplicate-free variable scope."""

    id: int
    scope: tuple[int, ...]
    sizes: tuple[int, ...]
    table: np.ndarray

    def __post_init__(self):
        scope = tuple(int(v) for v in self.scope)
        sizes = tuple(int(d) for d in self.sizes)
        if not scope:
            raise ValueError("factor scope must be nonempty")
        if len(set(scope)) != len(scope):
            raise ValueError(f"factor {self.id}: duplicate variable in scope {scope}")
        if len(sizes) != len(scope):
            raise ValueError(f"factor {self.id}: scope/sizes length mismatch")
        if any(d < 2 for d in sizes):
            raise ValueError(f"factor {self.id}: domain sizes must be >= 2, got {sizes}")
        table = np.array(self.table, dtype=np.float64).ravel()
        if table.size != prod(sizes):
            raise ValueError(
                f"factor {self.id}: table length {table.size} != product of sizes {prod(sizes)}"
            )
        if table.size and table.min() < 0.0:
            raise ValueError(f"factor {self.id}: negative table entry")
        table.setflags(write=False)
        object.__setattr__(self, "scope", scope)
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "table", table)

    def table_nd(self) -> np.ndarray:
        """Table as an ndarray with one axis per scope variable, in scope order."""
        return self.table.reshape(self.sizes, order="F")


class FactorGraph:
    """Immutable bipartite graph of variables and factors.

    Variable ids must be dense and 0-based; domain sizes must agree wherever a
    variable occurs. Adjacency is built both ways at construction.
    """

    def __init__(self, factors: Sequence[Factor]):
        factors = list(factors)
        if not factors:
            raise ValueError("a factor graph needs at least one factor")
        for pos, f in enumerate(factors):
            if f.id != pos:
                raise ValueError(f"factor ids must equal list positions; got {f.id} at {pos}")
        sizes: dict[int, int] = {}
        for f in factors:
            for v, d in zip(f.scope, f.sizes):
                if sizes.setdefault(v, d) != d:
                    raise ValueError(
                        f"inconsistent domain size for variable {v}: {sizes[v]} vs {d}"
                    )
        n = max(sizes) + 1
        missing = set(range(n)) - set(sizes)
        if missing:
            raise ValueError(f"variable ids must be dense 0-based; missing {sorted(missing)}")
        self.factors: tuple[Factor, ...] = tuple(factors)
        self.variables: tuple[Variable, ...] = tuple(
            Variable(i, sizes[i]) for i in range(n)
        )
        nb: list[list[int]] = [[] for _ in range(n)]
        for f in factors:
            for v in f.scope:
                nb[v].append(f.id)
        self._var_factors: tuple[tuple[int, ...], ...] = tuple(tuple(ids) for ids in nb)

    @property
    def num_variables(self) -> int:
        return len(self.variables)

    @property
    def num_factors(self) -> int:
        return len(self.factors)

    def domain_size(self, i: int) -> int:
        return self.variables[i].domain_size

    def var_factors(self, i: int) -> tuple[int, ...]:
        """Ids of factors incident to variable ``i``, in ascending order."""
        return self._var_factors[i]

    def joint_states(self) -> int:
        return prod(v.domain_size for v in self.variables)


def markov_blanket(g: FactorGraph, i: int) -> set[int]:
    """All variables co-occurring with ``i`` in at least one factor, minus ``i``."""
    blanket: set[int] = set()
    for fid in g.var_factors(i):
        blanket.update(g.factors[fid].scope)
    blanket.discard(i)
    return blanket


@dataclass(frozen=True)
class Violation:
    """A structural or positivity defect reported by :func:`validate`."""

    kind: str  # "disconnected" | "positivity"
    factor: int | None
    variable: int | None
    assignment: tuple[int, ...] | None
    message: str


def validate(g: FactorGraph) -> list[Violation]:
    """Check connectedness and the positivity condition.

    The positivity condition requires, for every factor, every scope variable
    ``i`` and every joint assignment of the remaining scope variables, that the
    sum of the table over ``x_i`` is strictly positive. It guarantees that
    normalization never divides by zero during propagation.

    Violations are returned, not raised; an empty list means the graph passed.
    """
    out: list[Violation] = []

    seen_v = {0}
    seen_f: set[int] = set()
    queue: deque[tuple[str, int]] = deque([("v", 0)])
    while queue:
        kind, idx = queue.popleft()
        if kind == "v":
            for fid in g.var_factors(idx):
                if fid not in seen_f:
                    seen_f.add(fid)
                    queue.append(("f", fid))
        else:
            for v in g.factors[idx].scope:
                if v not in seen_v:
                    seen_v.add(v)
                    queue.append(("v", v))
    if len(seen_v) != g.num_variables or len(seen_f) != g.num_factors:
        out.append(
            Violation(
                "disconnected",
                None,
                None,
                None,
                f"graph is disconnected: reached {len(seen_v)}/{g.num_variables} variables "
                f"and {len(seen_f)}/{g.num_factors} factors from variable 0",
            )
        )

    for f in g.factors:
        nd = f.table_nd()
        for pos, v in enumerate(f.scope):
            summed = nd.sum(axis=pos)
            rest = tuple(u for u in f.scope if u != v)
            for assignment in np.argwhere(~(summed > 0.0)):
                out.append(
                    Violation(
                        "positivity",
                        f.id,
                        v,
                        tuple(int(x) for x in assignment),
                        f"factor {f.id}: sum over variable {v} is zero at "
                        f"assignment {dict(zip(rest, (int(x) for x in assignment)))}",
                    )
                )
    return out


def _content_lines(text: str) -> Iterable[tuple[int, str]]:
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        yield lineno, line


def _parse_int(token: str, lineno: int, what: str) -> int:
    try:
        return int(token)
    except ValueError:
        raise FgFormatError(lineno, f"expected integer {what}, got {token!r}") from None


def parse_fg(source: str | TextIO) -> FactorGraph:
    """Parse the ``.fg`` text format into a validated-structure FactorGraph.

    Grammar (line oriented; ``#`` starts a comment line, blank lines separate
    blocks): first line holds the number of factor blocks; each block holds the
    scope size ``k``, then ``k`` variable ids, then ``k`` aligned domain sizes,
    then the number ``m`` of listed entries, then ``m`` lines ``index value``.
    Unlisted indices default to 0.
    """
    text = source if isinstance(source, str) else source.read()
    lines = iter(_content_lines(text))
    last_line = 0

    def next_line(what: str) -> tuple[int, str]:
        nonlocal last_line
        try:
            lineno, line = next(lines)
        except StopIteration:
            raise FgFormatError(last_line, f"unexpected end of input, expected {what}") from None
        last_line = lineno
        return lineno, line

    lineno, line = next_line("factor count")
    nfactors = _parse_int(line, lineno, "factor count")
    if nfactors < 1:
        raise FgFormatError(lineno, f"factor count must be >= 1, got {nfactors}")

    sizes_seen: dict[int, tuple[int, int]] = {}  # var -> (size, declaring line)
    factors: list[Factor] = []
    for fid in range(nfactors):
        lineno, line = next_line("scope size")
        k = _parse_int(line, lineno, "scope size")
        if k < 1:
            raise FgFormatError(lineno, f"scope size must be >= 1, got {k}")

        lineno, line = next_line("variable ids")
        tokens = line.split()
        if len(tokens) != k:
            raise FgFormatError(lineno, f"expected {k} variable ids, got {len(tokens)}")
        scope = tuple(_parse_int(t, lineno, "variable id") for t in tokens)
        if any(v < 0 for v in scope):
            raise FgFormatError(lineno, "variable ids must be nonnegative")
        if len(set(scope)) != k:
            raise FgFormatError(lineno, f"duplicate variable in scope {scope}")

        lineno, line = next_line("domain sizes")
        tokens = line.split()
        if len(tokens) != k:
            raise FgFormatError(lineno, f"expected {k} domain sizes, got {len(tokens)}")
        sizes = tuple(_parse_int(t, lineno, "domain size") for t in tokens)
        if any(d < 2 for d in sizes):
            raise FgFormatError(lineno, f"domain sizes must be >= 2, got {sizes}")
        for v, d in zip(scope, sizes):
            prev = sizes_seen.setdefault(v, (d, lineno))
            if prev[0] != d:
                raise FgFormatError(
                    lineno,
                    f"inconsistent domain size for variable {v}: "
                    f"{d} here vs {prev[0]} on line {prev[1]}",
                )

        lineno, line = next_line("entry count")
        m = _parse_int(line, lineno, "entry count")
        if m < 0:
            raise FgFormatError(lineno, f"entry count must be >= 0, got {m}")
        table = np.zeros(prod(sizes), dtype=np.float64)
        for _ in range(m):
            lineno, line = next_line("table entry")
            tokens = line.split()
            if len(tokens) != 2:
                raise FgFormatError(lineno, f"expected 'index value', got {line!r}")
            idx = _parse_int(tokens[0], lineno, "table index")
            if not 0 <= idx < table.size:
                raise FgFormatError(
                    lineno, f"table index {idx} out of range [0, {table.size})"
                )
            try:
                value = float(tokens[1])
            except ValueError:
                raise FgFormatError(lineno, f"bad table value {tokens[1]!r}") from None
            if not np.isfinite(value):
                raise FgFormatError(lineno, f"table value must be finite, got {value}")
            if value < 0.0:
                raise FgFormatError(lineno, f"table value must be nonnegative, got {value}")
            table[idx] = value
        factors.append(Factor(fid, scope, sizes, table))

    try:
        return FactorGraph(factors)
    except ValueError as exc:
        raise FgFormatError(last_line, str(exc)) from None


def write_fg(g: FactorGraph) -> str:
    """Serialize to the ``.fg`` format, listing every entry including zeros.

    Values are written as shortest round-tripping decimal literals, so
    ``parse_fg(write_fg(g))`` reproduces the tables exactly.
    """
    out: list[str] = [str(g.num_factors)]
    for f in g.factors:
        out.append("")
        out.append(str(len(f.scope)))
        out.append(" ".join(str(v) for v in f.scope))
        out.append(" ".join(str(d) for d in f.sizes))
        out.append(str(f.table.size))
        out.extend(f"{i} {float(x)!r}" for i, x in enumerate(f.table))
    out.append("")
    return "\n".join(out) + "\n"


def graphs_equal(a: FactorGraph, b: FactorGraph) -> bool:
    """Entry-for-entry equality of two graphs (exact table comparison)."""
    if a.num_variables != b.num_variables or a.num_factors != b.num_factors:
        return False
    if any(x.domain_size != y.domain_size for x, y in zip(a.variables, b.variables)):
        return False
    for fa, fb in zip(a.factors, b.factors):
        if fa.scope != fb.scope or fa.sizes != fb.sizes:
            return False
        if not np.array_equal(fa.table, fb.table):
            return False
    return True
