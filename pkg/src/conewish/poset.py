"""Finite posets: Hasse form, condition (F), sources, separators and dimensions.

Elements are stored as strings and mapped to dense indices through a fixed
linear extension (topological order, ties broken by natural label order).
Every matrix in the package is laid out in that order, so ``j <= i`` in the
poset implies ``index(j) <= index(i)`` and lower-triangular structured
matrices are lower triangular as plain arrays.
"""

from __future__ import annotations

import hashlib
import heapq
import json
import re
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np


class PosetError(ValueError):
    pass


class CycleError(PosetError):
    """Cover edges whose closure is not antisymmetric."""


class UnknownLabel(PosetError, KeyError):
    pass


class ConditionFError(PosetError):
    """Raised where an operation needs unique Hasse paths."""

    def __init__(self, violation: "FViolation"):
        self.violation = violation
        super().__init__(str(violation))


def _natural_key(label: str):
    return tuple((0, int(t), "") if t.isdigit() else (1, 0, t)
                 for t in re.split(r"(\d+)", label) if t)


@dataclass(frozen=True)
class FViolation:
    """Two distinct Hasse paths between a comparable pair ``low < high``."""

    low: str
    high: str
    path_a: tuple[str, ...]
    path_b: tuple[str, ...]

    @property
    def branches(self) -> tuple[str, str]:
        # first elements after ``low`` on each path; these are two covers of
        # ``low`` and therefore incomparable
        return self.path_a[1], self.path_b[1]

    def __str__(self) -> str:
        return (f"condition (F) fails between {self.low} and {self.high}: "
                f"{' < '.join(self.path_a)} and {' < '.join(self.path_b)}")


@dataclass(frozen=True)
class PosetDims:
    n_i_dot: dict[str, int]     # strict predecessors
    n_dot_i: dict[str, int]     # strict successors
    n_i: dict[str, float]
    n_dotdot: float

    def as_rows(self, order: Sequence[str]) -> list[tuple]:
        return [(i, self.n_i_dot[i], self.n_dot_i[i], self.n_i[i]) for i in order]


@dataclass(frozen=True)
class Separators:
    per_element: dict[str, frozenset[str]]   # S_i
    union: frozenset[str]                    # the union of all S_i
    minimal: frozenset[str]                  # S


class Poset:
    """Immutable finite poset given by its cover relation.

    Use :meth:`from_cover_edges` to build one; redundant (transitively
    implied) edges are removed.
    """

    def __init__(self, labels: Sequence[str], leq: np.ndarray):
        self._labels = tuple(labels)
        self._index = {lab: k for k, lab in enumerate(self._labels)}
        leq = np.array(leq, dtype=bool)
        leq.setflags(write=False)
        self._leq = leq

    # ------------------------------------------------------------------
    # construction

    @classmethod
    def from_cover_edges(cls, labels: Iterable, edges: Iterable[tuple]) -> "Poset":
        labels = [str(x) for x in labels]
        if len(set(labels)) != len(labels):
            raise PosetError("element labels must be unique")
        known = set(labels)
        pairs = []
        for a, b in edges:
            a, b = str(a), str(b)
            for x in (a, b):
                if x not in known:
                    raise UnknownLabel(x)
            if a == b:
                raise CycleError(f"self-loop at {a}")
            pairs.append((a, b))

        order = _linear_extension(labels, pairs)
        pos = {lab: k for k, lab in enumerate(order)}
        n = len(order)
        lt = np.zeros((n, n), dtype=bool)
        for a, b in pairs:
            lt[pos[a], pos[b]] = True
        # Warshall closure; n is desk scale
        for k in range(n):
            lt |= np.outer(lt[:, k], lt[k, :])
        return cls(order, lt | np.eye(n, dtype=bool))

    @classmethod
    def chain(cls, n: int) -> "Poset":
        return cls.from_cover_edges(range(1, n + 1), [(i, i + 1) for i in range(1, n)])

    @classmethod
    def antichain(cls, n: int) -> "Poset":
        return cls.from_cover_edges(range(1, n + 1), [])

    @classmethod
    def star(cls, k: int) -> "Poset":
        return cls.from_cover_edges(range(1, k + 1), [(1, i) for i in range(2, k + 1)])

    # ------------------------------------------------------------------
    # basic structure

    @property
    def labels(self) -> tuple[str, ...]:
        return self._labels

    def __len__(self) -> int:
        return len(self._labels)

    def __iter__(self):
        return iter(self._labels)

    def __contains__(self, label) -> bool:
        return str(label) in self._index

    def index(self, label) -> int:
        try:
            return self._index[str(label)]
        except KeyError:
            raise UnknownLabel(str(label)) from None

    @property
    def leq(self) -> np.ndarray:
        """Boolean matrix, ``leq[a, b]`` iff element a <= element b."""
        return self._leq

    @cached_property
    def lt(self) -> np.ndarray:
        m = self._leq & ~np.eye(len(self), dtype=bool)
        m.setflags(write=False)
        return m

    @cached_property
    def mask(self) -> np.ndarray:
        """Structural support of the algebra: i == j or i, j comparable."""
        m = self._leq | self._leq.T
        m.setflags(write=False)
        return m

    @cached_property
    def lower_mask(self) -> np.ndarray:
        """Support of lower-triangular elements: entry (i, j) with j <= i."""
        m = self._leq.T.copy()
        m.setflags(write=False)
        return m

    @cached_property
    def cover_matrix(self) -> np.ndarray:
        lt = self.lt
        between = (lt.astype(np.int64) @ lt.astype(np.int64)) > 0
        m = lt & ~between
        m.setflags(write=False)
        return m

    @cached_property
    def covers(self) -> frozenset[tuple[str, str]]:
        a, b = np.nonzero(self.cover_matrix)
        return frozenset((self._labels[x], self._labels[y]) for x, y in zip(a, b))

    def sorted_covers(self) -> list[tuple[str, str]]:
        a, b = np.nonzero(self.cover_matrix)
        return [(self._labels[x], self._labels[y]) for x, y in zip(a, b)]

    def is_leq(self, a, b) -> bool:
        return bool(self._leq[self.index(a), self.index(b)])

    def is_lt(self, a, b) -> bool:
        return bool(self.lt[self.index(a), self.index(b)])

    def comparable(self, a, b) -> bool:
        return bool(self.mask[self.index(a), self.index(b)])

    def children(self, label) -> list[str]:
        row = self.cover_matrix[self.index(label)]
        return [self._labels[k] for k in np.flatnonzero(row)]

    def parents(self, label) -> list[str]:
        col = self.cover_matrix[:, self.index(label)]
        return [self._labels[k] for k in np.flatnonzero(col)]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Poset):
            return NotImplemented
        return set(self._labels) == set(other._labels) and self.covers == other.covers

    def __hash__(self) -> int:
        return hash((frozenset(self._labels), self.covers))

    def __repr__(self) -> str:
        edges = ", ".join(f"{a}<{b}" for a, b in self.sorted_covers())
        return f"Poset([{', '.join(self._labels)}]; {edges})"

    def content_hash(self) -> str:
        """Stable digest of labels and covers, used in run manifests."""
        payload = json.dumps({"labels": sorted(self._labels, key=_natural_key),
                              "covers": sorted(self.covers)}, sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def to_dict(self) -> dict:
        return {"labels": list(self._labels), "covers": [list(c) for c in self.sorted_covers()]}

    # ------------------------------------------------------------------
    # order-theoretic queries

    def _labels_of(self, flags) -> frozenset[str]:
        return frozenset(self._labels[k] for k in np.flatnonzero(flags))

    def down_set(self, label) -> frozenset[str]:
        return self._labels_of(self._leq[:, self.index(label)])

    def up_set(self, label) -> frozenset[str]:
        return self._labels_of(self._leq[self.index(label)])

    def strict_down_set(self, label) -> frozenset[str]:
        return self._labels_of(self.lt[:, self.index(label)])

    def minimal_elements(self) -> frozenset[str]:
        return self._labels_of(~self.lt.any(axis=0))

    def maximal_elements(self) -> frozenset[str]:
        return self._labels_of(~self.lt.any(axis=1))

    def sources(self) -> frozenset[str]:
        """Elements with in-degree 0 in the Hasse diagram and at least two children."""
        cov = self.cover_matrix
        return self._labels_of((cov.sum(axis=0) == 0) & (cov.sum(axis=1) >= 2))

    def branch_points(self) -> frozenset[str]:
        """Elements with at least two children, whatever their in-degree."""
        return self._labels_of(self.cover_matrix.sum(axis=1) >= 2)

    def subposet(self, elements: Iterable) -> "Poset":
        keep = sorted({self.index(e) for e in elements})
        sub = self._leq[np.ix_(keep, keep)]
        return Poset([self._labels[k] for k in keep], sub)

    def opposite(self) -> "Poset":
        return Poset.from_cover_edges(self._labels, [(b, a) for a, b in self.covers])

    # ------------------------------------------------------------------
    # condition (F)

    def check_condition_F(self) -> FViolation | None:
        """Return ``None`` when every comparable pair has a unique Hasse path."""
        n = len(self)
        cov = self.cover_matrix
        for lo in range(n):
            # number of Hasse paths from ``lo`` to each element, plus one path
            # to it; indices are a linear extension so one sweep suffices
            count = np.zeros(n, dtype=np.int64)
            pred = [None] * n
            count[lo] = 1
            for v in range(lo + 1, n):
                for u in np.flatnonzero(cov[:, v]):
                    if count[u] == 0:
                        continue
                    if count[v] > 0:
                        path_a = self._path(pred, lo, v)
                        path_b = self._path(pred, lo, u) + (self._labels[v],)
                        return _first_divergence(path_a, path_b)
                    count[v] += count[u]
                    pred[v] = u
        return None

    def _path(self, pred, lo, v) -> tuple[str, ...]:
        out = [v]
        while out[-1] != lo:
            out.append(pred[out[-1]])
        return tuple(self._labels[k] for k in reversed(out))

    def satisfies_condition_F(self) -> bool:
        return self.check_condition_F() is None

    def require_condition_F(self) -> None:
        v = self._f_violation
        if v is not None:
            raise ConditionFError(v)

    @cached_property
    def _f_violation(self) -> FViolation | None:
        return self.check_condition_F()

    # ------------------------------------------------------------------
    # separators and dimensions

    def separators(self) -> Separators:
        n = len(self)
        leq = self._leq
        is_sep = np.zeros(n, dtype=bool)
        for a in range(n):
            for b in range(a + 1, n):
                if self.mask[a, b]:
                    continue
                common = leq[a] & leq[b]
                common[[a, b]] = False
                is_sep |= common

        def minimal_among(flags):
            idx = np.flatnonzero(flags)
            return frozenset(self._labels[j] for j in idx
                             if not (self.lt[idx, j]).any())

        per = {self._labels[i]: minimal_among(leq[i] & is_sep) for i in range(n)}
        union = frozenset().union(*per.values()) if per else frozenset()
        flags = np.array([lab in union for lab in self._labels], dtype=bool)
        return Separators(per, union, minimal_among(flags))

    def dims(self) -> PosetDims:
        lt = self.lt
        n_i_dot = {lab: int(lt[:, k].sum()) for k, lab in enumerate(self._labels)}
        n_dot_i = {lab: int(lt[k].sum()) for k, lab in enumerate(self._labels)}
        n_i = {lab: 1 + 0.5 * (n_i_dot[lab] + n_dot_i[lab]) for lab in self._labels}
        return PosetDims(n_i_dot, n_dot_i, n_i, float(sum(n_i.values())))

    @cached_property
    def n_pred(self) -> np.ndarray:
        """Strict-predecessor counts in index order (the n_{i.})."""
        return self.lt.sum(axis=0).astype(float)

    @cached_property
    def n_half(self) -> np.ndarray:
        """The n_i in index order."""
        return 1 + 0.5 * (self.lt.sum(axis=0) + self.lt.sum(axis=1))


def _linear_extension(labels: list[str], pairs: list[tuple[str, str]]) -> list[str]:
    succ: dict[str, set[str]] = {x: set() for x in labels}
    indeg = {x: 0 for x in labels}
    for a, b in pairs:
        if b not in succ[a]:
            succ[a].add(b)
            indeg[b] += 1
    heap = [(_natural_key(x), x) for x in labels if indeg[x] == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        _, x = heapq.heappop(heap)
        order.append(x)
        for y in succ[x]:
            indeg[y] -= 1
            if indeg[y] == 0:
                heapq.heappush(heap, (_natural_key(y), y))
    if len(order) != len(labels):
        stuck = sorted((x for x in labels if indeg[x] > 0), key=_natural_key)
        raise CycleError(f"cover edges contain a cycle through {', '.join(stuck)}")
    return order


def _first_divergence(path_a, path_b) -> FViolation:
    # trim the common prefix and common suffix so the witness is the
    # smallest diamond: low < k < ... < high and low < s < ... < high
    start = 0
    while path_a[start + 1] == path_b[start + 1]:
        start += 1
    a, b = path_a[start:], path_b[start:]
    common_b = set(b[1:])
    end = next(k for k in range(1, len(a)) if a[k] in common_b)
    high = a[end]
    return FViolation(a[0], high, a[:end + 1], b[:b.index(high) + 1])


# ----------------------------------------------------------------------
# text / JSON formats

def parse_poset(text: str) -> Poset:
    """Parse either the JSON form or the line form (``i < j`` per line, ``#`` comments).

    In the line form a line holding a single token declares an isolated element.
    """
    stripped = text.strip()
    if stripped.startswith("{"):
        try:
            obj = json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise PosetParseError(exc.lineno, exc.msg) from None
        if "labels" not in obj or "covers" not in obj:
            raise PosetParseError(1, "JSON poset needs 'labels' and 'covers'")
        return Poset.from_cover_edges(obj["labels"], [tuple(c) for c in obj["covers"]])

    labels: list[str] = []
    edges = []

    def see(x):
        if x not in labels:
            labels.append(x)

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "<" in line:
            parts = [p.strip() for p in line.split("<")]
            if len(parts) != 2 or not all(parts) or any(" " in p for p in parts):
                raise PosetParseError(lineno, f"expected 'i < j', got {raw.strip()!r}")
            see(parts[0])
            see(parts[1])
            edges.append((parts[0], parts[1]))
        elif len(line.split()) == 1:
            see(line)
        else:
            raise PosetParseError(lineno, f"expected 'i < j', got {raw.strip()!r}")
    if not labels:
        raise PosetParseError(0, "empty poset")
    return Poset.from_cover_edges(labels, edges)


class PosetParseError(PosetError):
    def __init__(self, lineno: int, msg: str):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {msg}")


def format_poset(p: Poset) -> str:
    lines = [f"{a} < {b}" for a, b in p.sorted_covers()]
    touched = {x for c in p.covers for x in c}
    lines += [lab for lab in p.labels if lab not in touched]
    return "\n".join(lines) + "\n"


# two small worked examples
def n_poset() -> Poset:
    """1 < 3 > 2 < 4; element 2 is a source."""
    return Poset.from_cover_edges([1, 2, 3, 4], [(1, 3), (2, 3), (2, 4)])


def decomposition_example() -> Poset:
    return Poset.from_cover_edges([1, 2, 3, 4], [(1, 3), (1, 4), (2, 4)])
