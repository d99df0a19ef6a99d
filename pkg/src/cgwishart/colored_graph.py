"""Colored graphs and the free-entry bookkeeping derived from them.

Vertices are 1-indexed in every public signature and in the JSON format.
Matrices are plain ``numpy`` arrays and therefore 0-indexed; the
``FreeEntryMap`` keeps both views.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DuplicateEdge,
    NotATree,
    OverlappingClasses,
    SelfLoop,
    UncoveredElement,
)

Pair = tuple[int, int]


def _edge(i: int, j: int) -> Pair:
    i, j = int(i), int(j)
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class ColoredGraph:
    """Undirected graph with vertex and edge color partitions.

    Build instances through :func:`validate` (or :meth:`from_parts`) so the
    partitions are checked and put in canonical order.
    """

    p: int
    edges: tuple[Pair, ...]
    vertex_classes: tuple[tuple[int, ...], ...]
    edge_classes: tuple[tuple[Pair, ...], ...]

    @classmethod
    def from_parts(
        cls,
        p: int,
        edges: Iterable[Sequence[int]],
        vertex_classes: Iterable[Iterable[int]] | None = None,
        edge_classes: Iterable[Iterable[Sequence[int]]] | None = None,
    ) -> "ColoredGraph":
        """Validated constructor; missing partitions default to singletons."""
        edges = [tuple(e) for e in edges]
        if vertex_classes is None:
            vertex_classes = [[v] for v in range(1, p + 1)]
        if edge_classes is None:
            edge_classes = [[e] for e in edges]
        raw = cls(
            p=int(p),
            edges=tuple(edges),  # type: ignore[arg-type]
            vertex_classes=tuple(tuple(c) for c in vertex_classes),
            edge_classes=tuple(tuple(tuple(e) for e in c) for c in edge_classes),  # type: ignore[misc]
        )
        return validate(raw)

    @classmethod
    def uncolored(cls, p: int, edges: Iterable[Sequence[int]]) -> "ColoredGraph":
        return cls.from_parts(p, edges)

    @classmethod
    def complete(cls, p: int) -> "ColoredGraph":
        """Uncolored complete graph on ``p`` vertices."""
        return cls.uncolored(p, [(i, j) for i in range(1, p + 1) for j in range(i + 1, p + 1)])

    def neighbors(self) -> dict[int, set[int]]:
        nb: dict[int, set[int]] = {v: set() for v in range(1, self.p + 1)}
        for i, j in self.edges:
            nb[i].add(j)
            nb[j].add(i)
        return nb

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "edges": [list(e) for e in self.edges],
            "vertex_classes": [list(c) for c in self.vertex_classes],
            "edge_classes": [[list(e) for e in c] for c in self.edge_classes],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ColoredGraph":
        return cls.from_parts(
            data["p"],
            data.get("edges", []),
            data.get("vertex_classes"),
            data.get("edge_classes"),
        )

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def from_json(cls, path: str | Path) -> "ColoredGraph":
        return cls.from_dict(json.loads(Path(path).read_text()))


def validate(graph: ColoredGraph) -> ColoredGraph:
    """Check the partitions of ``graph`` and return a canonical copy.

    Raises
    ------
    SelfLoop, DuplicateEdge
        Malformed edge list.
    OverlappingClasses, UncoveredElement
        ``vertex_classes`` or ``edge_classes`` is not a partition.
    """
    p = int(graph.p)
    if p < 1:
        raise ValueError(f"p must be positive, got {p}")

    edges: list[Pair] = []
    seen: set[Pair] = set()
    for e in graph.edges:
        i, j = int(e[0]), int(e[1])
        if i == j:
            raise SelfLoop(f"self-loop at vertex {i}")
        if not (1 <= i <= p and 1 <= j <= p):
            raise UncoveredElement(f"edge {e} references a vertex outside 1..{p}")
        key = _edge(i, j)
        if key in seen:
            raise DuplicateEdge(f"edge {key} listed twice")
        seen.add(key)
        edges.append(key)

    owner: dict[int, int] = {}
    for k, cls_ in enumerate(graph.vertex_classes):
        for v in cls_:
            v = int(v)
            if not 1 <= v <= p:
                raise UncoveredElement(f"vertex {v} outside 1..{p}")
            if v in owner:
                raise OverlappingClasses(f"vertex {v} is in more than one class")
            owner[v] = k
    missing = set(range(1, p + 1)) - owner.keys()
    if missing:
        raise UncoveredElement(f"vertices {sorted(missing)} have no class")

    edge_owner: dict[Pair, int] = {}
    for k, cls_ in enumerate(graph.edge_classes):
        for e in cls_:
            if int(e[0]) == int(e[1]):
                raise SelfLoop(f"self-loop {tuple(e)} in an edge class")
            key = _edge(*e)
            if key not in seen:
                raise UncoveredElement(f"edge class member {key} is not an edge")
            if key in edge_owner:
                raise OverlappingClasses(f"edge {key} is in more than one class")
            edge_owner[key] = k
    uncovered = seen - edge_owner.keys()
    if uncovered:
        raise UncoveredElement(f"edges {sorted(uncovered)} have no class")

    vclasses = sorted(
        (tuple(sorted(int(v) for v in c)) for c in graph.vertex_classes if len(c) > 0)
    )
    eclasses = sorted(
        (tuple(sorted(_edge(*e) for e in c)) for c in graph.edge_classes if len(c) > 0)
    )
    return ColoredGraph(
        p=p,
        edges=tuple(sorted(edges)),
        vertex_classes=tuple(vclasses),
        edge_classes=tuple(eclasses),
    )


@dataclass(frozen=True, eq=False)
class FreeEntryMap:
    """Free entries v(G) of a colored graph and the counts built on them.

    Attributes
    ----------
    p
        Dimension.
    free_set
        Class representatives, 1-indexed, in lexicographic order.
    v_counts, d_counts
        Per-row count of non-free upper entries ``(i, j), j >= i`` and
        per-column count of non-free entries ``(j, i), j <= i``.
    n_vertex_classes
        Number of vertex color classes.
    class_of
        ``p x p`` int array (0-indexed, symmetric) giving the index of the
        class in ``free_set`` that owns each position, ``-1`` for
        structural zeros.
    """

    p: int
    free_set: tuple[Pair, ...]
    v_counts: np.ndarray
    d_counts: np.ndarray
    n_vertex_classes: int
    class_of: np.ndarray = field(repr=False)
    class_sizes: np.ndarray = field(repr=False)

    def representative(self, i: int, j: int) -> Pair | None:
        """Representative of ``(i, j)`` (1-indexed), ``None`` for a structural zero."""
        if i > j:
            i, j = j, i
        c = int(self.class_of[i - 1, j - 1])
        return None if c < 0 else self.free_set[c]

    @property
    def n_free(self) -> int:
        return len(self.free_set)

    @property
    def free_rows(self) -> np.ndarray:
        return np.array([i - 1 for i, _ in self.free_set], dtype=int)

    @property
    def free_cols(self) -> np.ndarray:
        return np.array([j - 1 for _, j in self.free_set], dtype=int)

    def is_free(self, i: int, j: int) -> bool:
        return (min(i, j), max(i, j)) in self._free_lookup

    @property
    def _free_lookup(self) -> frozenset[Pair]:
        return frozenset(self.free_set)

    def multiplicity(self) -> np.ndarray:
        """Number of positions of the full symmetric matrix in each class.

        A vertex class of size ``m`` occupies ``m`` diagonal cells; an edge
        class of size ``m`` occupies ``2m`` off-diagonal cells.
        """
        return np.array(
            [n if i == j else 2 * n for (i, j), n in zip(self.free_set, self.class_sizes)],
            dtype=float,
        )


def free_entry_map(graph: ColoredGraph) -> FreeEntryMap:
    """Representatives, class lookup table and the row/column counts."""
    p = graph.p
    classes: list[list[Pair]] = [[(v, v) for v in c] for c in graph.vertex_classes]
    classes += [list(c) for c in graph.edge_classes]
    reps = [min(c) for c in classes]
    order = sorted(range(len(classes)), key=lambda k: reps[k])

    class_of = -np.ones((p, p), dtype=int)
    sizes = np.zeros(len(classes), dtype=int)
    for new_k, k in enumerate(order):
        sizes[new_k] = len(classes[k])
        for i, j in classes[k]:
            class_of[i - 1, j - 1] = new_k
            class_of[j - 1, i - 1] = new_k
    free_set = tuple(reps[k] for k in order)

    is_free = np.zeros((p, p), dtype=bool)
    for i, j in free_set:
        is_free[i - 1, j - 1] = True
    upper = np.triu(np.ones((p, p), dtype=bool))
    nonfree = upper & ~is_free
    v_counts = nonfree.sum(axis=1)
    d_counts = nonfree.sum(axis=0)
    class_of.setflags(write=False)
    v_counts.setflags(write=False)
    d_counts.setflags(write=False)
    return FreeEntryMap(
        p=p,
        free_set=free_set,
        v_counts=v_counts,
        d_counts=d_counts,
        n_vertex_classes=len(graph.vertex_classes),
        class_of=class_of,
        class_sizes=sizes,
    )


def tree_metadata(graph: ColoredGraph) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Vertex degrees and a leaf-first elimination ordering of a tree.

    Returns ``(degrees, order)`` where ``degrees[v-1]`` is the number of
    neighbours of ``v`` and ``order`` lists the vertices so that the last one
    is the root and every other vertex has exactly one neighbour later in the
    list. Leaves are removed smallest label first.
    """
    p = graph.p
    if len(graph.edges) != p - 1:
        raise NotATree(f"a tree on {p} vertices has {p - 1} edges, got {len(graph.edges)}")
    nb = graph.neighbors()
    degrees = tuple(len(nb[v]) for v in range(1, p + 1))
    if p == 1:
        return degrees, (1,)

    remaining = {v: len(nb[v]) for v in nb}
    heap = [v for v, d in remaining.items() if d == 1]
    heapq.heapify(heap)
    removed: set[int] = set()
    order: list[int] = []
    while heap and len(order) < p - 1:
        v = heapq.heappop(heap)
        if v in removed:
            continue
        removed.add(v)
        order.append(v)
        for w in nb[v]:
            if w not in removed:
                remaining[w] -= 1
                if remaining[w] == 1:
                    heapq.heappush(heap, w)
    rest = [v for v in range(1, p + 1) if v not in removed]
    if len(order) != p - 1 or len(rest) != 1:
        raise NotATree("graph is disconnected or contains a cycle")
    order.append(rest[0])
    return degrees, tuple(order)
