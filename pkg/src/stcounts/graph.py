"""Neighborhood graphs and the structure matrices of the random-effect blocks.

An area map enters the engine as an undirected adjacency graph over opaque
area identifiers.  Every structured prior is represented by its structure
matrix: the intrinsic CAR matrix D - W of the graph, the first-order
random-walk matrix over time, identities for exchangeable blocks, and
Kronecker products of these for interactions.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ValidationError

# kronecker() refuses to build matrices above this dimension unless the
# caller raises the cap explicitly.
DEFAULT_KRONECKER_CAP = 200_000


@dataclass(frozen=True)
class AdjacencyGraph:
    """Symmetric neighborhood structure over an ordered list of areas.

    The order of ``areas`` is the canonical area order used by every
    downstream module.  ``neighbors[i]`` holds the sorted indices of the
    areas adjacent to area ``i``; isolated areas have an empty tuple.
    """

    areas: tuple[str, ...]
    neighbors: tuple[tuple[int, ...], ...]

    @property
    def n_areas(self) -> int:
        return len(self.areas)

    @property
    def n_edges(self) -> int:
        return sum(len(nb) for nb in self.neighbors) // 2

    def degree(self) -> np.ndarray:
        return np.array([len(nb) for nb in self.neighbors], dtype=np.int64)

    def index_of(self, area_id: str) -> int:
        try:
            return self.areas.index(area_id)
        except ValueError:
            raise ValidationError(f"unknown area id {area_id!r}") from None


@dataclass(frozen=True)
class StructureMatrix:
    """Sparse symmetric PSD structure matrix of one random-effect block.

    ``rank_deficiency`` is the dimension of the null space: the number of
    connected components for an intrinsic CAR matrix, 1 for a random walk,
    0 for an identity structure.
    """

    dimension: int
    entries: sp.csc_matrix
    rank_deficiency: int

    def dense(self) -> np.ndarray:
        return self.entries.toarray()

    @property
    def rank(self) -> int:
        return self.dimension - self.rank_deficiency


def load_adjacency(edges: Iterable[tuple[str, str]],
                   areas: Sequence[str]) -> AdjacencyGraph:
    """Build a symmetric, deduplicated graph from a directed edge list.

    Every id in ``edges`` must appear in ``areas``; self-loops are rejected.
    Isolated areas (no edges) are permitted.
    """
    areas = tuple(str(a) for a in areas)
    if len(set(areas)) != len(areas):
        dupes = sorted({a for a in areas if list(areas).count(a) > 1})
        raise ValidationError(f"duplicate area ids: {dupes}")
    index = {a: i for i, a in enumerate(areas)}

    neighbor_sets: list[set[int]] = [set() for _ in areas]
    for a, b in edges:
        a, b = str(a), str(b)
        if a not in index:
            raise ValidationError(f"edge references unknown area id {a!r}")
        if b not in index:
            raise ValidationError(f"edge references unknown area id {b!r}")
        if a == b:
            raise ValidationError(f"self-loop on area {a!r}")
        i, j = index[a], index[b]
        neighbor_sets[i].add(j)
        neighbor_sets[j].add(i)

    return AdjacencyGraph(
        areas=areas,
        neighbors=tuple(tuple(sorted(s)) for s in neighbor_sets),
    )


def connected_components(g: AdjacencyGraph) -> tuple[tuple[int, ...], ...]:
    """Partition area indices into connected components (BFS)."""
    seen = [False] * g.n_areas
    components: list[tuple[int, ...]] = []
    for start in range(g.n_areas):
        if seen[start]:
            continue
        queue = deque([start])
        seen[start] = True
        comp = []
        while queue:
            i = queue.popleft()
            comp.append(i)
            for j in g.neighbors[i]:
                if not seen[j]:
                    seen[j] = True
                    queue.append(j)
        components.append(tuple(sorted(comp)))
    return tuple(components)


def icar_structure(g: AdjacencyGraph) -> StructureMatrix:
    """Intrinsic CAR structure D - W of the neighborhood graph.

    Row sums are exactly zero; the rank deficiency equals the number of
    connected components (isolated areas contribute zero rows).
    """
    n = g.n_areas
    rows, cols, vals = [], [], []
    for i, nb in enumerate(g.neighbors):
        if nb:
            rows.append(i)
            cols.append(i)
            vals.append(float(len(nb)))
        for j in nb:
            rows.append(i)
            cols.append(j)
            vals.append(-1.0)
    entries = sp.csc_matrix((vals, (rows, cols)), shape=(n, n))
    return StructureMatrix(
        dimension=n,
        entries=entries,
        rank_deficiency=len(connected_components(g)),
    )


def rw1_structure(T: int) -> StructureMatrix:
    """First-order random-walk structure over ``T`` ordered time points.

    Tridiagonal with zero row sums and rank deficiency 1 (the constant
    vector).  A one-point walk is degenerate and rejected.
    """
    if T < 2:
        raise ValidationError(f"random walk needs at least 2 time points, got {T}")
    main = np.full(T, 2.0)
    main[0] = main[-1] = 1.0
    off = np.full(T - 1, -1.0)
    entries = sp.diags([off, main, off], offsets=[-1, 0, 1], format="csc")
    return StructureMatrix(dimension=T, entries=entries, rank_deficiency=1)


def identity_structure(size: int) -> StructureMatrix:
    """Identity structure of an exchangeable (iid) block."""
    if size < 1:
        raise ValidationError(f"block size must be positive, got {size}")
    return StructureMatrix(
        dimension=size,
        entries=sp.identity(size, format="csc"),
        rank_deficiency=0,
    )


def kronecker(a: StructureMatrix, b: StructureMatrix,
              max_dimension: int = DEFAULT_KRONECKER_CAP) -> StructureMatrix:
    """Kronecker product of two structure matrices.

    The first factor varies slowest: entry ((i,k),(j,l)) = a[i,j] * b[k,l],
    so with ``a`` the spatial and ``b`` the temporal factor the result is
    laid out area-major, matching the interaction block.
    """
    dim = a.dimension * b.dimension
    if dim > max_dimension:
        raise ValidationError(
            f"kronecker product dimension {dim} exceeds the cap {max_dimension}"
        )
    entries = sp.kron(a.entries, b.entries, format="csc")
    rank = a.rank * b.rank
    return StructureMatrix(dimension=dim, entries=entries,
                           rank_deficiency=dim - rank)


def lattice_graph(rows: int, cols: int, prefix: str = "A") -> AdjacencyGraph:
    """Rook-contiguity lattice graph, handy for demos and simulations."""
    if rows < 1 or cols < 1:
        raise ValidationError("lattice dimensions must be positive")
    width = len(str(rows * cols))
    ids = [f"{prefix}{k + 1:0{width}d}" for k in range(rows * cols)]
    edges = []
    for r in range(rows):
        for c in range(cols):
            k = r * cols + c
            if c + 1 < cols:
                edges.append((ids[k], ids[k + 1]))
            if r + 1 < rows:
                edges.append((ids[k], ids[k + cols]))
    return load_adjacency(edges, ids)
