"""Pixel-lattice connectivity and (pixel, label) score fields.

A grid graph is the sparsity skeleton everything else is built on: pixels
are lattice sites, edges come from a fixed neighbourhood stencil, and each
pixel carries one score per candidate label.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

# Canonical half-stencils: each undirected lattice edge is generated exactly
# once by offsetting every pixel by (dr, dc).
_STENCIL_OFFSETS = {
    4: ((0, 1), (1, 0)),
    8: ((0, 1), (1, 0), (1, 1), (1, -1)),
    12: ((0, 1), (1, 0), (1, 1), (1, -1), (0, 2), (2, 0)),
}

STENCILS = tuple(sorted(_STENCIL_OFFSETS))


@dataclass(frozen=True)
class GridGraph:
    """An H x W pixel lattice with L candidate labels per pixel.

    ``stencil`` selects the neighbourhood: 4 = axial neighbours,
    8 = axial + diagonal, 12 = 8 plus the distance-2 axial neighbours.
    Border pixels simply have fewer neighbours; there is no padding or
    wraparound.
    """

    height: int
    width: int
    labels: int = 1
    stencil: int = 4

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise ValueError(f"grid must be at least 1x1, got {self.height}x{self.width}")
        if self.labels < 1:
            raise ValueError(f"label count must be >= 1, got {self.labels}")
        if self.stencil not in _STENCIL_OFFSETS:
            raise ValueError(f"stencil must be one of {STENCILS}, got {self.stencil}")

    @property
    def pixels(self) -> int:
        return self.height * self.width

    @property
    def size(self) -> int:
        """Total number of (pixel, label) variables."""
        return self.pixels * self.labels

    def edges(self) -> np.ndarray:
        """Undirected lattice edges as an (E, 2) array with p < q per row."""
        return grid_edges(self.height, self.width, self.stencil)

    def pixel_index(self, row: int, col: int) -> int:
        return row * self.width + col

    def variable_index(self, pixel: int, label: int) -> int:
        """Flat index of a (pixel, label) pair; labels are contiguous per pixel."""
        return pixel * self.labels + label


@lru_cache(maxsize=64)
def grid_edges(height: int, width: int, stencil: int) -> np.ndarray:
    """Enumerate the undirected edge set of an H x W lattice.

    Returns an (E, 2) int array sorted lexicographically, each edge stored
    once with the smaller pixel index first.  Pixels are numbered row-major.
    """
    if stencil not in _STENCIL_OFFSETS:
        raise ValueError(f"stencil must be one of {STENCILS}, got {stencil}")
    rows, cols = np.mgrid[0:height, 0:width]
    chunks = []
    for dr, dc in _STENCIL_OFFSETS[stencil]:
        r2, c2 = rows + dr, cols + dc
        ok = (r2 < height) & (c2 >= 0) & (c2 < width)
        p = (rows[ok] * width + cols[ok]).ravel()
        q = (r2[ok] * width + c2[ok]).ravel()
        chunks.append(np.stack([p, q], axis=1))
    edges = np.concatenate(chunks, axis=0) if chunks else np.empty((0, 2), dtype=np.int64)
    edges = edges.astype(np.int64, copy=False)
    # every generated offset points strictly forward in row-major order
    order = np.lexsort((edges[:, 1], edges[:, 0]))
    edges = edges[order]
    edges.setflags(write=False)
    return edges


@dataclass(frozen=True)
class ScoreField:
    """A real score per (pixel, label), stored flat with labels contiguous.

    ``data[p * L + l]`` is the score of pixel ``p`` for the l-th label
    (0-based slot; user-facing class ids are 1-based).  Fields are treated
    as immutable once constructed.
    """

    graph: GridGraph
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.shape != (self.graph.size,):
            raise ValueError(
                f"score field needs shape ({self.graph.size},), got {data.shape}"
            )
        if not np.all(np.isfinite(data)):
            raise ValueError("score field entries must be finite")
        object.__setattr__(self, "data", data)

    @classmethod
    def zeros(cls, graph: GridGraph) -> "ScoreField":
        return cls(graph, np.zeros(graph.size))

    @classmethod
    def from_class_major(cls, graph: GridGraph, planes: np.ndarray) -> "ScoreField":
        """Build from an (L, P) array of per-class score planes."""
        planes = np.asarray(planes, dtype=np.float64)
        if planes.shape != (graph.labels, graph.pixels):
            raise ValueError(
                f"expected ({graph.labels}, {graph.pixels}) planes, got {planes.shape}"
            )
        return cls(graph, planes.T.reshape(-1).copy())

    def per_pixel(self) -> np.ndarray:
        """View the scores as a (P, L) array."""
        return self.data.reshape(self.graph.pixels, self.graph.labels)

    def class_major(self) -> np.ndarray:
        """Copy the scores into an (L, P) array, one plane per class."""
        return self.per_pixel().T.copy()
