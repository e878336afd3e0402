"""Exact nearest-neighbour search over one view with a balanced k-d tree.

The tree is `scipy.spatial.cKDTree` built with median splits on the widest
axis (`balanced_tree=True`). Queries are exact; ties in distance are broken
by the smallest point index so registration runs are reproducible.

Example::
    >>> import itertools
    >>> import numpy as np
    >>> from stmmreg.spatial import KdIndex
    >>> corners = np.array(list(itertools.product([0.0, 1.0], repeat=3)))
    >>> index = KdIndex(corners)
    >>> index.nearest([0.75, 0.25, 0.0])
    (4, 0.125)
    >>> index.nearest([0.5, 0.5, 0.5])  # equidistant from all eight corners
    (0, 0.75)
"""

from typing import Optional, Tuple, Union
import logging
import numpy as np
from scipy.spatial import cKDTree
from .geometry import PointSet

logger = logging.getLogger(__name__)

# candidates fetched per query before checking for distance ties.
TIE_CANDIDATES: int = 4


class EmptyPointSetError(ValueError):
    """A k-d index needs at least one point."""


def _tree_depth(root) -> int:
    """Number of node levels below and including `root`."""
    depth = 0
    stack = [(root, 1)]
    while stack:
        node, level = stack.pop()
        depth = max(depth, level)
        for child in (node.lesser, node.greater):
            if child is not None:
                stack.append((child, level + 1))
    return depth


class KdIndex:
    """
    Immutable 3-d k-d tree over the points of one view.

    Concurrent queries are safe; the tree is never modified after
    construction.
    """

    def __init__(
        self,
        points: Union[np.ndarray, PointSet],
        source_view: Optional[int] = None,
        leafsize: int = 16,
    ) -> None:
        """
        Build the index.

        Args:
            points (Union[np.ndarray, PointSet]): (N, 3) coordinates or a view.
            source_view (Optional[int], optional): view id recorded for
                debugging. Defaults to the PointSet's id when one is given.
            leafsize (int, optional): points per leaf. Defaults to 16.

        Raises:
            EmptyPointSetError: if there are no points.
        """
        if isinstance(points, PointSet):
            source_view = points.view_id if source_view is None else source_view
            points = points.points
        points = np.array(points, dtype=float)
        if points.size == 0:
            raise EmptyPointSetError(f"Cannot index an empty point set (view {source_view}).")
        assert points.ndim == 2 and points.shape[1] == 3
        points.setflags(write=False)
        self._points = points
        self.source_view = source_view
        self._tree = cKDTree(points, leafsize=leafsize, balanced_tree=True, compact_nodes=False)
        logger.debug("Indexed %d points of view %s.", points.shape[0], source_view)

    def __len__(self) -> int:
        return self._points.shape[0]

    def __repr__(self) -> str:
        return f"KdIndex(source_view={self.source_view}, n={len(self)})"

    @property
    def points(self) -> np.ndarray:
        """Indexed coordinates, (N, 3), read only."""
        return self._points

    @property
    def indices(self) -> np.ndarray:
        """Permutation of point indices stored in the tree's leaves."""
        return self._tree.indices

    @property
    def depth(self) -> int:
        """Number of node levels, root included."""
        return _tree_depth(self._tree.tree)

    def nearest_many(self, queries: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Exact nearest neighbour of each query.

        Args:
            queries (np.ndarray): (Q, 3) query points.

        Returns:
            Tuple[np.ndarray, np.ndarray]: (Q,) point indices and (Q,) squared
                distances. Ties go to the smallest index.
        """
        queries = np.atleast_2d(np.asarray(queries, dtype=float))
        assert queries.shape[1] == 3
        n_points = len(self)
        k = min(TIE_CANDIDATES, n_points)
        _, candidates = self._tree.query(queries, k=k)
        candidates = candidates.reshape(queries.shape[0], k)
        cand_d2 = np.sum((self._points[candidates] - queries[:, None, :]) ** 2, axis=2)
        best = cand_d2.min(axis=1)
        index = np.where(cand_d2 == best[:, None], candidates, n_points).min(axis=1)
        if k < n_points:
            # every candidate tied: more equidistant points may exist outside them.
            unsure = np.flatnonzero(cand_d2[:, -1] <= best * (1.0 + 1e-12))
            for row in unsure:
                dist2 = np.sum((self._points - queries[row]) ** 2, axis=1)
                index[row] = int(np.argmin(dist2))
                best[row] = dist2[index[row]]
        return index, best

    def nearest(self, query: np.ndarray) -> Tuple[int, float]:
        """
        Exact nearest neighbour of one query point.

        Args:
            query (np.ndarray): (3,) point.

        Returns:
            Tuple[int, float]: point index and squared distance.
        """
        index, dist2 = self.nearest_many(np.asarray(query, dtype=float)[None, :])
        return int(index[0]), float(dist2[0])


def build_index(point_set: Union[PointSet, np.ndarray]) -> KdIndex:
    """
    Build a k-d index over a view.

    Args:
        point_set (Union[PointSet, np.ndarray]): view to index.

    Raises:
        EmptyPointSetError: for an empty set.

    Returns:
        KdIndex: exact nearest-neighbour index.
    """
    return KdIndex(point_set)


def nearest(index: KdIndex, query: np.ndarray) -> Tuple[int, float]:
    """Nearest indexed point to `query`: (point index, squared distance)."""
    return index.nearest(query)


def point_resolution(points: np.ndarray) -> float:
    """
    Mean distance from each point to the nearest other point of the same set.

    Args:
        points (np.ndarray): (N, 3) coordinates, N >= 2.

    Raises:
        ValueError: with fewer than two points.

    Returns:
        float: point resolution d_r.

    Example::
        >>> import numpy as np
        >>> from stmmreg.spatial import point_resolution
        >>> point_resolution(np.array([[0.0, 0, 0], [1, 0, 0], [2, 0, 0]]))
        1.0
    """
    points = np.asarray(points, dtype=float)
    if points.shape[0] < 2:
        raise ValueError("Point resolution needs at least two points.")
    distances, _ = cKDTree(points).query(points, k=2)
    return float(np.mean(distances[:, 1]))
