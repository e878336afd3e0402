"""Shared fixtures and brute-force reference implementations."""

from typing import List, Sequence, Tuple
import numpy as np
import pytest
from scipy.stats import multivariate_t
from stmmreg.geometry import PerturbationSpec, PointSet, RigidTransform, perturb, sample_perturbation


def pytest_addoption(parser) -> None:
    parser.addoption("--runslow", action="store_true", default=False, help="run slow benchmarks")


def pytest_collection_modifyitems(config, items) -> None:
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


def quaternion_matrix(q: Sequence[float]) -> np.ndarray:
    """Rotation matrix of a (w, x, y, z) quaternion, normalised first."""
    w, x, y, z = np.asarray(q, dtype=float) / np.linalg.norm(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def brute_nearest(points: np.ndarray, query: np.ndarray) -> Tuple[int, float]:
    """Smallest index among the points closest to `query`, and the squared distance."""
    best_index, best_d2 = -1, np.inf
    for index, point in enumerate(points):
        d2 = float(sum((point[k] - query[k]) ** 2 for k in range(3)))
        if d2 < best_d2:
            best_index, best_d2 = index, d2
    return best_index, best_d2


def brute_kabsch(sources: np.ndarray, targets: np.ndarray, weights: np.ndarray) -> RigidTransform:
    """Weighted Procrustes written out with explicit sums."""
    total = sum(weights)
    src_mean = sum(w * s for w, s in zip(weights, sources)) / total
    tgt_mean = sum(w * t for w, t in zip(weights, targets)) / total
    cross = np.zeros((3, 3))
    for w, s, t in zip(weights, sources, targets):
        cross += w * np.outer(s - src_mean, t - tgt_mean)
    left, _, right_t = np.linalg.svd(cross)
    sign = np.sign(np.linalg.det(right_t.T @ left.T))
    rotation = right_t.T @ np.diag([1.0, 1.0, sign]) @ left.T
    return RigidTransform(rotation, tgt_mean - rotation @ src_mean)


def brute_sweep(
    sets: Sequence[PointSet],
    transforms: Sequence[RigidTransform],
    sigma2: float,
    dof: float,
    anchor: int = 0,
) -> Tuple[List[RigidTransform], float]:
    """One EM sweep computed point by point, every view moved, then put back in the anchor's frame."""
    n_views = len(sets)
    moved = [t.apply(s.points) for s, t in zip(sets, transforms)]
    shape = sigma2 * np.eye(3)
    table = []  # per view: list of (l, j, c, P, U)
    for i in range(n_views):
        rows = []
        for l, x in enumerate(moved[i]):
            entries = []
            for j in range(n_views):
                if j == i:
                    continue
                c, r2 = brute_nearest(moved[j], x)
                log_f = multivariate_t.logpdf(x, loc=moved[j][c], shape=shape, df=dof)
                entries.append([l, j, c, log_f, (dof + 3.0) / (dof + r2 / sigma2)])
            top = max(e[3] for e in entries)
            norm = sum(np.exp(e[3] - top) for e in entries)
            for e in entries:
                rows.append((e[0], e[1], e[2], np.exp(e[3] - top) / norm, e[4]))
        table.append(rows)
    updated = list(transforms)
    for i in range(n_views):
        sources = [sets[i].points[l] for l, _, _, _, _ in table[i]]
        targets = [updated[j].apply(sets[j].points[c]) for _, j, c, _, _ in table[i]]
        weights = [p * u for _, _, _, p, u in table[i]]
        updated[i] = brute_kabsch(np.array(sources), np.array(targets), np.array(weights))
    numerator, denominator = 0.0, 0.0
    for i in range(n_views):
        for l, j, c, p, u in table[i]:
            diff = updated[i].apply(sets[i].points[l]) - updated[j].apply(sets[j].points[c])
            numerator += p * u * float(diff @ diff)
            denominator += p
    gauge = transforms[anchor].as_matrix() @ np.linalg.inv(updated[anchor].as_matrix())
    regauged = [RigidTransform.from_matrix(gauge @ t.as_matrix()) for t in updated]
    return regauged, numerator / (3.0 * denominator)


def perturbed_start(
    ground_truth: Sequence[RigidTransform],
    spec: PerturbationSpec,
    rng: np.random.Generator,
    resolution: float,
    anchor: int = 0,
) -> List[RigidTransform]:
    """Ground truth disturbed at every view but the anchor."""
    return [
        truth if k == anchor else perturb(truth, sample_perturbation(spec, rng, resolution))
        for k, truth in enumerate(ground_truth)
    ]


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240601)


@pytest.fixture
def cloud(rng) -> np.ndarray:
    """120 points on a wavy patch, well spread in three dimensions."""
    xy = rng.uniform(-1.0, 1.0, size=(120, 2))
    return np.column_stack([xy, 0.3 * np.sin(3 * xy[:, 0]) * np.cos(2 * xy[:, 1])])
