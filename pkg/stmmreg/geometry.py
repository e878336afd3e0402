"""Rigid transforms, point sets and registration error metrics.

Rotations are stored as 3x3 matrices and translations as 3-vectors. All
values in this module are immutable, so every function here can be called
from any number of threads.

Example of moving a point and measuring the error of an estimate::

    >>> import numpy as np
    >>> from stmmreg.geometry import RigidTransform, rotation_error
    >>> quarter = RigidTransform.from_axis_angle([0, 0, 1], np.pi / 2)
    >>> np.round(quarter.apply([1.0, 0.0, 0.0]), 12) + 0.0
    array([0., 1., 0.])
    >>> float(np.round(rotation_error([quarter], [RigidTransform.identity()]), 12))
    1.570796326795
"""

from typing import Optional, Sequence, Union
from dataclasses import dataclass, field
from functools import cached_property
import numpy as np
import scipy.linalg
from scipy.spatial.transform import Rotation

# coordinates of a single point, shape (3,).
Point3 = np.ndarray
ArrayLike = Union[Sequence[float], np.ndarray]

ROTATION_ATOL: float = 1e-9  # per entry, for R^T R = I and det R = 1.


class InvalidTransformError(ValueError):
    """The matrix is not a proper rotation (orthonormal with det +1)."""


class InconsistentExperimentError(ValueError):
    """Estimated and ground-truth transform lists do not line up."""


def _frozen(array: ArrayLike, shape: tuple, name: str) -> np.ndarray:
    out = np.array(array, dtype=float)
    if out.shape != shape:
        raise InvalidTransformError(f"{name} must have shape {shape}, got {out.shape}.")
    if not np.all(np.isfinite(out)):
        raise InvalidTransformError(f"{name} contains non-finite values.")
    out.setflags(write=False)
    return out


def orthogonality_drift(rotation: np.ndarray) -> float:
    """
    Largest absolute entry of R^T R - I.

    Args:
        rotation (np.ndarray): 3x3 matrix.

    Returns:
        float: drift from orthonormality.
    """
    return float(np.max(np.abs(rotation.T @ rotation - np.eye(3))))


def orthonormalize(matrix: ArrayLike) -> np.ndarray:
    """
    Project a near-rotation onto SO(3) with the polar decomposition.

    Args:
        matrix (ArrayLike): 3x3 matrix close to a rotation.

    Raises:
        InvalidTransformError: if the orthogonal factor is a reflection.

    Returns:
        np.ndarray: the closest orthonormal matrix (Frobenius norm).

    Example::
        >>> import numpy as np
        >>> from stmmreg.geometry import orthonormalize
        >>> rot = orthonormalize(np.eye(3) * 1.001)
        >>> bool(np.allclose(rot, np.eye(3)))
        True
    """
    unitary, _ = scipy.linalg.polar(np.asarray(matrix, dtype=float))
    if np.linalg.det(unitary) < 0:
        raise InvalidTransformError("Matrix is a reflection (det = -1).")
    return unitary


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """
    Rotation followed by translation, x -> R x + t.

    Args:
        rotation (ArrayLike): 3x3 rotation matrix.
        translation (ArrayLike): 3-vector, scene length units.
    """

    rotation: np.ndarray
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self) -> None:
        rotation = _frozen(self.rotation, (3, 3), "rotation")
        translation = _frozen(self.translation, (3,), "translation")
        if orthogonality_drift(rotation) > ROTATION_ATOL:
            raise InvalidTransformError("rotation is not orthonormal.")
        if abs(np.linalg.det(rotation) - 1.0) > ROTATION_ATOL:
            raise InvalidTransformError("rotation must have determinant +1.")
        object.__setattr__(self, "rotation", rotation)
        object.__setattr__(self, "translation", translation)

    def __repr__(self) -> str:
        return (
            f"RigidTransform(angle={self.angle():.6g} rad, "
            f"translation={np.array2string(self.translation, precision=6)})"
        )

    @classmethod
    def identity(cls) -> "RigidTransform":
        """The transform that leaves every point in place."""
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_axis_angle(
        cls, axis: ArrayLike, angle: float, translation: Optional[ArrayLike] = None
    ) -> "RigidTransform":
        """
        Build a transform rotating by `angle` radians about `axis`.

        Args:
            axis (ArrayLike): rotation axis, need not be normalised.
            angle (float): right-handed rotation angle in radians.
            translation (Optional[ArrayLike], optional): Defaults to zero.

        Returns:
            RigidTransform: the transform.
        """
        axis = np.asarray(axis, dtype=float)
        rotvec = axis / np.linalg.norm(axis) * angle
        if translation is None:
            translation = np.zeros(3)
        return cls(Rotation.from_rotvec(rotvec).as_matrix(), translation)

    @classmethod
    def from_matrix(cls, matrix: ArrayLike) -> "RigidTransform":
        """Build from a 4x4 homogeneous matrix."""
        matrix = np.asarray(matrix, dtype=float)
        assert matrix.shape == (4, 4)
        return cls(matrix[:3, :3], matrix[:3, 3])

    def as_matrix(self) -> np.ndarray:
        """4x4 homogeneous matrix."""
        out = np.eye(4)
        out[:3, :3] = self.rotation
        out[:3, 3] = self.translation
        return out

    def apply(self, points: ArrayLike) -> np.ndarray:
        """
        Apply to one point of shape (3,) or an (N, 3) array of points.

        Args:
            points (ArrayLike): points to move.

        Returns:
            np.ndarray: moved points, same shape as the input.
        """
        return np.asarray(points, dtype=float) @ self.rotation.T + self.translation

    def inverse(self) -> "RigidTransform":
        """The transform undoing this one."""
        rot_t = self.rotation.T
        return RigidTransform(rot_t, -rot_t @ self.translation)

    def angle(self) -> float:
        """Rotation angle in radians, in [0, pi]."""
        return rotation_angle(self.rotation)


def rotation_angle(rotation: np.ndarray) -> float:
    """
    Angle of a rotation matrix from its trace.

    The arccos argument is clamped to [-1, 1], so near-identity matrices
    whose trace rounds above 3 give 0 rather than NaN.

    Args:
        rotation (np.ndarray): 3x3 rotation.

    Returns:
        float: angle in radians.

    Example::
        >>> import numpy as np
        >>> from stmmreg.geometry import rotation_angle
        >>> rotation_angle(np.eye(3) * (1 + 1e-15))
        0.0
    """
    cosine = (np.trace(rotation) - 1.0) / 2.0
    return float(np.arccos(np.clip(cosine, -1.0, 1.0)))


def apply_transform(transform: RigidTransform, point: ArrayLike) -> Point3:
    """
    Return R p + t.

    Example::
        >>> from stmmreg.geometry import RigidTransform, apply_transform
        >>> apply_transform(RigidTransform.identity(), [1, 2, 3])
        array([1., 2., 3.])
    """
    return transform.apply(point)


def compose(outer: RigidTransform, inner: RigidTransform) -> RigidTransform:
    """
    Transform equivalent to applying `inner` first and then `outer`.

    Re-orthonormalises the rotation when a long composition chain has drifted
    by more than 1e-9 per entry.

    Args:
        outer (RigidTransform): applied second.
        inner (RigidTransform): applied first.

    Returns:
        RigidTransform: outer o inner.
    """
    rotation = outer.rotation @ inner.rotation
    if orthogonality_drift(rotation) > ROTATION_ATOL:
        rotation = orthonormalize(rotation)
    translation = outer.rotation @ inner.translation + outer.translation
    return RigidTransform(rotation, translation)


def perturb(transform: RigidTransform, delta: RigidTransform) -> RigidTransform:
    """
    Disturb a transform: R0 = dR R and t0 = dt + t.

    The translation is added, not rotated, which is why this is not
    `compose(delta, transform)`.

    Args:
        transform (RigidTransform): transform to disturb (usually ground truth).
        delta (RigidTransform): disturbance, see `sample_perturbation`.

    Returns:
        RigidTransform: disturbed transform.
    """
    rotation = delta.rotation @ transform.rotation
    if orthogonality_drift(rotation) > ROTATION_ATOL:
        rotation = orthonormalize(rotation)
    return RigidTransform(rotation, delta.translation + transform.translation)


def _check_lengths(
    estimated: Sequence[RigidTransform], ground_truth: Sequence[RigidTransform]
) -> None:
    if len(estimated) != len(ground_truth):
        raise InconsistentExperimentError(
            f"{len(estimated)} estimated transforms but {len(ground_truth)} ground truths."
        )
    if len(estimated) == 0:
        raise InconsistentExperimentError("Need at least one transform to compare.")


def rotation_error(
    estimated: Sequence[RigidTransform], ground_truth: Sequence[RigidTransform]
) -> float:
    """
    Mean angle between estimated and ground-truth rotations, e_R.

    Args:
        estimated (Sequence[RigidTransform]): estimated transforms.
        ground_truth (Sequence[RigidTransform]): reference transforms.

    Raises:
        InconsistentExperimentError: if the lists differ in length or are empty.

    Returns:
        float: e_R in radians.
    """
    _check_lengths(estimated, ground_truth)
    angles = [
        rotation_angle(est.rotation @ ref.rotation.T)
        for est, ref in zip(estimated, ground_truth)
    ]
    return float(np.mean(angles))


def translation_error(
    estimated: Sequence[RigidTransform], ground_truth: Sequence[RigidTransform]
) -> float:
    """
    Mean Euclidean distance between translations, e_t.

    Example::
        >>> from stmmreg.geometry import RigidTransform, translation_error
        >>> ref = RigidTransform.identity()
        >>> est = RigidTransform(ref.rotation, [3.0, 4.0, 0.0])
        >>> translation_error([est], [ref])
        5.0
    """
    _check_lengths(estimated, ground_truth)
    norms = [
        np.linalg.norm(est.translation - ref.translation)
        for est, ref in zip(estimated, ground_truth)
    ]
    return float(np.mean(norms))


@dataclass(frozen=True)
class PerturbationSpec:
    """
    Uniform disturbance of a rigid transform.

    Args:
        rotation_interval (float): half-width a of each Euler angle interval
            [-a, a], radians.
        translation_interval (float): half-width b of each translation
            component interval [-b d_r, b d_r], in multiples of d_r.
        seed (int, optional): seed used when no generator is passed. Defaults to 0.
    """

    rotation_interval: float
    translation_interval: float
    seed: int = 0

    def __post_init__(self) -> None:
        if self.rotation_interval < 0 or self.translation_interval < 0:
            raise ValueError("Perturbation half-widths must be non-negative.")


def sample_perturbation(
    spec: PerturbationSpec,
    rng: Optional[np.random.Generator] = None,
    resolution: float = 1.0,
) -> RigidTransform:
    """
    Draw a disturbance (dR, dt).

    Three intrinsic XYZ Euler angles are drawn from U[-a, a] and three
    translation components from U[-b d_r, b d_r].

    Args:
        spec (PerturbationSpec): interval half-widths.
        rng (Optional[np.random.Generator], optional): generator to draw from.
            Defaults to a fresh generator seeded with `spec.seed`.
        resolution (float, optional): point resolution d_r. Defaults to 1.0.

    Returns:
        RigidTransform: the disturbance.

    Example::
        >>> from stmmreg.geometry import PerturbationSpec, sample_perturbation
        >>> delta = sample_perturbation(PerturbationSpec(0.0, 0.0))
        >>> delta.angle(), float(abs(delta.translation).max())
        (0.0, 0.0)
    """
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    half_a = spec.rotation_interval
    half_b = spec.translation_interval * resolution
    angles = rng.uniform(-half_a, half_a, size=3)
    translation = rng.uniform(-half_b, half_b, size=3)
    rotation = Rotation.from_euler("XYZ", angles).as_matrix()
    return RigidTransform(rotation, translation)


def random_rigid(
    rng: np.random.Generator, max_angle: float = np.pi, max_translation: float = 1.0
) -> RigidTransform:
    """
    Random transform: uniform axis, angle in [0, max_angle], translation in a cube.

    Args:
        rng (np.random.Generator): generator.
        max_angle (float, optional): Defaults to pi.
        max_translation (float, optional): cube half-width. Defaults to 1.0.

    Returns:
        RigidTransform: random transform.
    """
    axis = rng.normal(size=3)
    angle = rng.uniform(0.0, max_angle)
    translation = rng.uniform(-max_translation, max_translation, size=3)
    return RigidTransform.from_axis_angle(axis, angle, translation)


@dataclass(frozen=True, eq=False)
class PointSet:
    """
    One view: an ordered (N, 3) array of points.

    Point order is stable; correspondence indices refer to it.

    Args:
        view_id (int): view index i, 1-based.
        points (np.ndarray): (N, 3) coordinates, N >= 1, all finite.
        name (str, optional): source path or label. Defaults to "".

    Example::
        >>> from stmmreg.geometry import PointSet
        >>> view = PointSet(1, [[0, 0, 0], [1, 0, 0], [2, 0, 0], [4, 0, 0]])
        >>> len(view), view.resolution
        (4, 1.25)
    """

    view_id: int
    points: np.ndarray
    name: str = ""

    def __post_init__(self) -> None:
        points = np.array(self.points, dtype=float)
        if points.ndim != 2 or points.shape[1] != 3:
            raise ValueError(f"points must have shape (N, 3), got {points.shape}.")
        if points.shape[0] == 0:
            raise ValueError(f"view {self.view_id} has no points.")
        if not np.all(np.isfinite(points)):
            raise ValueError(f"view {self.view_id} has non-finite coordinates.")
        points.setflags(write=False)
        object.__setattr__(self, "points", points)

    def __len__(self) -> int:
        return self.points.shape[0]

    def __repr__(self) -> str:
        return f"PointSet(view_id={self.view_id}, n={len(self)}, name={self.name!r})"

    @cached_property
    def resolution(self) -> float:
        """Mean distance from each point to its nearest other point (d_r)."""
        # pylint: disable=import-outside-toplevel
        from .spatial import point_resolution

        return point_resolution(self.points)

    def transformed(self, transform: RigidTransform) -> "PointSet":
        """Copy of the view moved by `transform`."""
        return PointSet(self.view_id, transform.apply(self.points), self.name)

    def subset(self, indices: np.ndarray) -> "PointSet":
        """Copy keeping only `indices`, in the order given."""
        return PointSet(self.view_id, self.points[np.asarray(indices)], self.name)
