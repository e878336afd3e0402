"""EM registration engine.

Each sweep runs, for every view i in ascending order, the E-step
(nearest-neighbour centroids in the other views, posteriors P, expected
scales U and robust weights P* = P U) and the M-step (weighted SVD
alignment of view i onto its centroids). It then updates the shared
variance sigma^2 and evaluates the expected complete-data log-likelihood Q.
The loop stops when (1/M) |Q_k - Q_(k-1)| < tolerance or after
`max_iterations` sweeps.

Every view, the anchor included, is moved by the M-step. After each sweep
all transforms are re-expressed relative to the anchor so that it is back at
its initial transform; residuals, sigma^2 and Q do not change under this
common motion, which relative alignment cannot determine.

Views are addressed by their position in the input list (0-based) inside
this module; error messages and `DegenerateGeometryError.view` use the
1-based `PointSet.view_id`.

Example of registering two copies of one cloud::

    >>> import numpy as np
    >>> from stmmreg.geometry import PointSet, rotation_error
    >>> from stmmreg.solver import register
    >>> cloud = np.random.default_rng(0).normal(size=(50, 3))
    >>> report = register([PointSet(1, cloud), PointSet(2, cloud)])
    >>> report.termination, report.iterations
    ('converged', 2)
"""

from typing import Callable, List, Optional, Sequence, Tuple, Union
import dataclasses
from dataclasses import dataclass, field
from concurrent.futures import ThreadPoolExecutor
from enum import Enum
import logging
import numpy as np
import pandas as pd
from scipy.special import gammaln
from .geometry import PointSet, RigidTransform, compose
from .spatial import KdIndex
from .stmm import (
    DIM,
    MixtureParams,
    expected_u,
    gaussian_log_pdf_delta2,
    normalize_log_weights,
    robust_posterior,
    t_log_pdf_delta2,
)
from .time import Stopwatch, hr_time

logger = logging.getLogger(__name__)

CONVERGED: str = "converged"
MAX_ITERATIONS: str = "max-iterations"


class Mode(str, Enum):
    """Component distribution of the mixture."""

    STUDENT_T = "student-t"
    GAUSSIAN = "gaussian"


class DegenerateGeometryError(ValueError):
    """The weighted point pairs do not determine a rotation."""

    def __init__(self, message: str, view: Optional[int] = None) -> None:
        super().__init__(message)
        self.view = view


class RegistrationInputError(ValueError):
    """Inputs that cannot be registered (too few views, bad initial parameters)."""


@dataclass(frozen=True)
class RegistrationConfig:
    """
    Settings of one registration run.

    Args:
        dof (float, optional): degrees of freedom v. Defaults to 3.
        max_iterations (int, optional): maximum number of sweeps K. Defaults to 300.
        tolerance (float, optional): threshold on (1/M)|dQ|. Defaults to 0.0005.
        mode (Mode, optional): "student-t" or "gaussian" (U fixed to 1).
            Defaults to "student-t".
        anchor_view (int, optional): 1-based position of the view whose
            initial transform fixes the common frame. Defaults to 1.
        rebuild_per_view (bool, optional): rebuild the k-d indices and redo the
            E-step before every view's M-step instead of once per sweep.
            Defaults to False.
        symmetric_sigma (bool, optional): use d * sum(P*) instead of
            d * sum(P) as the variance denominator. Defaults to False.
        sigma_floor (float, optional): lower bound on sigma^2 in units of
            d_r^2. Defaults to 1e-12.
        threads (int, optional): worker threads for the E-step. Defaults to 1.
    """

    dof: float = 3.0
    max_iterations: int = 300
    tolerance: float = 5e-4
    mode: Mode = Mode.STUDENT_T
    anchor_view: int = 1
    rebuild_per_view: bool = False
    symmetric_sigma: bool = False
    sigma_floor: float = 1e-12
    threads: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", Mode(self.mode))
        if not (np.isfinite(self.dof) and self.dof > 0):
            raise ValueError(f"dof must be finite and positive, got {self.dof}.")
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise ValueError(f"max_iterations must be an integer >= 1, got {self.max_iterations}.")
        if not self.tolerance > 0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance}.")
        if self.anchor_view < 1:
            raise ValueError(f"anchor_view is 1-based, got {self.anchor_view}.")
        if not self.sigma_floor > 0:
            raise ValueError(f"sigma_floor must be positive, got {self.sigma_floor}.")
        if self.threads < 1:
            raise ValueError(f"threads must be >= 1, got {self.threads}.")

    @property
    def gaussian(self) -> bool:
        """Whether the components are Gaussian (U = 1)."""
        return self.mode is Mode.GAUSSIAN

    def replace(self, **changes) -> "RegistrationConfig":
        """Copy with some fields changed."""
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict:
        """Plain dictionary, ready for logs and JSON."""
        out = dataclasses.asdict(self)
        out["mode"] = self.mode.value
        return out


@dataclass(frozen=True)
class ModelParams:
    """
    Parameters Theta: one rigid transform per view plus the shared sigma^2.

    Args:
        transforms (Sequence[RigidTransform]): M transforms.
        sigma2 (Optional[float]): shared variance; None means "initialise
            from the point resolution".
    """

    transforms: Tuple[RigidTransform, ...]
    sigma2: Optional[float] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "transforms", tuple(self.transforms))
        if self.sigma2 is not None and not (np.isfinite(self.sigma2) and self.sigma2 > 0):
            raise RegistrationInputError(f"sigma2 must be positive, got {self.sigma2}.")

    def replace(self, **changes) -> "ModelParams":
        """Copy with some fields changed."""
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class ViewPosterior:
    """E-step quantities for the points of one view, columns = other views."""

    others: np.ndarray  # (M - 1,) positions of the other views
    correspondence: np.ndarray  # (N_i, M - 1) nearest point index c(j, l)
    residual2: np.ndarray  # squared Euclidean residual
    delta2: np.ndarray  # squared Mahalanobis distance
    posterior: np.ndarray  # P
    scale: np.ndarray  # U
    robust: np.ndarray  # P* = P U


@dataclass(frozen=True)
class EStepResult:
    """
    E-step output for every view.

    For every view position i the arrays have shape (N_i, M - 1); column c
    refers to the view at position `others[i][c]`. Each row of
    `posterior[i]` sums to one.
    """

    views: Tuple[ViewPosterior, ...]
    sigma2: float

    def __len__(self) -> int:
        return len(self.views)

    @property
    def others(self) -> List[np.ndarray]:
        return [view.others for view in self.views]

    @property
    def correspondence(self) -> List[np.ndarray]:
        return [view.correspondence for view in self.views]

    @property
    def residual2(self) -> List[np.ndarray]:
        return [view.residual2 for view in self.views]

    @property
    def delta2(self) -> List[np.ndarray]:
        return [view.delta2 for view in self.views]

    @property
    def posterior(self) -> List[np.ndarray]:
        return [view.posterior for view in self.views]

    @property
    def scale(self) -> List[np.ndarray]:
        return [view.scale for view in self.views]

    @property
    def robust(self) -> List[np.ndarray]:
        return [view.robust for view in self.views]


@dataclass(frozen=True)
class RegistrationReport:
    """
    Result of `register`.

    Args:
        transforms (Tuple[RigidTransform, ...]): final transforms, one per view.
        sigma2 (float): final shared variance.
        iterations (int): number of sweeps run.
        q_trajectory (Tuple[float, ...]): Q after each sweep.
        termination (str): "converged" or "max-iterations".
        initial_sigma2 (float): variance the run started from.
        resolution (float): average point resolution d_r of the input views.
        config (RegistrationConfig): settings used.
        seconds (float): wall time.
    """

    transforms: Tuple[RigidTransform, ...]
    sigma2: float
    iterations: int
    q_trajectory: Tuple[float, ...]
    termination: str
    initial_sigma2: float
    resolution: float
    config: RegistrationConfig = field(default_factory=RegistrationConfig)
    seconds: float = 0.0

    @property
    def converged(self) -> bool:
        return self.termination == CONVERGED

    def trace(self) -> pd.DataFrame:
        """Q trajectory with columns `iteration,q` (iterations count from 1)."""
        return pd.DataFrame(
            {"iteration": np.arange(1, len(self.q_trajectory) + 1), "q": self.q_trajectory}
        )

    def q_relative(self) -> np.ndarray:
        """Q trajectory minus its first value, for convergence plots."""
        q = np.asarray(self.q_trajectory, dtype=float)
        return q - q[0]


def average_resolution(sets: Sequence[PointSet]) -> float:
    """
    Mean over views of each view's point resolution.

    Raises:
        RegistrationInputError: if a view has fewer than two points.
    """
    resolutions = []
    for point_set in sets:
        if len(point_set) < 2:
            raise RegistrationInputError(
                f"view {point_set.view_id} needs at least two points to measure its resolution."
            )
        resolutions.append(point_set.resolution)
    return float(np.mean(resolutions))


def initialize_sigma(sets: Sequence[PointSet]) -> float:
    """
    Initial variance d_r^2 from the average point resolution.

    Args:
        sets (Sequence[PointSet]): input views, each with at least two points.

    Raises:
        RegistrationInputError: if a view has fewer than two points.

    Returns:
        float: sigma0^2.

    Example::
        >>> import numpy as np
        >>> from stmmreg.geometry import PointSet
        >>> from stmmreg.solver import initialize_sigma
        >>> line = np.arange(10.0)[:, None] * np.array([[1.0, 0.0, 0.0]])
        >>> initialize_sigma([PointSet(1, line), PointSet(2, 3 * line)])
        4.0
    """
    return average_resolution(sets) ** 2


def build_indices(sets: Sequence[PointSet], transforms: Sequence[RigidTransform]) -> List[KdIndex]:
    """One k-d index per view over its currently transformed points."""
    return [
        KdIndex(transform.apply(point_set.points), source_view=point_set.view_id)
        for point_set, transform in zip(sets, transforms)
    ]


def _mixture(sigma2: float, config: RegistrationConfig) -> MixtureParams:
    return MixtureParams(sigma2=sigma2, dof=config.dof)


def _e_step_view(
    i: int,
    sets: Sequence[PointSet],
    transforms: Sequence[RigidTransform],
    indices: Sequence[KdIndex],
    sigma2: float,
    config: RegistrationConfig,
) -> ViewPosterior:
    """E-step for the points of the view at position i."""
    moved = transforms[i].apply(sets[i].points)
    others = np.array([j for j in range(len(sets)) if j != i], dtype=int)
    correspondence = np.empty((moved.shape[0], others.size), dtype=int)
    residual2 = np.empty((moved.shape[0], others.size))
    for col, j in enumerate(others):
        correspondence[:, col], residual2[:, col] = indices[j].nearest_many(moved)
    delta2 = residual2 / sigma2
    if config.gaussian:
        log_f = gaussian_log_pdf_delta2(delta2, sigma2)
        scale = np.ones_like(delta2)
    else:
        mixture = _mixture(sigma2, config)
        log_f = t_log_pdf_delta2(delta2, mixture)
        scale = expected_u(delta2, mixture)
    posterior = normalize_log_weights(log_f, axis=1)
    return ViewPosterior(
        others=others,
        correspondence=correspondence,
        residual2=residual2,
        delta2=delta2,
        posterior=posterior,
        scale=scale,
        robust=robust_posterior(posterior, scale),
    )


def e_step(
    sets: Sequence[PointSet],
    params: ModelParams,
    indices: Sequence[KdIndex],
    config: Optional[RegistrationConfig] = None,
) -> EStepResult:
    """
    Correspondences, posteriors, expected scales and robust weights.

    Args:
        sets (Sequence[PointSet]): M >= 2 views in their own frames.
        params (ModelParams): current transforms and sigma^2 (not None).
        indices (Sequence[KdIndex]): one index per view, built over that
            view's CURRENT transformed points (see `build_indices`).
        config (Optional[RegistrationConfig], optional): v, mode and threads.
            Defaults to RegistrationConfig().

    Returns:
        EStepResult: per-view arrays. Computed view by view, so the result
            does not depend on the number of worker threads.
    """
    config = RegistrationConfig() if config is None else config
    if len(sets) < 2:
        raise RegistrationInputError(f"Need at least two views, got {len(sets)}.")
    if params.sigma2 is None:
        raise RegistrationInputError("The E-step needs sigma2; see initialize_sigma.")
    assert len(indices) == len(sets) == len(params.transforms)

    def one(i: int) -> ViewPosterior:
        return _e_step_view(i, sets, params.transforms, indices, params.sigma2, config)

    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            views = list(pool.map(one, range(len(sets))))
    else:
        views = [one(i) for i in range(len(sets))]
    return EStepResult(tuple(views), params.sigma2)


def m_step_transform(
    sources: np.ndarray, targets: np.ndarray, weights: np.ndarray
) -> RigidTransform:
    """
    Rigid transform minimising sum_k w_k ||R s_k + t - y_k||^2 (weighted SVD).

    Args:
        sources (np.ndarray): (K, 3) points to move.
        targets (np.ndarray): (K, 3) points to move them onto.
        weights (np.ndarray): (K,) non-negative weights.

    Raises:
        DegenerateGeometryError: with fewer than three positively weighted
            pairs, or when the weighted cross-covariance has rank < 2.

    Returns:
        RigidTransform: the global minimiser, with det R = +1.

    Example::
        >>> import numpy as np
        >>> from stmmreg.geometry import RigidTransform
        >>> from stmmreg.solver import m_step_transform
        >>> src = np.eye(3)
        >>> shift = RigidTransform(np.eye(3), [1.0, 2.0, 3.0])
        >>> found = m_step_transform(src, shift.apply(src), np.ones(3))
        >>> np.round(found.translation, 9) + 0.0
        array([1., 2., 3.])
    """
    sources = np.asarray(sources, dtype=float).reshape(-1, 3)
    targets = np.asarray(targets, dtype=float).reshape(-1, 3)
    weights = np.asarray(weights, dtype=float).ravel()
    assert sources.shape == targets.shape and weights.shape[0] == sources.shape[0]
    if np.count_nonzero(weights > 0) < 3:
        raise DegenerateGeometryError("fewer than three point pairs carry positive weight.")
    total = weights.sum()
    source_mean = weights @ sources / total
    target_mean = weights @ targets / total
    cross = (sources - source_mean).T @ ((targets - target_mean) * weights[:, None])
    left, singular, right_t = np.linalg.svd(cross)
    if not singular[0] > 0 or singular[1] <= singular[0] * 1e-12:
        raise DegenerateGeometryError("weighted cross-covariance has rank < 2 (collinear points).")
    right = right_t.T
    guard = np.diag([1.0, 1.0, np.sign(np.linalg.det(right @ left.T))])
    rotation = right @ guard @ left.T
    return RigidTransform(rotation, target_mean - rotation @ source_mean)


def _targets(
    i: int, sets: Sequence[PointSet], transforms: Sequence[RigidTransform], view: ViewPosterior
) -> np.ndarray:
    """(N_i, M - 1, 3) centroids of view i under the given transforms."""
    return np.stack(
        [
            transforms[j].apply(sets[j].points[view.correspondence[:, col]])
            for col, j in enumerate(view.others)
        ],
        axis=1,
    )


def _residual2(
    i: int, sets: Sequence[PointSet], transforms: Sequence[RigidTransform], view: ViewPosterior
) -> np.ndarray:
    """(N_i, M - 1) squared residuals with frozen correspondences."""
    moved = transforms[i].apply(sets[i].points)
    diff = moved[:, None, :] - _targets(i, sets, transforms, view)
    return np.sum(diff * diff, axis=2)


def weighted_objective(
    estep: EStepResult,
    sets: Sequence[PointSet],
    transforms: Sequence[RigidTransform],
    i: int,
) -> float:
    """
    Weighted least-squares objective of view i with frozen correspondences.

    Args:
        estep (EStepResult): correspondences and robust weights.
        sets (Sequence[PointSet]): input views.
        transforms (Sequence[RigidTransform]): transforms to evaluate.
        i (int): view position, 0-based.

    Returns:
        float: sum of P* ||x_il(Phi_i) - x_jc(Phi_j)||^2.
    """
    view = estep.views[i]
    return float(np.sum(view.robust * _residual2(i, sets, transforms, view)))


def _m_step_view(
    i: int, sets: Sequence[PointSet], transforms: Sequence[RigidTransform], view: ViewPosterior
) -> RigidTransform:
    """Weighted SVD update of view i onto its centroids at their latest positions."""
    n_points, n_others = view.correspondence.shape
    sources = np.broadcast_to(sets[i].points[:, None, :], (n_points, n_others, 3))
    try:
        return m_step_transform(
            sources.reshape(-1, 3),
            _targets(i, sets, transforms, view).reshape(-1, 3),
            view.robust.ravel(),
        )
    except DegenerateGeometryError as err:
        view_id = sets[i].view_id
        raise DegenerateGeometryError(f"view {view_id}: {err}", view=view_id) from err


def update_covariance(
    estep: EStepResult,
    sets: Sequence[PointSet],
    params: ModelParams,
    config: Optional[RegistrationConfig] = None,
    floor: float = 0.0,
) -> float:
    """
    Closed-form variance update.

    sigma^2 = sum P* ||x_il(Phi_i) - x_jc(Phi_j)||^2 / (d sum P), with the
    residuals taken at the transforms in `params` (after the M-step) and the
    correspondences of `estep`.

    Args:
        estep (EStepResult): P, P* and correspondences of this sweep.
        sets (Sequence[PointSet]): input views.
        params (ModelParams): updated transforms.
        config (Optional[RegistrationConfig], optional): `symmetric_sigma`
            switches the denominator to d sum P*. Defaults to RegistrationConfig().
        floor (float, optional): lower bound on the result. Defaults to 0.

    Raises:
        RegistrationInputError: if the denominator is zero.

    Returns:
        float: max(sigma^2, floor).
    """
    config = RegistrationConfig() if config is None else config
    numerator, denominator = 0.0, 0.0
    for i, view in enumerate(estep.views):
        residual2 = _residual2(i, sets, params.transforms, view)
        numerator += float(np.sum(view.robust * residual2))
        denominator += float(np.sum(view.robust if config.symmetric_sigma else view.posterior))
    if not denominator > 0:
        raise RegistrationInputError("Variance update has a zero denominator.")
    sigma2 = numerator / (DIM * denominator)
    if sigma2 < floor:
        logger.warning("sigma2 = %.3g fell below its floor %.3g; using the floor.", sigma2, floor)
        return floor
    return sigma2


def q_value(
    estep: EStepResult,
    params: ModelParams,
    config: Optional[RegistrationConfig] = None,
    sets: Optional[Sequence[PointSet]] = None,
) -> float:
    """
    Expected complete-data log-likelihood Q.

    Args:
        estep (EStepResult): P and U of this sweep.
        params (ModelParams): sigma^2 (and transforms when `sets` is given).
        config (Optional[RegistrationConfig], optional): v and mode.
            Defaults to RegistrationConfig().
        sets (Optional[Sequence[PointSet]], optional): when given, residuals
            are recomputed at `params.transforms`; otherwise the E-step's
            residuals are used. Defaults to None.

    Returns:
        float: Q. In gaussian mode the Gamma block is dropped and U = 1.
    """
    config = RegistrationConfig() if config is None else config
    sigma2, v, d = params.sigma2, config.dof, DIM
    if config.gaussian:
        gamma_const = 0.0
    else:
        gamma_const = 0.5 * v * np.log(0.5 * v) - gammaln(0.5 * v)
    total = 0.0
    for i, view in enumerate(estep.views):
        residual2 = view.residual2 if sets is None else _residual2(i, sets, params.transforms, view)
        delta2 = residual2 / sigma2
        scale = view.scale
        log_scale = np.log(scale)
        gauss_block = (
            -0.5 * d * np.log(2.0 * np.pi)
            - 0.5 * d * np.log(sigma2)
            + 0.5 * d * log_scale
            - 0.5 * scale * delta2
        )
        if config.gaussian:
            gamma_block = 0.0
        else:
            gamma_block = gamma_const + 0.5 * v * (log_scale - scale) - log_scale
        total += float(np.sum(view.posterior * (gamma_block + gauss_block)))
    return total


def _initial_params(
    initial: Union[None, ModelParams, Sequence[RigidTransform]], n_views: int
) -> ModelParams:
    if initial is None:
        return ModelParams(tuple(RigidTransform.identity() for _ in range(n_views)))
    if not isinstance(initial, ModelParams):
        initial = ModelParams(tuple(initial))
    if len(initial.transforms) != n_views:
        raise RegistrationInputError(
            f"{len(initial.transforms)} initial transforms for {n_views} views."
        )
    return initial


def fix_gauge(
    transforms: Sequence[RigidTransform], anchor: int, held: RigidTransform
) -> List[RigidTransform]:
    """
    Apply the common motion that brings view `anchor` back to `held`.

    Args:
        transforms (Sequence[RigidTransform]): transforms of every view.
        anchor (int): 0-based position of the anchor view.
        held (RigidTransform): transform the anchor must keep.

    Returns:
        List[RigidTransform]: G T_i for every view, with G = held T_anchor^-1;
            the anchor entry is `held` itself.

    Example::
        >>> from stmmreg.geometry import RigidTransform
        >>> from stmmreg.solver import fix_gauge
        >>> shift = RigidTransform.from_axis_angle([0, 0, 1], 0.0, [1.0, 0.0, 0.0])
        >>> moved = fix_gauge([shift, shift], 0, RigidTransform.identity())
        >>> [float(t.translation[0]) for t in moved]
        [0.0, 0.0]
    """
    gauge = compose(held, transforms[anchor].inverse())
    return [held if i == anchor else compose(gauge, t) for i, t in enumerate(transforms)]


def _sweep(
    sets: Sequence[PointSet], params: ModelParams, config: RegistrationConfig
) -> Tuple[List[RigidTransform], EStepResult]:
    """One pass of E-step and M-step over every view, ascending."""
    transforms = list(params.transforms)
    if not config.rebuild_per_view:
        estep = e_step(sets, params, build_indices(sets, transforms), config)
        views = list(estep.views)
    else:
        views = []
    for i in range(len(sets)):
        if config.rebuild_per_view:
            indices = build_indices(sets, transforms)
            views.append(_e_step_view(i, sets, transforms, indices, params.sigma2, config))
        transforms[i] = _m_step_view(i, sets, transforms, views[i])
    return transforms, EStepResult(tuple(views), params.sigma2)


def register(
    sets: Sequence[PointSet],
    initial: Union[None, ModelParams, Sequence[RigidTransform]] = None,
    config: Optional[RegistrationConfig] = None,
    callback: Optional[Callable[[int, ModelParams, float], None]] = None,
) -> RegistrationReport:
    """
    Jointly register M views.

    Args:
        sets (Sequence[PointSet]): M >= 2 views, each in its own frame.
        initial (Union[None, ModelParams, Sequence[RigidTransform]], optional):
            initial transforms (identity when None) and optionally sigma^2
            (d_r^2 when missing). Defaults to None.
        config (Optional[RegistrationConfig], optional): Defaults to
            RegistrationConfig().
        callback (Optional[Callable[[int, ModelParams, float], None]], optional):
            called after every sweep with (sweep, params, Q). Defaults to None.

    Raises:
        RegistrationInputError: for M < 2 or inconsistent initial parameters.
        DegenerateGeometryError: when a view's M-step has no unique solution;
            `.view` names the view.

    Returns:
        RegistrationReport: transforms, sigma^2 and the Q trajectory.
    """
    config = RegistrationConfig() if config is None else config
    sets = list(sets)
    n_views = len(sets)
    if n_views < 2:
        raise RegistrationInputError(f"Need at least two views, got {n_views}.")
    anchor = config.anchor_view - 1
    if anchor >= n_views:
        raise RegistrationInputError(f"anchor view {config.anchor_view} out of range 1..{n_views}.")
    params = _initial_params(initial, n_views)
    resolution = average_resolution(sets)
    if params.sigma2 is None:
        params = params.replace(sigma2=resolution**2)
    initial_sigma2 = params.sigma2
    held = params.transforms[anchor]
    floor = config.sigma_floor * resolution**2
    logger.info(
        "Registering %d views (%d points), d_r = %.6g, sigma0^2 = %.6g, config = %s",
        n_views,
        sum(len(s) for s in sets),
        resolution,
        initial_sigma2,
        config.as_dict(),
    )

    trajectory: List[float] = []
    termination = MAX_ITERATIONS
    with Stopwatch() as watch:
        for sweep in range(1, config.max_iterations + 1):
            transforms, estep = _sweep(sets, params, config)
            params = params.replace(transforms=tuple(fix_gauge(transforms, anchor, held)))
            params = params.replace(sigma2=update_covariance(estep, sets, params, config, floor))
            q = q_value(estep, params, config, sets=sets)
            trajectory.append(q)
            logger.debug("sweep %d: Q = %.10g, sigma2 = %.6g", sweep, q, params.sigma2)
            if callback is not None:
                callback(sweep, params, q)
            if sweep > 1 and abs(q - trajectory[-2]) / n_views < config.tolerance:
                termination = CONVERGED
                break
    logger.info(
        "Finished after %d sweeps (%s) in %s, sigma = %.6g",
        len(trajectory),
        termination,
        hr_time(watch.seconds),
        np.sqrt(params.sigma2),
    )
    return RegistrationReport(
        transforms=params.transforms,
        sigma2=params.sigma2,
        iterations=len(trajectory),
        q_trajectory=tuple(trajectory),
        termination=termination,
        initial_sigma2=initial_sigma2,
        resolution=resolution,
        config=config,
        seconds=watch.seconds,
    )
