"""Synthetic scenes and the registration experiment harness.

A scene samples one analytic surface (sphere, torus or wavy grid) into M
overlapping angular sectors, one per view, and moves each view by the
inverse of a known rigid transform, so the ground truth maps every view back
into the common frame. The experiments disturb the ground truth, register,
and record rotation and translation errors per trial:

- rotation / translation robustness: uniform disturbances of growing size,
- noise: Gaussian noise at given SNRs (optionally with outliers), crossed
  with the solver mode,
- degrees of freedom: the same disturbance with several values of v.

Solver failures are recorded in the trial table, never raised, so a sweep
always reports on every trial.

Example::

    >>> from stmmreg.evaluation import generate_scene
    >>> scene = generate_scene("sphere", views=3, points_per_view=200, seed=1)
    >>> len(scene.sets), len(scene.sets[0]), scene.ground_truth[0].angle()
    (3, 200, 0.0)
"""

from typing import Callable, Dict, List, Optional, Sequence, Tuple
from dataclasses import dataclass
from concurrent.futures import ThreadPoolExecutor
import os
import glob
import logging
import numpy as np
import pandas as pd
from .geometry import (
    PerturbationSpec,
    PointSet,
    RigidTransform,
    perturb,
    random_rigid,
    rotation_error,
    sample_perturbation,
    translation_error,
)
from .io import (
    PathLike,
    read_json,
    read_ply,
    read_transforms,
    write_json,
    write_ply,
    write_transforms,
)
from .solver import Mode, RegistrationConfig, average_resolution, register
from .time import Stopwatch, hr_time, time_stamp, timeit
from .unc import mean_std, summary_text

logger = logging.getLogger(__name__)

SURFACES: Tuple[str, ...] = ("sphere", "torus", "wavy-grid")
DEFAULT_ROTATION_LEVELS: Tuple[float, ...] = (0.01, 0.02, 0.03, 0.04, 0.05)
DEFAULT_TRANSLATION_LEVELS: Tuple[float, ...] = (2.4, 3.2, 4.0, 4.8, 5.6)
DEFAULT_SNR_LEVELS: Tuple[float, ...] = (50.0, 25.0)
DEFAULT_DOFS: Tuple[float, ...] = (2.0, 3.0, 5.0, 8.0, 10.0)
DEFAULT_SEED: int = 42

TRIAL_COLUMNS: Tuple[str, ...] = (
    "protocol",
    "mode",
    "level",
    "snr_db",
    "repeat",
    "e_r_rad",
    "e_t",
    "iters",
    "seconds",
    "status",
    "error",
)

# torus radii, unit sphere, and the wavy grid's height field.
TORUS_MAJOR: float = 1.0
TORUS_MINOR: float = 0.4
WAVE_AMPLITUDE: float = 0.15
WAVE_NUMBER: float = 3.0


class SceneError(ValueError):
    """The scene cannot be built or lacks ground truth."""


@dataclass(frozen=True, eq=False)
class SyntheticScene:
    """
    Views with known ground-truth transforms.

    Args:
        ground_truth (Tuple[RigidTransform, ...]): maps each view into the
            common frame; the first one is the identity for generated scenes.
        sets (Tuple[PointSet, ...]): views in their own frames.
        resolution (float): average point resolution d_r.
        surface (str, optional): generator name, "user" for loaded data.
        points_per_view (int, optional): generator N. Defaults to 0.
        overlap_fraction (float, optional): generator overlap. Defaults to 1.
        seed (Optional[int], optional): generator seed. Defaults to None.
    """

    ground_truth: Tuple[RigidTransform, ...]
    sets: Tuple[PointSet, ...]
    resolution: float
    surface: str = "user"
    points_per_view: int = 0
    overlap_fraction: float = 1.0
    seed: Optional[int] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "ground_truth", tuple(self.ground_truth))
        object.__setattr__(self, "sets", tuple(self.sets))
        if len(self.ground_truth) != len(self.sets):
            raise SceneError(
                f"{len(self.sets)} views but {len(self.ground_truth)} ground-truth transforms."
            )

    @property
    def views(self) -> int:
        return len(self.sets)

    @property
    def generated(self) -> bool:
        """Whether the scene can be replayed from its manifest."""
        return self.surface in SURFACES and self.seed is not None

    def manifest(self) -> dict:
        """Generator descriptor and seed; `scene_from_manifest` replays it."""
        return {
            "surface": self.surface,
            "views": self.views,
            "points_per_view": self.points_per_view,
            "overlap_fraction": self.overlap_fraction,
            "seed": self.seed,
            "resolution": self.resolution,
        }

    def aligned(self) -> List[PointSet]:
        """Views moved into the common frame by the ground truth."""
        return [s.transformed(t) for s, t in zip(self.sets, self.ground_truth)]


def _sample_surface(surface: str, rng: np.random.Generator, size: int) -> np.ndarray:
    """`size` points drawn uniformly over the whole surface."""
    theta = rng.uniform(-np.pi, np.pi, size=size)
    if surface == "sphere":
        z = rng.uniform(-1.0, 1.0, size=size)
        ring = np.sqrt(1.0 - z**2)
        return np.column_stack([ring * np.cos(theta), ring * np.sin(theta), z])
    if surface == "torus":
        # uniform in the tube angle; slightly denser on the inside of the ring.
        phi = rng.uniform(0.0, 2.0 * np.pi, size=size)
        ring = TORUS_MAJOR + TORUS_MINOR * np.cos(phi)
        return np.column_stack(
            [ring * np.cos(theta), ring * np.sin(theta), TORUS_MINOR * np.sin(phi)]
        )
    xy = rng.uniform(-1.0, 1.0, size=(size, 2))
    height = WAVE_AMPLITUDE * np.sin(WAVE_NUMBER * xy[:, 0]) * np.cos(WAVE_NUMBER * xy[:, 1])
    return np.column_stack([xy, height])


def generate_scene(
    surface: str = "wavy-grid",
    views: int = 10,
    points_per_view: int = 2000,
    overlap_fraction: float = 0.5,
    seed: int = DEFAULT_SEED,
) -> SyntheticScene:
    """
    Sample a surface into overlapping views with known rigid motions.

    One pool of P = M N (1 - overlap_fraction) points is drawn over the whole
    surface and sorted by azimuth. View k takes the N consecutive pool points
    starting at position round(k P / M), wrapping around, so each view covers
    an angular sector and neighbouring views share `overlap_fraction` of
    their points exactly. With overlap_fraction = 1 every view is the same
    full-surface sample of N points.

    Args:
        surface (str, optional): "sphere", "torus" or "wavy-grid".
            Defaults to "wavy-grid".
        views (int, optional): M >= 2. Defaults to 10.
        points_per_view (int, optional): N >= 100. Defaults to 2000.
        overlap_fraction (float, optional): in (0.3, 1]. Defaults to 0.5.
        seed (int, optional): Defaults to 42.

    Raises:
        SceneError: for bad parameters, or when a view would need more than
            the whole pool (M (1 - overlap_fraction) < 1).

    Returns:
        SyntheticScene: views and ground truth (identity for view 1).
    """
    if surface not in SURFACES:
        raise SceneError(f"surface must be one of {SURFACES}, got {surface!r}.")
    if views < 2:
        raise SceneError(f"Need at least two views, got {views}.")
    if points_per_view < 100:
        raise SceneError(f"Need at least 100 points per view, got {points_per_view}.")
    if not 0.3 < overlap_fraction <= 1.0:
        raise SceneError(f"overlap_fraction must be in (0.3, 1], got {overlap_fraction}.")
    if overlap_fraction == 1.0:
        pool_size = points_per_view
    else:
        pool_size = int(round(views * points_per_view * (1.0 - overlap_fraction)))
        if pool_size < points_per_view:
            raise SceneError(
                f"overlap_fraction {overlap_fraction} is infeasible for {views} views: each "
                "view would span more than the full circle; use more views or overlap_fraction = 1."
            )
    rng = np.random.default_rng(seed)
    pool = _sample_surface(surface, rng, pool_size)
    pool = pool[np.argsort(np.arctan2(pool[:, 1], pool[:, 0]), kind="stable")]
    if overlap_fraction == 1.0:
        bases = [pool] * views
    else:
        starts = [int(round(k * pool_size / views)) for k in range(views)]
        bases = [pool[(start + np.arange(points_per_view)) % pool_size] for start in starts]
    ground_truth = [RigidTransform.identity()] + [
        random_rigid(rng, max_angle=np.pi / 4, max_translation=0.5) for _ in range(views - 1)
    ]
    sets = [
        PointSet(k + 1, truth.inverse().apply(base), name=f"{surface}-{k + 1}")
        for k, (base, truth) in enumerate(zip(bases, ground_truth))
    ]
    scene = SyntheticScene(
        ground_truth=tuple(ground_truth),
        sets=tuple(sets),
        resolution=average_resolution(sets),
        surface=surface,
        points_per_view=points_per_view,
        overlap_fraction=overlap_fraction,
        seed=seed,
    )
    logger.info(
        "Generated %s scene: %d views x %d points, overlap %.2f, d_r = %.4g, seed %d.",
        surface,
        views,
        points_per_view,
        overlap_fraction,
        scene.resolution,
        seed,
    )
    return scene


def scene_from_manifest(manifest: dict) -> SyntheticScene:
    """
    Regenerate a scene from `SyntheticScene.manifest()`.

    Raises:
        SceneError: if the manifest does not describe a generated scene.
    """
    try:
        return generate_scene(
            surface=manifest["surface"],
            views=int(manifest["views"]),
            points_per_view=int(manifest["points_per_view"]),
            overlap_fraction=float(manifest["overlap_fraction"]),
            seed=int(manifest["seed"]),
        )
    except (KeyError, TypeError) as err:
        raise SceneError(f"Manifest does not describe a generated scene: {err!r}.") from err


def save_scene(scene: SyntheticScene, directory: PathLike) -> None:
    """
    Write `view_XX.ply` per view, `ground_truth.json` and `manifest.json`.

    Args:
        scene (SyntheticScene): scene to save.
        directory (PathLike): created if missing.
    """
    os.makedirs(directory, exist_ok=True)
    for point_set in scene.sets:
        write_ply(point_set, os.path.join(directory, f"view_{point_set.view_id:02d}.ply"))
    write_transforms(scene.ground_truth, os.path.join(directory, "ground_truth.json"))
    write_json(scene.manifest(), os.path.join(directory, "manifest.json"))


def load_scene(directory: PathLike) -> SyntheticScene:
    """
    Read a scene directory: PLY files (sorted by name) and `ground_truth.json`.

    Any dataset laid out this way can be evaluated; `manifest.json` is
    optional and only supplies the generator descriptor.

    Raises:
        SceneError: without PLY files, without `ground_truth.json`, or when
            the ground truth does not cover views 1..M.

    Returns:
        SyntheticScene: the loaded scene.
    """
    paths = sorted(glob.glob(os.path.join(str(directory), "*.ply")))
    if len(paths) < 2:
        raise SceneError(f"{directory}: need at least two .ply files, found {len(paths)}.")
    truth_path = os.path.join(str(directory), "ground_truth.json")
    if not os.path.exists(truth_path):
        raise SceneError(
            f"{truth_path} is missing; evaluation needs the ground-truth transforms "
            "of every view (see `stmmreg synth` for the layout)."
        )
    truth = read_transforms(truth_path)
    if sorted(truth) != list(range(1, len(paths) + 1)):
        raise SceneError(
            f"{truth_path}: ground truth covers views {sorted(truth)}, "
            f"expected 1..{len(paths)} for {len(paths)} PLY files."
        )
    sets = [read_ply(path, view_id=k) for k, path in enumerate(paths, start=1)]
    descriptor: Dict = {}
    manifest_path = os.path.join(str(directory), "manifest.json")
    if os.path.exists(manifest_path):
        descriptor = read_json(manifest_path)
    return SyntheticScene(
        ground_truth=tuple(truth[k] for k in range(1, len(paths) + 1)),
        sets=tuple(sets),
        resolution=average_resolution(sets),
        surface=descriptor.get("surface", "user"),
        points_per_view=int(descriptor.get("points_per_view", 0)),
        overlap_fraction=float(descriptor.get("overlap_fraction", 1.0)),
        seed=descriptor.get("seed"),
    )


def add_noise_snr(point_set: PointSet, snr_db: float, rng: np.random.Generator) -> PointSet:
    """
    Add zero-mean Gaussian noise at a signal-to-noise ratio.

    The signal power is the mean squared distance of the points from their
    centroid; every coordinate gets noise of variance
    power / 10^(snr_db / 10).

    Args:
        point_set (PointSet): view to corrupt.
        snr_db (float): SNR in decibels.
        rng (np.random.Generator): generator.

    Returns:
        PointSet: noisy copy with the same id and name.
    """
    points = point_set.points
    power = float(np.mean(np.sum((points - points.mean(axis=0)) ** 2, axis=1)))
    std = np.sqrt(power / 10.0 ** (snr_db / 10.0))
    return PointSet(point_set.view_id, points + rng.normal(0.0, std, size=points.shape), point_set.name)


def add_outliers(point_set: PointSet, fraction: float, rng: np.random.Generator) -> PointSet:
    """
    Replace floor(fraction * N) random points with uniform samples of the
    bounding box scaled by 1.5 about its centre.

    Args:
        point_set (PointSet): view to corrupt.
        fraction (float): in [0, 0.5].
        rng (np.random.Generator): generator.

    Returns:
        PointSet: corrupted copy, same size, id and name.

    Example::
        >>> import numpy as np
        >>> from stmmreg.geometry import PointSet
        >>> from stmmreg.evaluation import add_outliers
        >>> view = PointSet(1, np.random.default_rng(0).normal(size=(20, 3)))
        >>> out = add_outliers(view, 0.1, np.random.default_rng(1))
        >>> int(np.sum(np.any(out.points != view.points, axis=1)))
        2
    """
    if not 0.0 <= fraction <= 0.5:
        raise ValueError(f"fraction must be in [0, 0.5], got {fraction}.")
    points = np.array(point_set.points)
    count = int(np.floor(fraction * points.shape[0]))
    if count == 0:
        return point_set
    low, high = points.min(axis=0), points.max(axis=0)
    centre, half = 0.5 * (low + high), 0.75 * (high - low)
    replaced = rng.choice(points.shape[0], size=count, replace=False)
    points[replaced] = rng.uniform(centre - half, centre + half, size=(count, 3))
    return PointSet(point_set.view_id, points, point_set.name)


def rotation_levels(
    half_widths: Sequence[float] = DEFAULT_ROTATION_LEVELS, translation: float = 1.0
) -> List[PerturbationSpec]:
    """
    Disturbances of growing rotation, each with a fixed translation half-width.

    Args:
        half_widths (Sequence[float], optional): Euler angle half-widths,
            radians. Defaults to 0.01 ... 0.05.
        translation (float, optional): translation half-width in d_r.
            Defaults to 1.

    Returns:
        List[PerturbationSpec]: one spec per level.
    """
    return [PerturbationSpec(float(a), translation) for a in half_widths]


def translation_levels(
    half_widths: Sequence[float] = DEFAULT_TRANSLATION_LEVELS, rotation: float = 0.01
) -> List[PerturbationSpec]:
    """
    Disturbances of growing translation (in d_r), each with a fixed rotation
    half-width (radians, default 0.01).
    """
    return [PerturbationSpec(rotation, float(b)) for b in half_widths]


def _initial_transforms(
    scene: SyntheticScene,
    spec: PerturbationSpec,
    rng: np.random.Generator,
    anchor: int,
) -> List[RigidTransform]:
    """Ground truth perturbed everywhere but at the anchor position."""
    return [
        truth if k == anchor else perturb(truth, sample_perturbation(spec, rng, scene.resolution))
        for k, truth in enumerate(scene.ground_truth)
    ]


def _run_trial(
    sets: Sequence[PointSet],
    ground_truth: Sequence[RigidTransform],
    initial: Sequence[RigidTransform],
    config: RegistrationConfig,
    row: dict,
) -> dict:
    """Register once and fill in the error columns of `row`."""
    row = dict(row, mode=config.mode.value)
    with Stopwatch() as watch:
        try:
            report = register(sets, initial=initial, config=config)
        except (ValueError, ArithmeticError, np.linalg.LinAlgError) as err:
            report, failure = None, err
    row["seconds"] = watch.seconds
    if report is None:
        row.update(
            e_r_rad=np.nan,
            e_t=np.nan,
            iters=0,
            status="failed",
            error=f"{type(failure).__name__}: {failure}",
        )
        logger.warning("Trial %s failed: %s", _label(row), row["error"])
        return row
    row.update(
        e_r_rad=rotation_error(report.transforms, ground_truth),
        e_t=translation_error(report.transforms, ground_truth),
        iters=report.iterations,
        status=report.termination,
        error="",
    )
    logger.info(
        "Trial %s: e_R = %.3g rad, e_t = %.3g, %d sweeps in %s.",
        _label(row),
        row["e_r_rad"],
        row["e_t"],
        row["iters"],
        hr_time(row["seconds"]),
    )
    return row


def _label(row: dict) -> str:
    return f"{row['protocol']}/{row['mode']} level={row['level']:g} repeat={row['repeat']}"


def _execute(tasks: Sequence[Callable[[], List[dict]]], workers: int) -> List[dict]:
    """Run the trial tasks, keeping their order in the output."""
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda task: task(), tasks))
    else:
        results = [task() for task in tasks]
    return [row for rows in results for row in rows]


def _check_repeats(repeats: int) -> None:
    if repeats < 1:
        raise ValueError(f"repeats must be >= 1, got {repeats}.")


@dataclass(frozen=True, eq=False)
class ExperimentReport:
    """
    Trials of one experiment.

    Args:
        trials (pd.DataFrame): one row per trial with the `TRIAL_COLUMNS`.
        protocol (str): "robustness", "translation", "noise" or "dof".
        seed (int): master seed the trials were drawn with.
        config (dict): registration settings, as `RegistrationConfig.as_dict()`.
    """

    trials: pd.DataFrame
    protocol: str
    seed: int = DEFAULT_SEED
    config: Optional[dict] = None

    def __post_init__(self) -> None:
        missing = set(TRIAL_COLUMNS) - set(self.trials.columns)
        assert not missing, missing

    def __len__(self) -> int:
        return len(self.trials)

    @property
    def failures(self) -> int:
        return int((self.trials["status"] == "failed").sum())

    def summary(self) -> pd.DataFrame:
        """
        Mean ± std of every error column per mode and level.

        Failed trials are counted, not averaged. The std is the population
        standard deviation of the finite values.

        Returns:
            pd.DataFrame: one row per (mode, level, snr_db).
        """
        rows = []
        keys = ["mode", "level", "snr_db"]
        for (mode, level, snr_db), group in self.trials.groupby(keys, sort=False, dropna=False):
            e_r, e_t = mean_std(group["e_r_rad"]), mean_std(group["e_t"])
            rows.append(
                {
                    "protocol": self.protocol,
                    "mode": mode,
                    "level": level,
                    "snr_db": snr_db,
                    "repeats": len(group),
                    "failures": int((group["status"] == "failed").sum()),
                    "e_r_mean": e_r.n,
                    "e_r_std": e_r.s,
                    "e_t_mean": e_t.n,
                    "e_t_std": e_t.s,
                    "iters_mean": float(group["iters"].mean()),
                    "seconds_mean": float(group["seconds"].mean()),
                    "e_r": summary_text(group["e_r_rad"]),
                    "e_t": summary_text(group["e_t"]),
                }
            )
        return pd.DataFrame(rows)

    def to_csv(self, path: PathLike) -> None:
        """Write the trials, one row per trial."""
        self.trials.to_csv(path, index=False, columns=list(TRIAL_COLUMNS))

    def to_json(self, path: PathLike) -> None:
        """Write the summary with the seed, configuration and creation time."""
        summary = self.summary()
        summary = summary.astype(object).where(summary.notna(), None)
        write_json(
            {
                "protocol": self.protocol,
                "seed": self.seed,
                "config": self.config,
                "created": time_stamp(),
                "summary": summary.to_dict(orient="records"),
            },
            path,
        )


def _report(rows: List[dict], protocol: str, seed: int, config: RegistrationConfig) -> ExperimentReport:
    trials = pd.DataFrame(rows, columns=list(TRIAL_COLUMNS))
    return ExperimentReport(trials, protocol, seed, config.as_dict())


@timeit
def run_robustness_experiment(
    scene: SyntheticScene,
    levels: Sequence[PerturbationSpec] = tuple(rotation_levels()),
    repeats: int = 20,
    config: Optional[RegistrationConfig] = None,
    seed: int = DEFAULT_SEED,
    workers: int = 1,
    protocol: str = "robustness",
) -> ExperimentReport:
    """
    Register from disturbed ground truth, `repeats` times per level.

    Every view but the anchor starts at R0 = dR R, t0 = dt + t with (dR, dt)
    drawn from the level's `PerturbationSpec`. The anchor starts (and stays)
    at its ground truth.

    Args:
        scene (SyntheticScene): views with ground truth.
        levels (Sequence[PerturbationSpec], optional): disturbance schedule.
            Defaults to `rotation_levels()`.
        repeats (int, optional): trials per level, >= 1. Defaults to 20.
        config (Optional[RegistrationConfig], optional): solver settings.
        seed (int, optional): master seed; trial (level k, repeat r) draws
            from default_rng([seed, k, r]). Defaults to 42.
        workers (int, optional): trials run concurrently. Defaults to 1.
        protocol (str, optional): "robustness" records the rotation
            half-width as the level, "translation" the translation half-width.

    Returns:
        ExperimentReport: one row per trial.
    """
    _check_repeats(repeats)
    config = RegistrationConfig() if config is None else config
    anchor = config.anchor_view - 1

    def task(k: int, spec: PerturbationSpec, r: int) -> Callable[[], List[dict]]:
        def run() -> List[dict]:
            rng = np.random.default_rng([seed, k, r])
            initial = _initial_transforms(scene, spec, rng, anchor)
            level = spec.translation_interval if protocol == "translation" else spec.rotation_interval
            row = {"protocol": protocol, "level": level, "snr_db": np.nan, "repeat": r}
            return [_run_trial(scene.sets, scene.ground_truth, initial, config, row)]

        return run

    tasks = [task(k, spec, r) for k, spec in enumerate(levels) for r in range(repeats)]
    return _report(_execute(tasks, workers), protocol, seed, config)


@timeit
def run_noise_experiment(
    scene: SyntheticScene,
    snr_levels: Sequence[float] = DEFAULT_SNR_LEVELS,
    repeats: int = 30,
    config: Optional[RegistrationConfig] = None,
    modes: Sequence[Mode] = (Mode.STUDENT_T, Mode.GAUSSIAN),
    seed: int = DEFAULT_SEED,
    workers: int = 1,
    outlier_fraction: float = 0.0,
    perturbation: PerturbationSpec = PerturbationSpec(0.02, 1.0),
    include_control: bool = True,
) -> ExperimentReport:
    """
    Register noisy copies of the scene with each solver mode.

    Each (level, repeat) draws one corrupted scene and one initial
    disturbance from default_rng([seed, level index, repeat]); every mode
    registers that same input. The noise-free control is level index 0
    with `snr_db` = inf.

    Args:
        scene (SyntheticScene): views with ground truth.
        snr_levels (Sequence[float], optional): SNRs in dB. Defaults to (50, 25).
        repeats (int, optional): trials per level, >= 1. Defaults to 30.
        config (Optional[RegistrationConfig], optional): solver settings; the
            mode is overridden per run.
        modes (Sequence[Mode], optional): Defaults to both modes.
        seed (int, optional): master seed. Defaults to 42.
        workers (int, optional): concurrent (level, repeat) tasks. Defaults to 1.
        outlier_fraction (float, optional): outliers added to every view after
            the noise. Defaults to 0.
        perturbation (PerturbationSpec, optional): initial disturbance.
            Defaults to 0.02 rad and 1 d_r.
        include_control (bool, optional): add the noise-free level. Defaults to True.

    Returns:
        ExperimentReport: one row per (level, repeat, mode).
    """
    _check_repeats(repeats)
    config = RegistrationConfig() if config is None else config
    anchor = config.anchor_view - 1
    levels = ([np.inf] if include_control else []) + [float(s) for s in snr_levels]
    configs = [config.replace(mode=Mode(mode)) for mode in modes]

    def task(k: int, snr_db: float, r: int) -> Callable[[], List[dict]]:
        def run() -> List[dict]:
            rng = np.random.default_rng([seed, k, r])
            sets = list(scene.sets)
            if np.isfinite(snr_db):
                sets = [add_noise_snr(s, snr_db, rng) for s in sets]
            if outlier_fraction > 0:
                sets = [add_outliers(s, outlier_fraction, rng) for s in sets]
            initial = _initial_transforms(scene, perturbation, rng, anchor)
            row = {"protocol": "noise", "level": snr_db, "snr_db": snr_db, "repeat": r}
            return [_run_trial(sets, scene.ground_truth, initial, cfg, row) for cfg in configs]

        return run

    tasks = [task(k, snr_db, r) for k, snr_db in enumerate(levels) for r in range(repeats)]
    return _report(_execute(tasks, workers), "noise", seed, config)


@timeit
def run_dof_sweep(
    scene: SyntheticScene,
    dofs: Sequence[float] = DEFAULT_DOFS,
    repeats: int = 5,
    config: Optional[RegistrationConfig] = None,
    perturbation: PerturbationSpec = PerturbationSpec(0.02, 1.0),
    seed: int = DEFAULT_SEED,
    workers: int = 1,
) -> ExperimentReport:
    """
    Register the same disturbed starts with several degrees of freedom v.

    Repeat r draws its disturbance from default_rng([seed, 0, r]) for every
    v, so the levels differ only in v.

    Returns:
        ExperimentReport: one row per (v, repeat); the level is v.
    """
    _check_repeats(repeats)
    config = RegistrationConfig() if config is None else config
    anchor = config.anchor_view - 1

    def task(dof: float, r: int) -> Callable[[], List[dict]]:
        def run() -> List[dict]:
            rng = np.random.default_rng([seed, 0, r])
            initial = _initial_transforms(scene, perturbation, rng, anchor)
            row = {"protocol": "dof", "level": float(dof), "snr_db": np.nan, "repeat": r}
            cfg = config.replace(dof=float(dof), mode=Mode.STUDENT_T)
            return [_run_trial(scene.sets, scene.ground_truth, initial, cfg, row)]

        return run

    tasks = [task(dof, r) for dof in dofs for r in range(repeats)]
    return _report(_execute(tasks, workers), "dof", seed, config)
