"""Command line interface: `stmmreg register | synth | eval`.

Exit codes:

- 0: success, including experiments where some trials failed (the failures
  are recorded in the trial CSV),
- 1: bad usage, unreadable or malformed input, missing ground truth,
- 2: the solver met degenerate geometry.

Example::

    stmmreg synth --surface torus --views 4 --out scene/
    stmmreg register scene/*.ply --out transforms.json --trace q.csv
    stmmreg eval --scene scene/ --protocol robustness --repeats 20
"""

from typing import List, Optional, Sequence
import os
import sys
import argparse
import logging
from ._version import __version__
from .geometry import PerturbationSpec, PointSet
from .io import (
    PlyFormatError,
    TransformSchemaError,
    downsample,
    read_json,
    read_ply,
    read_transforms,
    write_ply,
    write_trace,
    write_transforms,
)
from .solver import (
    DegenerateGeometryError,
    Mode,
    ModelParams,
    RegistrationConfig,
    RegistrationInputError,
    register,
)
from .evaluation import (
    DEFAULT_DOFS,
    DEFAULT_ROTATION_LEVELS,
    DEFAULT_SEED,
    DEFAULT_SNR_LEVELS,
    DEFAULT_TRANSLATION_LEVELS,
    SURFACES,
    ExperimentReport,
    SceneError,
    generate_scene,
    load_scene,
    rotation_levels,
    run_dof_sweep,
    run_noise_experiment,
    run_robustness_experiment,
    save_scene,
    scene_from_manifest,
    translation_levels,
)

logger = logging.getLogger(__name__)

EXIT_OK: int = 0
EXIT_INPUT: int = 1
EXIT_DEGENERATE: int = 2
THREADS_ENV: str = "STMMREG_THREADS"
DEFAULT_DOWNSAMPLE: int = 2000


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit with code 1."""

    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> List[float]:
    try:
        return [float(item) for item in text.split(",") if item.strip()]
    except ValueError as err:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}") from err


def _solver_options() -> argparse.ArgumentParser:
    options = _Parser(add_help=False)
    group = options.add_argument_group("solver")
    group.add_argument("--dof", type=float, default=3.0, help="degrees of freedom v (default 3)")
    group.add_argument("--max-iters", type=int, default=300, help="maximum sweeps K (default 300)")
    group.add_argument("--tol", type=float, default=5e-4, help="threshold on (1/M)|dQ| (default 0.0005)")
    group.add_argument(
        "--mode", choices=[m.value for m in Mode], default=Mode.STUDENT_T.value, help="mixture components"
    )
    group.add_argument("--anchor", type=int, default=1, help="1-based view held fixed (default 1)")
    group.add_argument(
        "--rebuild-per-view", action="store_true", help="redo the E-step before every view's M-step"
    )
    group.add_argument(
        "--symmetric-sigma", action="store_true", help="use d * sum(P*) as the variance denominator"
    )
    group.add_argument(
        "--threads", type=int, default=None, help=f"worker threads (default ${THREADS_ENV} or 1)"
    )
    group.add_argument("--seed", type=int, default=DEFAULT_SEED, help=f"random seed (default {DEFAULT_SEED})")
    return options


def _logging_options() -> argparse.ArgumentParser:
    options = _Parser(add_help=False)
    volume = options.add_mutually_exclusive_group()
    volume.add_argument("-v", "--verbose", action="store_true", help="log every sweep")
    volume.add_argument("-q", "--quiet", action="store_true", help="log warnings only")
    return options


def _threads(args: argparse.Namespace) -> int:
    if args.threads is not None:
        return args.threads
    value = os.environ.get(THREADS_ENV, "1")
    try:
        return max(int(value), 1)
    except ValueError:
        logger.warning("Ignoring %s=%r, not an integer.", THREADS_ENV, value)
        return 1


def config_from_args(args: argparse.Namespace) -> RegistrationConfig:
    """Solver settings from parsed flags."""
    return RegistrationConfig(
        dof=args.dof,
        max_iterations=args.max_iters,
        tolerance=args.tol,
        mode=Mode(args.mode),
        anchor_view=args.anchor,
        rebuild_per_view=args.rebuild_per_view,
        symmetric_sigma=args.symmetric_sigma,
        threads=_threads(args),
    )


def build_parser() -> argparse.ArgumentParser:
    """Parser for every subcommand."""
    solver, volume = _solver_options(), _logging_options()
    parser = _Parser(prog="stmmreg", description="Multi-view rigid registration of point clouds.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    reg = commands.add_parser("register", parents=[solver, volume], help="register PLY views")
    reg.add_argument("paths", nargs="+", help="two or more PLY files, view 1 first")
    reg.add_argument("--out", default="transforms.json", help="output transforms JSON")
    reg.add_argument("--init", default=None, help="initial transforms JSON")
    reg.add_argument(
        "--downsample",
        type=int,
        default=DEFAULT_DOWNSAMPLE,
        help=f"points kept per view, 0 keeps all (default {DEFAULT_DOWNSAMPLE})",
    )
    reg.add_argument("--emit-aligned", default=None, metavar="DIR", help="write aligned views as PLY")
    reg.add_argument("--trace", default=None, metavar="CSV", help="write the Q trajectory")
    reg.add_argument("--plot", default=None, metavar="FILE", help="save the convergence curve")
    reg.set_defaults(handler=cmd_register)

    synth = commands.add_parser("synth", parents=[volume], help="generate a synthetic scene")
    synth.add_argument("--surface", choices=SURFACES, default="wavy-grid")
    synth.add_argument("--views", type=int, default=10)
    synth.add_argument("--points", type=int, default=2000, help="points per view")
    synth.add_argument("--overlap", type=float, default=0.5, help="overlap fraction in (0.3, 1]")
    synth.add_argument("--seed", type=int, default=DEFAULT_SEED)
    synth.add_argument("--manifest", default=None, help="replay a stored manifest.json")
    synth.add_argument("--out", required=True, metavar="DIR", help="output directory")
    synth.set_defaults(handler=cmd_synth)

    ev = commands.add_parser("eval", parents=[solver, volume], help="run an experiment")
    ev.add_argument("--scene", default=None, metavar="DIR", help="scene directory (default: generate one)")
    ev.add_argument("--surface", choices=SURFACES, default="wavy-grid", help="generated scene surface")
    ev.add_argument("--views", type=int, default=10, help="generated scene views")
    ev.add_argument("--points", type=int, default=2000, help="generated scene points per view")
    ev.add_argument("--overlap", type=float, default=0.5, help="generated scene overlap")
    ev.add_argument(
        "--protocol", choices=["robustness", "translation", "noise", "dof"], default="robustness"
    )
    ev.add_argument("--levels", type=_floats, default=None, help="disturbance half-widths")
    ev.add_argument("--snr", type=_floats, default=list(DEFAULT_SNR_LEVELS), help="SNRs in dB")
    ev.add_argument("--dofs", type=_floats, default=list(DEFAULT_DOFS), help="values of v")
    ev.add_argument("--repeats", type=int, default=20)
    ev.add_argument("--outliers", type=float, default=0.0, help="outlier fraction (noise protocol)")
    ev.add_argument(
        "--rotation",
        type=float,
        default=None,
        help="fixed rotation half-width, rad (default 0.01, or 0.02 for noise and dof)",
    )
    ev.add_argument(
        "--translation", type=float, default=1.0, help="fixed translation half-width in d_r (default 1)"
    )
    ev.add_argument("--workers", type=int, default=1, help="trials run concurrently")
    ev.add_argument("--csv", default="trials.csv", help="per-trial CSV")
    ev.add_argument("--json", default="summary.json", help="summary JSON")
    ev.add_argument("--plot", default=None, metavar="FILE", help="save a box plot of e_R")
    ev.set_defaults(handler=cmd_eval)
    return parser


def _save_figure(kind: str, report, path: str) -> None:
    # pylint: disable=import-outside-toplevel
    from .plot import plot_convergence, plot_defaults, plot_errors

    plot_defaults()
    fig, _ = plot_convergence(report) if kind == "convergence" else plot_errors(report)
    fig.savefig(path)
    logger.info("Saved %s plot to %s.", kind, path)


def cmd_register(args: argparse.Namespace) -> int:
    """Register PLY views and write the transforms."""
    if len(args.paths) < 2:
        raise RegistrationInputError("register needs at least two PLY files.")
    config = config_from_args(args)
    full = [read_ply(path, view_id=k) for k, path in enumerate(args.paths, start=1)]
    sets: List[PointSet] = full
    if args.downsample > 0:
        sets = [downsample(s, args.downsample, seed=args.seed) for s in full]
    initial = None
    if args.init is not None:
        given = read_transforms(args.init)
        if sorted(given) != list(range(1, len(sets) + 1)):
            raise TransformSchemaError(
                f"{args.init}: has views {sorted(given)}, expected 1..{len(sets)}."
            )
        initial = ModelParams(tuple(given[k] for k in range(1, len(sets) + 1)))
    report = register(sets, initial=initial, config=config)
    write_transforms(report.transforms, args.out)
    if args.trace is not None:
        write_trace(report, args.trace)
    if args.emit_aligned is not None:
        os.makedirs(args.emit_aligned, exist_ok=True)
        for point_set, transform in zip(full, report.transforms):
            path = os.path.join(args.emit_aligned, f"aligned_{point_set.view_id:02d}.ply")
            write_ply(point_set.transformed(transform), path)
    if args.plot is not None:
        _save_figure("convergence", report, args.plot)
    print(f"config: {report.config.as_dict()}")
    print(f"d_r: {report.resolution:.6g}")
    print(f"sigma0: {report.initial_sigma2 ** 0.5:.6g}")
    print(f"iterations: {report.iterations}")
    print(f"sigma: {report.sigma2 ** 0.5:.6g}")
    print(f"termination: {report.termination}")
    print(f"transforms: {args.out}")
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    """Generate a scene directory."""
    if args.manifest is not None:
        scene = scene_from_manifest(read_json(args.manifest))
    else:
        scene = generate_scene(args.surface, args.views, args.points, args.overlap, args.seed)
    save_scene(scene, args.out)
    print(f"{scene.surface}: {scene.views} views, d_r = {scene.resolution:.6g}, written to {args.out}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    """Run one experiment protocol and write its CSV and JSON reports."""
    if args.repeats < 1:
        raise ValueError(f"--repeats must be >= 1, got {args.repeats}.")
    if args.scene is not None:
        scene = load_scene(args.scene)
    else:
        scene = generate_scene(args.surface, args.views, args.points, args.overlap, args.seed)
    config = config_from_args(args)
    common = dict(repeats=args.repeats, config=config, seed=args.seed, workers=args.workers)
    report: ExperimentReport
    if args.protocol == "robustness":
        levels = rotation_levels(args.levels or DEFAULT_ROTATION_LEVELS, translation=args.translation)
        report = run_robustness_experiment(scene, levels, **common)
    elif args.protocol == "translation":
        rotation = 0.01 if args.rotation is None else args.rotation
        levels = translation_levels(args.levels or DEFAULT_TRANSLATION_LEVELS, rotation=rotation)
        report = run_robustness_experiment(scene, levels, protocol="translation", **common)
    else:
        start = PerturbationSpec(0.02 if args.rotation is None else args.rotation, args.translation)
        if args.protocol == "noise":
            report = run_noise_experiment(
                scene,
                args.snr,
                outlier_fraction=args.outliers,
                perturbation=start,
                **common,
            )
        else:
            report = run_dof_sweep(scene, args.dofs, perturbation=start, **common)
    report.to_csv(args.csv)
    report.to_json(args.json)
    if args.plot is not None:
        _save_figure("errors", report, args.plot)
    summary = report.summary()[["mode", "level", "repeats", "failures", "e_r", "e_t", "iters_mean"]]
    print(summary.to_string(index=False))
    print(f"trials: {args.csv} ({report.failures} failed), summary: {args.json}")
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Entry point of the `stmmreg` command.

    Args:
        argv (Optional[Sequence[str]], optional): arguments without the program
            name. Defaults to `sys.argv[1:]`.

    Returns:
        int: exit code.
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s %(name)s %(levelname)s: %(message)s")
    try:
        return args.handler(args)
    except DegenerateGeometryError as err:
        logger.error("Degenerate geometry: %s", err)
        print(f"stmmreg: degenerate geometry: {err}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (PlyFormatError, TransformSchemaError, SceneError, RegistrationInputError, OSError, ValueError) as err:
        print(f"stmmreg: error: {err}", file=sys.stderr)
        return EXIT_INPUT
