"""Plotting Utilities Module.

Figures for registration runs and experiments, drawn with a consistent
style: the Q trajectory of one run, and box plots of the rotation error per
disturbance level and solver mode.

Example:
    Convergence curve of a run::

        from stmmreg.plot import plot_defaults, plot_convergence

        plot_defaults()
        fig, ax = plot_convergence(report)
        fig.savefig("q.png")
"""

from typing import Optional, Tuple
import matplotlib
import matplotlib.pyplot as plt
import seaborn as sns
from .evaluation import ExperimentReport
from .solver import RegistrationReport
from .unc import mean_std, tex_uf

REPORT_WIDTH: float = 398.3386  # in points
# Standard color list
STD_CLR_LIST = [
    "#4d2923ff",
    "#494f1fff",
    "#38734bff",
    "#498489ff",
    "#8481baff",
    "#c286b2ff",
    "#d7a4a3ff",
]
PALETTE = sns.color_palette(STD_CLR_LIST)


def get_dim(
    width: float = REPORT_WIDTH,
    fraction_of_line_width: float = 1,
    ratio: float = (5**0.5 - 1) / 2,
) -> Tuple[float, float]:
    """Return figure width, height in inches to avoid scaling in latex.

    Args:
        width (float, optional): Textwidth of the report in points.
            Defaults to `REPORT_WIDTH`.
        fraction_of_line_width (float, optional): Fraction of the document width
            which you wish the figure to occupy. Defaults to 1.
        ratio (float, optional): Fraction of figure width that the figure height
            should be. Defaults to (5 ** 0.5 - 1)/2.

    Returns:
        Tuple[float, float]: Dimensions of figure in inches.

    Example::
        >>> from stmmreg.plot import get_dim
        >>> dim_tuple = get_dim(fraction_of_line_width=1, ratio=(5 ** 0.5 - 1) / 2)
        >>> print("({:.2f},".format(dim_tuple[0]), "{:.2f})".format(dim_tuple[1]))
        (5.51, 3.41)
    """
    fig_width_in = width * fraction_of_line_width / 72.27
    return (fig_width_in, fig_width_in * ratio)


def plot_defaults(dpi: int = 300) -> None:
    """
    Apply the plotting style: serif text, 10 pt labels, the standard palette.

    Args:
        dpi (int, optional): figure and savefig dpi. Defaults to 300.

    Example::
        >>> from stmmreg.plot import plot_defaults
        >>> plot_defaults()
    """
    matplotlib.rcParams.update(
        {
            "font.family": "STIXGeneral",
            "mathtext.fontset": "cm",
            "axes.formatter.use_mathtext": True,
            "axes.labelsize": 10,
            "font.size": 10,
            "legend.fontsize": 10,
            "xtick.labelsize": 9,
            "ytick.labelsize": 9,
            "figure.dpi": dpi,
            "savefig.dpi": dpi,
            "figure.figsize": get_dim(),
            "figure.autolayout": True,
            "lines.linewidth": 1.0,
            "text.usetex": False,
        }
    )
    sns.set_palette(PALETTE)


def plot_convergence(
    report: RegistrationReport, ax: Optional[matplotlib.axes.Axes] = None
) -> Tuple[matplotlib.figure.Figure, matplotlib.axes.Axes]:
    """
    Q minus its first value against the sweep number.

    Args:
        report (RegistrationReport): finished run.
        ax (Optional[matplotlib.axes.Axes], optional): axes to draw on.
            Defaults to a new figure.

    Returns:
        Tuple[matplotlib.figure.Figure, matplotlib.axes.Axes]: the figure and axes.
    """
    if ax is None:
        fig, ax = plt.subplots()
    else:
        fig = ax.figure
    trace = report.trace()
    ax.plot(trace["iteration"], report.q_relative(), color=STD_CLR_LIST[2], marker=".")
    ax.set_xlabel("Sweep")
    ax.set_ylabel(r"$Q - Q_1$")
    ax.set_title(f"{report.termination} after {report.iterations} sweeps")
    return fig, ax


def plot_errors(
    report: ExperimentReport, ax: Optional[matplotlib.axes.Axes] = None
) -> Tuple[matplotlib.figure.Figure, matplotlib.axes.Axes]:
    """
    Box plot of the rotation error per level, one hue per solver mode.

    Failed trials are left out. The title carries the overall mean ± std.

    Args:
        report (ExperimentReport): experiment trials.
        ax (Optional[matplotlib.axes.Axes], optional): axes to draw on.
            Defaults to a new figure.

    Returns:
        Tuple[matplotlib.figure.Figure, matplotlib.axes.Axes]: the figure and axes.
    """
    if ax is None:
        fig, ax = plt.subplots()
    else:
        fig = ax.figure
    trials = report.trials[report.trials["status"] != "failed"]
    palette = STD_CLR_LIST[: max(trials["mode"].nunique(), 1)]
    sns.boxplot(data=trials, x="level", y="e_r_rad", hue="mode", palette=palette, ax=ax)
    ax.set_xlabel("Level")
    ax.set_ylabel(r"$e_R$ [rad]")
    ax.set_title(f"{report.protocol}: " + r"$e_R = $" + tex_uf(mean_std(trials["e_r_rad"])))
    return fig, ax
