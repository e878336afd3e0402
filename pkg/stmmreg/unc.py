"""Uncertainties Utilities Module.

Repeated registration trials are summarised as mean ± standard deviation,
carried as `uncertainties.ufloat` values.
"""

from typing import Sequence
import numpy as np
import matplotlib
from uncertainties import ufloat
from uncertainties.core import AffineScalarFunc


def mean_std(values: Sequence[float]) -> AffineScalarFunc:
    """
    Mean ± population standard deviation of the finite values.

    Args:
        values (Sequence[float]): samples; NaNs (failed trials) are skipped.

    Returns:
        AffineScalarFunc: ufloat(mean, std), or ufloat(nan, nan) when no
            finite value is left.

    Example::
        >>> from stmmreg.unc import mean_std
        >>> uf = mean_std([1.0, 3.0, float("nan")])
        >>> uf.n, uf.s
        (2.0, 1.0)
    """
    values = np.asarray(values, dtype=float)
    values = values[np.isfinite(values)]
    if values.size == 0:
        return ufloat(np.nan, np.nan)
    return ufloat(float(np.mean(values)), float(np.std(values)))


def tex_uf(
    ufloat_input: AffineScalarFunc,
    bracket: bool = False,
    force_latex: bool = False,
    exponential: bool = True,
) -> str:
    """
    Format a ufloat for a figure label with matching decimal places.

    Args:
        ufloat_input (AffineScalarFunc): The uncertainties ufloat object.
        bracket (bool, optional): Whether to put brackets around the value.
            Defaults to False.
        force_latex (bool, optional): Whether to force latex output.
            Defaults to False. If false will check matplotlib.rcParams first.
        exponential (bool, optional): Whether to put in scientific notation.
            Defaults to True.

    Returns:
        str: String ready to be added to a graph label.

    Example usage::
        >>> from uncertainties import ufloat
        >>> from stmmreg.unc import tex_uf
        >>> label = tex_uf(ufloat(2, 0.06), bracket=True, force_latex=True)
        >>> label.startswith("$\\\\left(") and "pm" in label
        True
    """
    nominal, std = ufloat_input.n, ufloat_input.s
    if not (np.isfinite(nominal) and np.isfinite(std)):
        return "nan"
    if nominal != 0.0 and exponential and round(np.log10(abs(nominal))) != 0:
        exponential_str = "e"
    else:
        exponential_str = ""

    if nominal == 0.0 or std == 0.0:
        decimal_point = 0
    else:
        # one significant figure on the error; both agree on decimal places.
        decimal_point = max(round(np.log10(abs(nominal)) - np.log10(abs(std))), 0)
        if str(nominal)[0] == "1":
            decimal_point += 1 if exponential_str == "e" else 2

    if matplotlib.rcParams["text.usetex"] is True or force_latex:
        body = "{:." + str(decimal_point) + exponential_str + "L}"
        if bracket:
            return ("$\\left( " + body + " \\right)$").format(ufloat_input)
        return ("$" + body + "$").format(ufloat_input)
    body = "{:." + str(decimal_point) + exponential_str + "P}"
    if bracket:
        body = "(" + body + ")"
    return body.format(ufloat_input)


def summary_text(values: Sequence[float]) -> str:
    """
    Plain `mean±std` text of the finite values, as written in report summaries.

    Example::
        >>> from stmmreg.unc import summary_text
        >>> summary_text([0.5, 1.5])
        '1.0±0.5'
    """
    uf = mean_std(values)
    if not np.isfinite(uf.n):
        return "nan"
    if uf.s == 0.0:
        return f"{uf.n:.6g}±0"
    return "{:.1uP}".format(uf)
