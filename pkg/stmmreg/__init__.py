"""stmmreg: joint rigid registration of multi-view point sets by EM over Student's-t mixtures."""
# import different modules.
# from . import cli, evaluation, geometry, io, plot, solver, spatial, stmm, time, unc
from ._version import __version__
