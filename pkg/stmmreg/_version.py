"""Module to store the __version__ string etc."""

__version__ = "0.1.1"
__project__ = "Multi-view point set registration with Student's-t mixtures"
__copyright__ = "2026, the stmmreg developers"
__author__ = "stmmreg developers"
