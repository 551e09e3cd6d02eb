"""Simulation laboratory for the frog model with death.

Active particles perform simple random walks on a rooted graph (the line,
a lattice, or a homogeneous tree), die according to a lifetime law, and
wake the sleeping particles they step on.  The package provides the exact
dynamics, the equivalent range-percolation construction under shared keyed
randomness, Galton-Watson comparison oracles, random-walk analytics, and
Monte Carlo estimators for the critical parameters, behind a FastAPI
service and a thin CLI.
"""

from ._version import __version__

__all__ = ["__version__"]
