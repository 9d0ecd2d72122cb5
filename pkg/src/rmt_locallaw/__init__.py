"""Desk-scale numerical checks for random-matrix spectral laws.

Generalized Wigner sampling, semicircle-law closed forms, resolvent
diagnostics with exact self-consistent identities, Dyson Brownian motion,
four-moment matching and bulk-universality statistics, wrapped in a
reproducible experiment runner.
"""

from . import dbm, ensembles, linalg, locallaw, moments, semicircle, stats
from .runner import ARTIFACT_VERSION, ExperimentConfig, RunManifest, parse_config, report, run

__version__ = ARTIFACT_VERSION

__all__ = [
    "dbm",
    "ensembles",
    "linalg",
    "locallaw",
    "moments",
    "semicircle",
    "stats",
    "ExperimentConfig",
    "RunManifest",
    "parse_config",
    "run",
    "report",
    "ARTIFACT_VERSION",
    "__version__",
]
