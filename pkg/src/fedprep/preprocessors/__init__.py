"""Federated preprocessors: fit from aggregated statistics, transform locally."""

from .fit import check_supported, expected_rounds, fit_local, rounds_match, run_fit, supported_modes
from .spec import KINDS, FitParameters, PreprocessorSpec
from .transform import transform

__all__ = [
    "KINDS",
    "FitParameters",
    "PreprocessorSpec",
    "check_supported",
    "expected_rounds",
    "fit_local",
    "rounds_match",
    "run_fit",
    "supported_modes",
    "transform",
]
