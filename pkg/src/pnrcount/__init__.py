"""Counting photon emitters from photon-number-resolved detection data."""
from ._backend import backend_name
from .model import (
    BrightnessModel,
    EmitterModel,
    ModelError,
    PhotonHistogram,
    g2_zero,
    moments,
    pmf_beta,
    pmf_gamma,
    pmf_poisson,
    pmf_theta,
    sample_histogram,
    to_beta,
    to_theta,
)

__version__ = "0.1.0"
