"""Invariant densities of noisy chaotic maps and their response to noise.

The submodules are importable on their own; the most used names are
re-exported here.
"""
from . import _backend
from .billiard import BilliardState, StadiumGeometry, collide, perturb_theta, reverse
from .eigen import EigenResult, GapEstimate, dominant_eigenpair, spectral_gap
from .errors import *  # noqa: F401,F403
from .experiments import ExperimentConfig, SweepResult, emit_outputs, run_preset
from .grid import DensityVector, Grid, build_grid, integrate, l1_distance, normalize
from .maps import MapModel, make_map
from .montecarlo import (Histogram, ObservableEstimate, StadiumObservable,
                         autocorrelation_time, histogram_invariant, histogram_std,
                         l1_from_histograms, stadium_phi)
from .scaling import (PowerLawFit, fit_power_law, gamma_error_from_counting,
                      gamma_error_from_value_errors, richardson)
from .transfer import (NoiseKernel, NoisyOperator, apply_averaging, apply_noisy,
                       apply_transfer, averaging_operator, heuristic_deviation,
                       transfer_operator)

backend = _backend.NAME

__version__ = "0.1.0"
