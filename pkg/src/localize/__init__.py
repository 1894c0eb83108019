"""Stochastic-localization decompositions and mean-field bounds for small spin systems."""
__version__ = "0.1.0"

from .bounds import best_bound, lemma41_bound, rank_bound, waterfill_S
from .localization import (LocalizationConfig, Stopping, decompose, sample_decomposition,
                           verify_theorem)
from .measure import AtomicMeasure, covariance, entropy, gibbs_measure, mean, tilt
from .meanfield import mf_objective, mf_optimize
from .modelio import load_measure, load_model, save_measure, save_model
from .models import SpinModel, exact_log_z, hamiltonian

__all__ = [
    "AtomicMeasure", "LocalizationConfig", "SpinModel", "Stopping", "best_bound", "covariance",
    "decompose", "entropy", "exact_log_z", "gibbs_measure", "hamiltonian", "lemma41_bound",
    "load_measure", "load_model", "mean", "mf_objective", "mf_optimize", "rank_bound",
    "sample_decomposition", "save_measure", "save_model", "tilt", "verify_theorem", "waterfill_S",
]
