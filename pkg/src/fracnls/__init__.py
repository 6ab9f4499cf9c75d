"""Pseudospectral simulation and statistical verification for the periodic fractional cubic NLS.

Modules: :mod:`~fracnls.spectral` (fields, transforms, norms, nonlinearities),
:mod:`~fracnls.gibbs` (Gaussian / Gibbs sampling and renormalization
functionals), :mod:`~fracnls.dynamics` (time integration),
:mod:`~fracnls.resonance` (counting, Strichartz and Bourgain probes),
:mod:`~fracnls.experiments` (reported experiments) and :mod:`~fracnls.cli`.
"""

from .dynamics import EquationVariant, Trajectory, evolve
from .errors import AcceptanceStarvation, AliasingError, BlowupError, InsufficientSamplesError, TimeAliasingError
from .gibbs import GibbsSample, RenormConstants, alpha_N, sample_mu, sample_rho
from .report import ExperimentReport
from .spectral import DispersionSymbol, FourierState, ModelParams

__version__ = "0.1.0"

__all__ = [
    "ModelParams",
    "FourierState",
    "DispersionSymbol",
    "RenormConstants",
    "GibbsSample",
    "EquationVariant",
    "Trajectory",
    "ExperimentReport",
    "alpha_N",
    "sample_mu",
    "sample_rho",
    "evolve",
    "AliasingError",
    "TimeAliasingError",
    "BlowupError",
    "AcceptanceStarvation",
    "InsufficientSamplesError",
]
