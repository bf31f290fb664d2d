"""Amplitude-exact simulation of single-photon interference, interaction-free
measurement and photon-heralded entanglement of distant atoms."""

from .experiments import ExperimentConfig, ExperimentReport, run, SCENARIOS

__all__ = ["ExperimentConfig", "ExperimentReport", "run", "SCENARIOS"]
__version__ = "0.1.0"
