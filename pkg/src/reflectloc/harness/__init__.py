"""Experiment harness: configs, simulation runs, replay and error reports."""

from .config import PROFILES, PipelineParameters, RunConfig, load_run_config, make_run_config
from .metrics import ErrorReport, report
from .pipeline import ExperimentResult, Localizer, replay, run_experiment, run_many

__all__ = [
    "PROFILES", "PipelineParameters", "RunConfig", "load_run_config", "make_run_config",
    "ErrorReport", "report", "ExperimentResult", "Localizer", "replay", "run_experiment", "run_many",
]
