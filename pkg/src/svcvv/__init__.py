"""Subjective-vertical-conflict motion sickness model with a visual vertical pathway."""

from .core import GRAVITY, DivergenceError, ImuSample, ImuSeries, SvcError, TimeSeries
from .params import PRESETS, ParameterSet, load_params, preset
from .svc_model import ModelConfig, ModelState, TrialResult, init_state, run_trial, step

__all__ = [
    "GRAVITY",
    "DivergenceError",
    "ImuSample",
    "ImuSeries",
    "ModelConfig",
    "ModelState",
    "PRESETS",
    "ParameterSet",
    "SvcError",
    "TimeSeries",
    "TrialResult",
    "init_state",
    "load_params",
    "preset",
    "run_trial",
    "step",
]

__version__ = "0.1.0"
