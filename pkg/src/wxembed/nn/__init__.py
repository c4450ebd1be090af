"""Spectral-transformer building blocks with hand-written backward passes."""

from .models import ModelConfig, count_params, count_params_breakdown, init_params
from .params import ParamSet

__all__ = ["ModelConfig", "ParamSet", "count_params", "count_params_breakdown", "init_params"]
