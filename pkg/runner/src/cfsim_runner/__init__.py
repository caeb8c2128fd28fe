"""Inference driver emitting cfsim prediction logs."""

__version__ = "0.1.0"

from .inference import RunnerJob, run_inference
from .models import resolve_model
