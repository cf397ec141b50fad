"""Batch driver: configuration, pipeline, plots and the command-line entry point."""

from .config import RunConfig, load_config, default_config
from .pipeline import RunReport, run_pipeline, robustness_suite, moderation_suite

__all__ = ["RunConfig", "load_config", "default_config", "RunReport", "run_pipeline",
           "robustness_suite", "moderation_suite"]
