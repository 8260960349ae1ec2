"""Experiment orchestration: ingestion, synthetic oracles, runs, reports."""

from .config import ExperimentConfig
from .io import fuse, load_samples, write_samples
from .report import emit_report
from .runner import ExperimentReport, resolve_partition, run_experiment
from .synth import SyntheticOracle, SyntheticSpec, generate_synthetic

__all__ = [
    "ExperimentConfig",
    "ExperimentReport",
    "SyntheticOracle",
    "SyntheticSpec",
    "emit_report",
    "fuse",
    "generate_synthetic",
    "load_samples",
    "resolve_partition",
    "run_experiment",
    "write_samples",
]
