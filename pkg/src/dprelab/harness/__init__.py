"""Configuration, parallel replica scheduling and JSON Lines records."""

from .config import ExperimentConfig, build_config, canonical_json, load_config_file
from .runner import aggregate_bytes, read_records, replay, run, run_tasks, write_records
from .summarize import summarize, summarize_records

__all__ = [
    "ExperimentConfig", "build_config", "canonical_json", "load_config_file",
    "aggregate_bytes", "read_records", "replay", "run", "run_tasks", "write_records",
    "summarize", "summarize_records",
]
