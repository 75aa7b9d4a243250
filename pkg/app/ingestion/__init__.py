"""Facade package for scenario and gain ingestion.

Re-exports from `app.api.scenario_ingest` so callers can import
from `app.ingestion` for clearer project organization.
"""
from app.api.scenario_ingest import ConfigError, load_gain_file, load_scenario, resolve_gain_set, scenario_from_dict

__all__ = ["ConfigError", "load_gain_file", "load_scenario", "resolve_gain_set", "scenario_from_dict"]
