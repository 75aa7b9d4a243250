"""Facade package for run artifacts.

Re-exports the writers and readers of `app.api.reporting`: the artifact
directory, the manifest model, JSON/CSV/HTML builders and the trajectory
CSV reader.
"""
from app.api.reporting import (
    ArtifactDir,
    ArtifactError,
    RunManifest,
    build_json_report,
    comparison_frame,
    read_trajectory_csv,
    render_html_report,
)

__all__ = [
    "ArtifactDir",
    "ArtifactError",
    "RunManifest",
    "build_json_report",
    "comparison_frame",
    "read_trajectory_csv",
    "render_html_report",
]
