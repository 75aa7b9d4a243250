"""Artifact emission for DelaySlide runs.

Trajectories are written as CSV with 17 significant digits so that a file
re-read with ``read_trajectory_csv`` restores every double exactly. Metric
bundles, monitor reports and the run manifest are JSON; comparison tables
are CSV with one row per metric. A small self-contained HTML summary is
rendered from a Jinja2 template string.

Example usage::

    out = ArtifactDir("runs/demo")
    out.write_trajectory("trajectory.csv", traj)
    out.write_json("metrics.json", build_json_report(metrics))
    out.write_manifest(manifest)
"""

from __future__ import annotations

import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Union

import numpy as np
import pandas as pd
from jinja2 import Environment, Template
from pydantic import BaseModel, Field

from app import __version__
from app.api.ilf_core import IlfError
from app.api.sim import Trajectory

logger = logging.getLogger(__name__)

TOOL_VERSION = __version__
FLOAT_FORMAT = "%.17g"


class ArtifactError(IlfError):
    """Raised when an artifact cannot be written or read back."""


DEFAULT_TEMPLATE = """
<!doctype html>
<html lang="en">
  <head>
    <meta charset="utf-8">
    <meta name="viewport" content="width=device-width, initial-scale=1">
    <title>{{ title }}</title>
    <style>
      body { font-family: Arial, sans-serif; margin: 2rem; }
      h1 { font-size: 1.5rem; }
      .section { margin-top: 1rem; }
      .fail { color: #b00020; }
      table { border-collapse: collapse; }
      td, th { border: 1px solid #ddd; padding: 6px 8px; }
    </style>
  </head>
  <body>
    <h1>{{ title }}</h1>
    <div class="section">
      <h2>Scenario</h2>
      <ul>
        <li>Dimension: {{ summary.n }}</li>
        <li>Steps: {{ summary.steps }} (h = {{ summary.h }})</li>
        <li>Seed: {{ summary.seed }}</li>
        <li>Controllers: {{ summary.controllers | join(", ") }}</li>
      </ul>
    </div>
    {% if certificate %}
    <div class="section">
      <h2>LMI certificate</h2>
      <table>
        <thead><tr><th>Condition</th><th>Result</th><th>min eig</th><th>max eig</th></tr></thead>
        <tbody>
        {% for c in certificate.conditions %}
          <tr><td>{{ c.condition }}</td>
              <td class="{{ '' if c.passed else 'fail' }}">{{ "PASS" if c.passed else "FAIL" }}</td>
              <td>{{ "%.4g" | format(c.min_eig) }}</td><td>{{ "%.4g" | format(c.max_eig) }}</td></tr>
        {% endfor %}
        </tbody>
      </table>
    </div>
    {% endif %}
    <div class="section">
      <h2>Metrics</h2>
      <table>
        <thead><tr><th>Metric</th>{% for name in metrics %}<th>{{ name }}</th>{% endfor %}</tr></thead>
        <tbody>
        {% for key in metric_names %}
          <tr><td>{{ key }}</td>{% for name in metrics %}<td>{{ "%.6g" | format(metrics[name][key]) }}</td>{% endfor %}</tr>
        {% endfor %}
        </tbody>
      </table>
    </div>
    {% if monitors %}
    <div class="section">
      <h2>Monitors</h2>
      <ul>
      {% for name, m in monitors.items() %}
        <li>{{ name }}: {{ m.triggered_steps }} triggered of {{ m.checked_steps }},
            {{ m.violations | length }} violations</li>
      {% endfor %}
      </ul>
    </div>
    {% endif %}
  </body>
</html>
"""


class ArtifactRecord(BaseModel):
    path: str
    sha256: str


class RunManifest(BaseModel):
    """Everything needed to re-run and audit a batch of scenarios."""

    config_path: Optional[str] = None
    output_dir: str
    tool_version: str = TOOL_VERSION
    prng: str
    scenarios: List[Dict[str, Any]] = Field(default_factory=list)
    steps: Dict[str, int] = Field(default_factory=dict)
    signal_digests: Dict[str, str] = Field(default_factory=dict)
    certificate_passed: Optional[bool] = None
    wall_clock_seconds: float = 0.0
    artifacts: List[ArtifactRecord] = Field(default_factory=list)


def sha256_file(path: Union[str, Path]) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def build_json_report(metrics: Mapping[str, Any], **sections: Any) -> Dict[str, Any]:
    """Wrap a metric bundle and optional sections (certificate, monitor, ...) into one document."""
    report: Dict[str, Any] = {"metrics": dict(metrics)}
    report.update({k: v for k, v in sections.items() if v is not None})
    return {"report": _jsonable(report)}


def comparison_frame(metrics: Mapping[str, Mapping[str, float]]) -> pd.DataFrame:
    """Side-by-side table with columns ``metric, <controller>...``."""
    names = list(metrics)
    keys = list(next(iter(metrics.values()))) if names else []
    rows = [[key] + [metrics[name][key] for name in names] for key in keys]
    return pd.DataFrame(rows, columns=["metric"] + names)


def long_frame(traj: Trajectory) -> pd.DataFrame:
    """Long layout ``t, channel, value`` for plotting scripts."""
    wide = traj.to_frame()
    long = wide.melt(id_vars="t", var_name="channel", value_name="value")
    return long[["t", "channel", "value"]]


def read_trajectory_csv(path: Union[str, Path]) -> Trajectory:
    """Restore a Trajectory (without the internal delta vectors) from its CSV."""
    p = Path(path)
    try:
        df = pd.read_csv(p, float_precision="round_trip")
    except (OSError, ValueError) as exc:
        raise ArtifactError(f"Failed to read trajectory {p.name}: {exc}") from exc
    missing = {"t", "u", "V", "Psi", "d", "delta_norm", "w_norm"} - set(df.columns)
    if missing:
        raise ArtifactError(f"{p.name} lacks columns {sorted(missing)}")
    return Trajectory.from_frame(df, meta={"source": str(p)})


def render_html_report(
    summary: Mapping[str, Any],
    metrics: Mapping[str, Mapping[str, float]],
    certificate: Optional[Mapping[str, Any]] = None,
    monitors: Optional[Mapping[str, Mapping[str, Any]]] = None,
    template: Optional[Template] = None,
    title: str = "DelaySlide Report",
) -> str:
    """Render the run summary with the given Jinja2 template or the default."""
    if template is None:
        template = Environment().from_string(DEFAULT_TEMPLATE)
    names = list(next(iter(metrics.values()))) if metrics else []
    return template.render(
        title=title,
        summary=summary,
        metrics=metrics,
        metric_names=names,
        certificate=certificate,
        monitors=monitors or {},
    )


class ArtifactDir:
    """Output directory that remembers every file written through it."""

    def __init__(self, root: Union[str, Path]) -> None:
        self.root = Path(root)
        try:
            self.root.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ArtifactError(f"cannot create output directory {self.root}: {exc}") from exc
        self.written: List[Path] = []

    def _path(self, name: str) -> Path:
        p = self.root / name
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def _record(self, p: Path) -> Path:
        self.written.append(p)
        logger.debug("wrote %s", p)
        return p

    def write_text(self, name: str, text: str) -> Path:
        try:
            p = self._path(name)
            p.write_text(text, encoding="utf-8")
        except OSError as exc:
            raise ArtifactError(f"cannot write {name}: {exc}") from exc
        return self._record(p)

    def write_json(self, name: str, obj: Any) -> Path:
        return self.write_text(name, json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")

    def write_frame(self, name: str, df: pd.DataFrame) -> Path:
        try:
            p = self._path(name)
            df.to_csv(p, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        except OSError as exc:
            raise ArtifactError(f"cannot write {name}: {exc}") from exc
        return self._record(p)

    def write_trajectory(self, name: str, traj: Trajectory) -> Path:
        return self.write_frame(name, traj.to_frame())

    def write_manifest(self, manifest: RunManifest, name: str = "manifest.json") -> Path:
        """Hash every recorded artifact into ``manifest`` and write it last."""
        records = [
            ArtifactRecord(path=p.relative_to(self.root).as_posix(), sha256=sha256_file(p)) for p in self.written
        ]
        final = manifest.model_copy(update={"artifacts": records})
        return self.write_text(name, final.model_dump_json(indent=2) + "\n")


__all__ = [
    "TOOL_VERSION",
    "ArtifactError",
    "DEFAULT_TEMPLATE",
    "ArtifactRecord",
    "RunManifest",
    "sha256_file",
    "build_json_report",
    "comparison_frame",
    "long_frame",
    "read_trajectory_csv",
    "render_html_report",
    "ArtifactDir",
]
