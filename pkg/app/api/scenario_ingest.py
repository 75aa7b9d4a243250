"""Scenario and gain-file ingestion for DelaySlide.

A scenario is a single JSON document whose field names mirror
``ScenarioConfig``; every field is optional and defaults to the
three-integrator study (n=3, T=10, h=5e-3, x0=[0.1, 1, 3], eta=0.1,
chi=1.1, V_min=0.1, delayed controller, seed 42).

The ``gains`` field takes one of

- ``"paper"``: the embedded printed matrices
- an inline document with (X, Y, rho1, rho2, Delta) or (P, K, rho1[, rho2])
- a path to a gains JSON file, resolved relative to the scenario file

Malformed JSON and validation failures are raised as ``ConfigError`` so
callers can map them to a single exit code.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Union

from pydantic import ValidationError

from app.api.gains import GainSet
from app.api.ilf_core import IlfError
from app.api.sim import GainDocument, ScenarioConfig, paper_gain_set

logger = logging.getLogger(__name__)

MAX_CONFIG_BYTES = 1_000_000


class ConfigError(IlfError):
    """Raised when a scenario or gain document cannot be read or validated."""


def _read_json(path: Union[str, Path]) -> Any:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"File does not exist: {p}")
    if p.stat().st_size > MAX_CONFIG_BYTES:
        raise ConfigError(f"{p.name} is larger than {MAX_CONFIG_BYTES} bytes")
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"Failed to parse {p.name}: {exc}") from exc


def _resolve_gains(value: Any, base_dir: Path) -> Any:
    if isinstance(value, str) and value != "paper":
        gains_path = Path(value)
        if not gains_path.is_absolute():
            gains_path = base_dir / gains_path
        doc = _read_json(gains_path)
        if not isinstance(doc, dict):
            raise ConfigError(f"{gains_path.name} must hold a JSON object")
        return doc
    return value


def scenario_from_dict(
    doc: Dict[str, Any], base_dir: Union[str, Path] = ".", seed: Optional[int] = None
) -> ScenarioConfig:
    """Validate a scenario mapping; ``seed`` overrides the document's seed."""
    if not isinstance(doc, dict):
        raise ConfigError("a scenario must be a JSON object")
    data = dict(doc)
    if "gains" in data:
        data["gains"] = _resolve_gains(data["gains"], Path(base_dir))
    if seed is not None:
        data["seed"] = seed
    try:
        cfg = ScenarioConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"invalid scenario: {exc}") from exc
    logger.debug("scenario %s validated (n=%d, steps=%d)", cfg.name, cfg.n, cfg.steps)
    return cfg


def load_scenario(path: Union[str, Path], seed: Optional[int] = None) -> ScenarioConfig:
    """Read and validate a scenario JSON file.

    Raises
    - ConfigError: if the file is missing, is not JSON, or fails validation
    """
    p = Path(path)
    return scenario_from_dict(_read_json(p), base_dir=p.parent, seed=seed)


def resolve_gain_set(cfg: ScenarioConfig) -> GainSet:
    """The scenario's GainSet; shape and domain problems become ConfigError."""
    try:
        return cfg.gain_set()
    except (IlfError, ValueError) as exc:
        raise ConfigError(f"invalid gains for scenario {cfg.name}: {exc}") from exc


def load_gain_file(path: Union[str, Path], Delta: float = 1.0) -> GainSet:
    """Read a gains document in (X, Y) or (P, K) form; ``"paper"`` selects the embedded gains.

    ``Delta`` is used when the document does not carry its own bound.
    """
    if str(path) == "paper":
        return paper_gain_set(Delta)
    doc = _read_json(path)
    try:
        return GainDocument.model_validate(doc).to_gain_set(default_delta=Delta)
    except (IlfError, ValueError) as exc:
        raise ConfigError(f"invalid gains document {Path(path).name}: {exc}") from exc


__all__ = [
    "MAX_CONFIG_BYTES",
    "ConfigError",
    "scenario_from_dict",
    "load_scenario",
    "resolve_gain_set",
    "load_gain_file",
]
