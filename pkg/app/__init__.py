"""Package shim that lazily re-exports the command-line runner.

Importing ``app`` stays cheap and free of circular imports: ``main`` (and
with it scipy and pandas) is only loaded when ``app.run_cli`` is accessed.
"""
from importlib import import_module
from typing import Any

__version__ = "0.1.0"
__all__ = ["run_cli", "__version__"]


def __getattr__(name: str) -> Any:
    if name == "run_cli":
        mod = import_module("main")
        return getattr(mod, "run_cli")
    raise AttributeError(f"module {__name__} has no attribute {name}")
