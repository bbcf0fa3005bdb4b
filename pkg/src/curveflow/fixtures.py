"""Versioned numeric fixtures: pilot-frozen thresholds and regression values.

The shipped file lives at curveflow/data/thresholds.json; the environment
variable CURVEFLOW_FIXTURES (or an explicit path) overrides it.
"""

from __future__ import annotations

import json
import os
from importlib import resources
from typing import Any, Optional

__all__ = ["load_fixtures", "fixture_value"]


def load_fixtures(path: Optional[str] = None) -> dict:
    p = path or os.environ.get("CURVEFLOW_FIXTURES")
    if p:
        with open(p, "r", encoding="utf-8") as fh:
            return json.load(fh)
    ref = resources.files("curveflow").joinpath("data/thresholds.json")
    with ref.open("r", encoding="utf-8") as fh:
        return json.load(fh)


def fixture_value(*keys: str, fixtures: Optional[dict] = None) -> Any:
    """Walk nested keys; raise a readable error when a fixture is missing."""
    node: Any = fixtures if fixtures is not None else load_fixtures()
    for k in keys:
        if not isinstance(node, dict) or k not in node:
            raise KeyError(
                f"fixture {'/'.join(keys)} not found (stopped at {k!r}); "
                "regenerate or point CURVEFLOW_FIXTURES at a complete file"
            )
        node = node[k]
    return node
