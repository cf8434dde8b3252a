"""Checked-in parameter regimes found by sweeps (``data/fixtures.json``)."""
from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

from .model import ModelParams


def load(path: str | Path | None = None) -> dict:
    if path is None:
        text = resources.files("qbl").joinpath("data/fixtures.json").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return json.loads(text)


def params(name: str, data: dict | None = None, **changes) -> ModelParams:
    """ModelParams of a named regime, optionally with overrides."""
    data = data or load()
    d = dict(data["regimes"][name]["params"])
    d.update(changes)
    return ModelParams(**d)
