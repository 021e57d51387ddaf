"""Bundled example data."""

from __future__ import annotations

import json
from importlib import resources

from .io import build_model
from .options import SolverOptions

__all__ = ["six_cities_paths", "load_six_cities", "SIX_CITIES_RESPONSES"]

SIX_CITIES_RESPONSES = ("wheeze_7", "wheeze_8", "wheeze_9", "wheeze_10")


def six_cities_paths():
    """Filesystem paths of the Six Cities CSV and its shared-coefficient mapping."""
    root = resources.files("mvprobit") / "data"
    return str(root / "six_cities.csv"), str(root / "six_cities_mapping.json")


def load_six_cities(options=None):
    """Six Cities wheeze data (537 children, ages 7-10) as a shared-coefficient model.

    The four components share an intercept, age (centred at 9), maternal
    smoking and the smoking-by-age interaction.
    """
    csv_path, map_path = six_cities_paths()
    with open(map_path, encoding="utf-8") as fh:
        mapping = json.load(fh)
    config = {
        "data": csv_path,
        "response": list(SIX_CITIES_RESPONSES),
        "shared_coef": mapping,
        "solver": (options or SolverOptions()).to_dict(),
    }
    return build_model(config)
