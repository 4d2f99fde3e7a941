"""Access to the bundled spherical t-design tables (d = 2).

The tables are antipodally symmetric configurations generated offline by
minimising the even-degree Weyl sums to machine precision (see
``tools/generate_designs.py`` in the repository) and validated so that
``W_n <= 1e-8 N^2`` for every n <= t.
"""

from __future__ import annotations

import json
from importlib import resources

from .pointset import PointSet, load_pointset
from .structure import PointSetSequence

__all__ = ["bundled_design_index", "load_bundled_design", "bundled_design_sequence"]


def _data_root():
    return resources.files("hyperuni") / "data" / "designs"


def bundled_design_index() -> list[dict]:
    """Entries ``{"t": int, "n": int, "file": str}`` sorted by t."""
    with (_data_root() / "index.json").open("r", encoding="utf-8") as fh:
        payload = json.load(fh)
    return sorted(payload["designs"], key=lambda e: e["t"])


def load_bundled_design(t: int) -> PointSet:
    """The bundled design of strength exactly t (KeyError if absent)."""
    for entry in bundled_design_index():
        if entry["t"] == t:
            path = _data_root() / entry["file"]
            with resources.as_file(path) as p:
                X = load_pointset(p)
            return PointSet(
                X.points,
                provenance={"generator": "bundled-design", "t": t, "n": entry["n"]},
            )
    raise KeyError(f"no bundled design with t={t}")


def bundled_design_sequence(t_min: int = 2, t_max: int | None = None) -> PointSetSequence:
    """All bundled designs with t_min <= t (<= t_max) as an N-ordered sequence."""
    members = []
    for entry in bundled_design_index():
        if entry["t"] < t_min:
            continue
        if t_max is not None and entry["t"] > t_max:
            continue
        members.append(load_bundled_design(entry["t"]))
    if not members:
        raise ValueError("no bundled designs in the requested range")
    return PointSetSequence(tuple(members), label="bundled-designs")
