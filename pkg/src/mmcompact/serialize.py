"""JSON files for spaces, functions, families and partial functions.

Python's ``json`` writes floats with ``repr``, which round-trips doubles
exactly, so saved files reload bit-identically.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import MMCompactError, ParseError, PreconditionError, SpaceError
from .lipschitz import PartialFunction
from .lp import FunctionFamily, LpFunction
from .space import MetricMeasureSpace, build_space


def dumps(obj) -> str:
    """Canonical JSON text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def read_json(path: str | Path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ParseError(f"{path}: expected a JSON object")
    return data


def write_text(path: str | Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def space_to_dict(space: MetricMeasureSpace) -> dict:
    """Explicit form of any space (distance matrix and weights)."""
    out = {"kind": "explicit", "dist": space.dist.tolist(), "weights": space.weight.tolist()}
    if space.name is not None:
        out["name"] = space.name
    return out


def load_space(path: str | Path) -> MetricMeasureSpace:
    data = read_json(path)
    try:
        return build_space(data)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, MMCompactError):
            raise
        raise SpaceError(f"{path}: {exc}") from None


def function_to_dict(f: LpFunction) -> dict:
    return {"space_hash": f.space.hash, "values": f.values.tolist()}


def family_to_dict(family: FunctionFamily) -> dict:
    return {"space_hash": family.space.hash, "members": [f.values.tolist() for f in family]}


def _check_hash(data: dict, space: MetricMeasureSpace, path) -> None:
    h = data.get("space_hash")
    if h is not None and h != space.hash:
        raise PreconditionError(f"{path}: space_hash does not match the loaded space")


def load_function(path: str | Path, space: MetricMeasureSpace) -> LpFunction:
    data = read_json(path)
    _check_hash(data, space, path)
    if "values" not in data:
        raise ParseError(f"{path}: function file needs 'values'")
    return LpFunction(space, data["values"])


def load_family(path: str | Path, space: MetricMeasureSpace) -> FunctionFamily:
    data = read_json(path)
    _check_hash(data, space, path)
    members = data.get("members")
    if not isinstance(members, list):
        raise ParseError(f"{path}: family file needs a 'members' list")
    return FunctionFamily(space, members)


def partial_to_dict(partial: PartialFunction) -> dict:
    return {"domain": partial.domain.tolist(),
            "values": partial.values.tolist(), "L": partial.L}


def load_partial(path: str | Path, space: MetricMeasureSpace) -> PartialFunction:
    data = read_json(path)
    try:
        return PartialFunction(space, data["domain"], data["values"], float(data["L"]))
    except KeyError as exc:
        raise ParseError(f"{path}: partial function needs {exc.args[0]!r}") from None
