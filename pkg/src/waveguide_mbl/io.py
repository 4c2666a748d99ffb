"""CSV and JSON writers with reproducibility headers.

Every CSV starts with ``#``-prefixed comment lines carrying the config
hash, master seed and ensemble counts, so any output file identifies the
run that made it. Values that are physically undefined (for example an
imbalance with no population left) are written as an empty field plus an
explicit 0/1 ``defined`` column, never as NaN text.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from typing import Mapping, Sequence

import numpy as np


def config_hash(config_dict: Mapping) -> str:
    canonical = json.dumps(config_dict, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def _format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isnan(v):
            return ""
        return repr(v)
    if isinstance(v, (np.floating,)):
        return _format_value(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def write_csv(path: str, columns: Mapping[str, Sequence], meta: Mapping | None = None) -> None:
    """Write tidy columns with a commented metadata header."""
    names = list(columns)
    lengths = {len(columns[n]) for n in names}
    if len(lengths) != 1:
        raise ValueError(f"column lengths differ: { {n: len(columns[n]) for n in names} }")
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for key in sorted(meta or {}):
            fh.write(f"# {key}: {meta[key]}\n")
        fh.write(",".join(names) + "\n")
        for row in zip(*(columns[n] for n in names)):
            fh.write(",".join(_format_value(v) for v in row) + "\n")


def write_json(path: str, payload: Mapping) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj)}")


def defined_column(values: Sequence[float | None]) -> tuple[list, list[int]]:
    """Split optionally-undefined values into (value-or-None, 0/1 flag) columns."""
    vals = []
    flags = []
    for v in values:
        if v is None or (isinstance(v, float) and math.isnan(v)):
            vals.append(None)
            flags.append(0)
        else:
            vals.append(float(v))
            flags.append(1)
    return vals, flags
