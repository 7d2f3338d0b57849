"""JSON reading and writing with a fixed float format.

Floats are written with 17 significant digits so that output is stable
across platforms and round-trips exactly. Infinities are written as the
strings ``"inf"`` and ``"-inf"`` and NaN as ``"nan"``, since JSON has no
literal for them.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .measures import JointDist
from .pmf import Pmf


def _float(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    s = "%.17g" % x
    if s in ("-0", "0"):
        return "0.0" if s == "0" else "-0.0"
    if "." not in s and "e" not in s and "n" not in s:
        s += ".0"
    return s


def _encode(obj, indent: int, level: int, out: list[str]) -> None:
    pad = "\n" + " " * (indent * (level + 1)) if indent else ""
    end = "\n" + " " * (indent * level) if indent else ""
    sep = "," if indent else ", "
    if isinstance(obj, (bool, np.bool_)):
        out.append("true" if obj else "false")
    elif obj is None:
        out.append("null")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(_float(float(obj)))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{")
        for i, (k, v) in enumerate(obj.items()):
            out.append((sep if i else "") + pad + json.dumps(str(k)) + ": ")
            _encode(v, indent, level + 1, out)
        out.append(end + "}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        items = obj.tolist() if isinstance(obj, np.ndarray) else obj
        if not items:
            out.append("[]")
            return
        flat = all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in items)
        out.append("[")
        for i, v in enumerate(items):
            if flat:
                out.append(", " if i else "")
            else:
                out.append((sep if i else "") + pad)
            _encode(v, indent, level + 1, out)
        out.append("]" if flat else end + "]")
    elif hasattr(obj, "to_dict"):
        _encode(obj.to_dict(), indent, level, out)
    else:
        raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    out: list[str] = []
    _encode(obj, indent, 0, out)
    return "".join(out)


def _revive(x):
    if isinstance(x, str) and x in ("inf", "-inf", "nan"):
        return float(x)
    if isinstance(x, list):
        return [_revive(v) for v in x]
    if isinstance(x, dict):
        return {k: _revive(v) for k, v in x.items()}
    return x


def loads(text: str):
    """Parse JSON written by :func:`dumps`, turning ``"inf"`` strings back into floats."""
    return _revive(json.loads(text))


def read(source) -> object:
    """Load JSON from a path, or parse it directly when it starts with ``[`` or ``{``."""
    s = str(source).strip()
    if s.startswith(("[", "{")):
        return loads(s)
    return loads(Path(s).read_text())


def pmf_from_json(obj, renormalize: bool = False) -> Pmf:
    """Accept a bare list of masses, a Pmf object, or any object holding one under ``q``."""
    if isinstance(obj, list):
        return Pmf.from_dict({"masses": obj}, renormalize)
    if "masses" in obj:
        return Pmf.from_dict(obj, renormalize)
    if "q" in obj:
        return pmf_from_json(obj["q"], renormalize)
    raise ValueError("expected a list of masses or an object with 'masses'")


def joint_from_json(obj) -> JointDist:
    """Accept a joint object, or any object holding one under ``joint`` or ``argmax_joint``."""
    for key in ("joint", "argmax_joint"):
        if key in obj:
            obj = obj[key]
            break
    return JointDist.from_dict(obj)
