"""JSON serialisation of POVMs.

Format::

    {"d": 2, "effects": [{"re": [[...]], "im": [[...]]}, ...]}

``im`` may be omitted for real effects.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import InvalidPovm, PovmParseError
from .linalg import hermitian_defect
from .povm import Povm

HERMITIAN_TOL = 1e-9


def _matrix(entry, k: int, d: int) -> np.ndarray:
    if not isinstance(entry, dict) or "re" not in entry:
        raise PovmParseError(f"effect {k}: expected an object with 're' (and optionally 'im')")
    try:
        re = np.array(entry["re"], dtype=float)
        im = np.array(entry.get("im", np.zeros_like(re)), dtype=float)
    except (TypeError, ValueError) as exc:
        raise PovmParseError(f"effect {k}: entries must be numbers ({exc})") from None
    if re.shape != (d, d) or im.shape != (d, d):
        raise PovmParseError(f"effect {k}: expected {d}x{d} 're'/'im' arrays, got {re.shape} and {im.shape}")
    if not (np.all(np.isfinite(re)) and np.all(np.isfinite(im))):
        raise PovmParseError(f"effect {k}: non-finite entries")
    return re + 1j * im


def povm_from_json(obj) -> Povm:
    if not isinstance(obj, dict):
        raise PovmParseError("top level must be an object with 'd' and 'effects'")
    d = obj.get("d")
    if not isinstance(d, int) or isinstance(d, bool) or d < 1:
        raise PovmParseError(f"'d' must be a positive integer, got {d!r}")
    effects = obj.get("effects")
    if not isinstance(effects, list) or not effects:
        raise PovmParseError("'effects' must be a nonempty list")
    mats = [_matrix(e, k, d) for k, e in enumerate(effects)]
    for k, m in enumerate(mats):
        if hermitian_defect(m) > HERMITIAN_TOL:
            raise PovmParseError(f"effect {k} is not Hermitian (defect {hermitian_defect(m):.3e})")
    try:
        return Povm(mats)
    except InvalidPovm as exc:
        raise PovmParseError(f"not a POVM: {exc}") from exc


def loads_povm(text: str) -> Povm:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PovmParseError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return povm_from_json(obj)


def load_povm(path) -> Povm:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise PovmParseError(f"{path}: {exc.strerror}") from None
    try:
        return loads_povm(text)
    except PovmParseError as exc:
        raise PovmParseError(f"{path}: {exc}") from None


def povm_to_json(povm: Povm) -> dict:
    return {
        "d": povm.dim,
        "effects": [{"re": e.real.tolist(), "im": e.imag.tolist()} for e in povm],
    }


def save_povm(povm: Povm, path) -> None:
    Path(path).write_text(json.dumps(povm_to_json(povm), indent=1) + "\n")
