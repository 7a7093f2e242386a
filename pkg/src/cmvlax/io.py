"""JSON and CSV serialization.

Matrix files look like ``{"n": 2, "entries": [[[re, im], ...], ...]}`` with
rows outermost; coefficient files look like ``{"alphas": [[re, im], ...]}``.
Floats are written with ``repr``, which round-trips doubles exactly.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np


def _pair(z: complex) -> list[float]:
    z = complex(z)
    # + 0.0 folds negative zeros
    return [float(z.real) + 0.0, float(z.imag) + 0.0]


def matrix_to_dict(m: np.ndarray) -> dict:
    m = np.asarray(m, dtype=np.complex128)
    return {"n": int(m.shape[0]), "entries": [[_pair(z) for z in row] for row in m]}


def matrix_from_dict(d: dict) -> np.ndarray:
    try:
        n = int(d["n"])
        rows = d["entries"]
        m = np.array([[complex(re, im) for re, im in row] for row in rows], dtype=np.complex128)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed matrix JSON: {exc}") from exc
    if m.shape != (n, n):
        raise ValueError(f"matrix JSON declares n={n} but entries have shape {m.shape}")
    return m


def alphas_to_dict(alphas) -> dict:
    return {"alphas": [_pair(a) for a in alphas]}


def alphas_from_dict(d: dict) -> np.ndarray:
    try:
        return np.array([complex(re, im) for re, im in d["alphas"]], dtype=np.complex128)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed coefficients JSON: {exc}") from exc


def dumps(obj, pretty: bool = False) -> str:
    return json.dumps(obj, indent=1 if pretty else None, allow_nan=False) + "\n"


def atomic_write(path, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def write_matrix(path, m) -> None:
    atomic_write(path, dumps(matrix_to_dict(m)))


def read_matrix(path) -> np.ndarray:
    return matrix_from_dict(read_json(path))


def write_alphas(path, alphas) -> None:
    atomic_write(path, dumps(alphas_to_dict(alphas)))


def read_alphas(path) -> np.ndarray:
    return alphas_from_dict(read_json(path))


def fmt(x: float) -> str:
    """17 significant digits."""
    return f"{x:.17g}"
