"""CSV matrices, JSON manifests and atomic file output."""

import json
import os
import tempfile
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError


def read_matrix(path):
    """Read a headerless comma-separated matrix; one matrix row per line."""
    path = Path(path)
    try:
        with warnings.catch_warnings():
            # empty input is reported below as an InputError
            warnings.simplefilter("ignore", UserWarning)
            m = np.loadtxt(path, delimiter=",", ndmin=2, dtype=float)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    except ValueError as exc:
        raise InputError(f"cannot parse {path}: {exc}") from None
    if m.size == 0:
        raise InputError(f"{path} holds no numbers")
    if not np.all(np.isfinite(m)):
        raise InputError(f"{path} contains non-finite entries")
    return m


def _atomic_write(path, text):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_float(x):
    return format(float(x), ".17g")


def matrix_to_csv(m):
    m = np.atleast_2d(np.asarray(m, dtype=float))
    return "".join(",".join(format_float(x) for x in row) + "\n" for row in m)


def write_matrix(path, m):
    _atomic_write(path, matrix_to_csv(m))


def write_text(path, text):
    _atomic_write(path, text)


def write_json(path, obj):
    # allow_nan=False: a NaN in a report is a bug, not data
    _atomic_write(path, json.dumps(obj, indent=2, allow_nan=False) + "\n")


@dataclass(frozen=True)
class Manifest:
    matrices: tuple
    labels: tuple = None
    pi: float = None
    normalize_v: bool = False
    class_tol: float = 1e-6
    rank_tol: float = None


def _number(raw, key, path):
    value = raw.get(key)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InputError(f"{path}: '{key}' must be a number")
    return float(value)


def load_manifest(path):
    """Parse a manifest; matrix paths are resolved against its directory."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise InputError(f"cannot read manifest {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"manifest {path} is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise InputError(f"manifest {path} must be a JSON object")
    files = raw.get("matrices")
    if not isinstance(files, list) or len(files) < 2 or not all(isinstance(f, str) for f in files):
        raise InputError(f"{path}: 'matrices' must list at least two file paths")
    labels = raw.get("labels")
    if labels is not None:
        if not isinstance(labels, list) or len(labels) != len(files):
            raise InputError(f"{path}: 'labels' must have one entry per matrix")
        labels = tuple(str(s) for s in labels)
    normalize_v = raw.get("normalize_v", False)
    if not isinstance(normalize_v, bool):
        raise InputError(f"{path}: 'normalize_v' must be a boolean")
    class_tol = _number(raw, "class_tol", path)
    return Manifest(
        matrices=tuple(str((path.parent / f).resolve()) for f in files),
        labels=labels,
        pi=_number(raw, "pi", path),
        normalize_v=normalize_v,
        class_tol=1e-6 if class_tol is None else class_tol,
        rank_tol=_number(raw, "rank_tol", path),
    )


def load_blocks(manifest):
    return [read_matrix(p) for p in manifest.matrices]
