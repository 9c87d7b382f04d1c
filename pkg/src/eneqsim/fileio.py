"""Atomic file writing and deterministic number formatting.

All CSV/JSON output goes through these helpers so that (a) a crashed run never
leaves a half-written file behind (temp file + rename in the same directory)
and (b) floats are serialized with Python's shortest round-trip repr, making
byte-identical reruns possible.
"""

import csv
import hashlib
import json
import os
import tempfile
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError


def format_value(v) -> str:
    """Shortest round-trip text for a CSV cell. None becomes the empty field."""
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int,)) and not isinstance(v, bool):
        return str(v)
    return repr(float(v))


def atomic_write_text(path: str, text: str) -> None:
    """Write text to path via a temp file in the same directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_value(v) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_json(path: str, obj) -> None:
    # json.dumps uses repr for floats, so this is round-trip exact too
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_csv_columns(path: str, required: Sequence[str]) -> dict[str, np.ndarray]:
    """Named numeric columns from a headered CSV.

    Extra columns are ignored; a missing required column is a schema error,
    and an unparseable cell or ragged row is reported with its line number.
    """
    try:
        with open(path, "r", newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise ValidationError(f"{path}: empty file, expected a CSV header")
            header = [name.strip() for name in header]
            missing = [name for name in required if name not in header]
            if missing:
                raise ValidationError(
                    f"{path}: missing column(s) {', '.join(missing)} "
                    f"(found: {', '.join(header)})"
                )
            wanted = {name: header.index(name) for name in required}
            data: dict[str, list[float]] = {name: [] for name in required}
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != len(header):
                    raise ValidationError(
                        f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}"
                    )
                for name, col in wanted.items():
                    try:
                        data[name].append(float(row[col]))
                    except ValueError:
                        raise ValidationError(
                            f"{path}:{lineno}: column {name}: not a number: {row[col]!r}"
                        )
    except OSError as err:
        raise ValidationError(f"cannot read {path}: {err.strerror}")
    return {name: np.asarray(vals, dtype=float) for name, vals in data.items()}


def sha256_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()
