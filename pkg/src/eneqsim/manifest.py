"""Run manifests: what was run, with what config, producing which bytes.

A manifest records the resolved config snapshot, the tool version, the seed,
and a sha256 per output file. Re-running the same command with the same
config and seed must reproduce the recorded hashes; `manifest verify` checks
the files on disk against them.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field

from .errors import ValidationError
from .fileio import sha256_file, write_json

MANIFEST_NAME = "manifest.json"


@dataclass(frozen=True)
class RunManifest:
    command: str
    version: str
    seed: int
    config: dict
    outputs: dict[str, str]  # path relative to the manifest -> sha256 hex
    timings_s: dict[str, float]
    records: dict[str, dict] = field(default_factory=dict)  # named result payloads


def build_manifest(
    command: str,
    version: str,
    seed: int,
    config_snapshot: dict,
    outdir: str,
    output_names: list[str],
    timings_s: dict[str, float],
    records: dict[str, dict] | None = None,
) -> RunManifest:
    hashes = {
        name: sha256_file(os.path.join(outdir, name)) for name in sorted(output_names)
    }
    return RunManifest(
        command=command,
        version=version,
        seed=seed,
        config=config_snapshot,
        outputs=hashes,
        timings_s=timings_s,
        records=records or {},
    )


def write_manifest(manifest: RunManifest, path: str) -> None:
    write_json(path, asdict(manifest))


def load_manifest(path: str) -> RunManifest:
    try:
        with open(path, "r") as fh:
            raw = json.load(fh)
    except OSError as err:
        raise ValidationError(f"cannot read manifest {path}: {err.strerror}")
    except json.JSONDecodeError as err:
        raise ValidationError(f"{path}: not valid JSON ({err})")
    try:
        return RunManifest(
            command=raw["command"],
            version=raw["version"],
            seed=raw["seed"],
            config=raw["config"],
            outputs=raw["outputs"],
            timings_s=raw["timings_s"],
            records=raw.get("records", {}),
        )
    except (KeyError, TypeError) as err:
        raise ValidationError(f"{path}: not a run manifest ({err})")


@dataclass(frozen=True)
class VerifyRow:
    name: str
    status: str  # ok | mismatch | missing
    expected: str
    actual: str | None


def verify_manifest(path: str) -> list[VerifyRow]:
    """Current hash of every recorded output vs the manifest's record."""
    manifest = load_manifest(path)
    base = os.path.dirname(os.path.abspath(path))
    rows = []
    for name in sorted(manifest.outputs):
        expected = manifest.outputs[name]
        full = os.path.join(base, name)
        if not os.path.exists(full):
            rows.append(VerifyRow(name, "missing", expected, None))
            continue
        actual = sha256_file(full)
        status = "ok" if actual == expected else "mismatch"
        rows.append(VerifyRow(name, status, expected, actual))
    return rows
