"""Plain-text artifacts: CSV tables with a provenance header and a JSON manifest.

Every table starts with ``# key=value`` lines (config hash, seed, package
version, plus free-form notes) followed by a CSV header row. Floats are
written with ``repr`` so reruns are byte-identical.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np

from ..exceptions import ConfigError

MANIFEST = "manifest.json"


def package_version() -> str:
    try:
        return version("qelm-witness")
    except PackageNotFoundError:
        return "0+unknown"


@dataclass(frozen=True)
class Provenance:
    config_hash: str
    seed: int
    version: str = field(default_factory=package_version)

    def lines(self) -> list[str]:
        return [f"config_hash={self.config_hash}", f"seed={self.seed}", f"version={self.version}"]


def _cell(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (np.integer,)):
        return str(int(x))
    return str(x)


@dataclass
class Table:
    header: list
    rows: list
    notes: list = field(default_factory=list)

    def render(self, prov: Provenance) -> str:
        buf = io.StringIO()
        for line in prov.lines() + list(self.notes):
            buf.write(f"# {line}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        for r in self.rows:
            w.writerow([_cell(x) for x in r])
        return buf.getvalue()

    def column(self, name: str) -> list:
        j = self.header.index(name)
        return [r[j] for r in self.rows]


def read_table(path) -> tuple[dict, Table]:
    """Inverse of :meth:`Table.render`; values come back as strings."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    meta, notes, body = {}, [], []
    for line in text.splitlines():
        if line.startswith("# "):
            key, sep, val = line[2:].partition("=")
            if sep and key.isidentifier():
                meta[key] = val
            else:
                notes.append(line[2:])
        else:
            body.append(line)
    rows = list(csv.reader(body))
    if not rows:
        raise ConfigError(f"{path}: empty table")
    return meta, Table(rows[0], rows[1:], notes)


@dataclass
class RunArtifacts:
    """Named tables plus in-memory summary metrics of one harness call.

    ``write(out_dir)`` renders every table and a manifest listing each file
    with its SHA-256, so any cell can be traced back to the config hash, the
    seed and (through the ``repeat`` column) the split index.
    """

    kind: str
    provenance: Provenance
    config: dict
    tables: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    out_dir: Path | None = None

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        try:
            out.mkdir(parents=True, exist_ok=True)
            files = {}
            for name in sorted(self.tables):
                path = out / name
                path.parent.mkdir(parents=True, exist_ok=True)
                text = self.tables[name].render(self.provenance)
                path.write_text(text)
                files[name] = hashlib.sha256(text.encode()).hexdigest()
            manifest = {
                "kind": self.kind,
                "config_hash": self.provenance.config_hash,
                "seed": self.provenance.seed,
                "version": self.provenance.version,
                "config": self.config,
                "summary": _jsonable(self.summary),
                "files": files,
            }
            (out / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        except OSError as exc:
            exc.filename = exc.filename or str(out)
            raise
        self.out_dir = out
        return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def load_manifest(out_dir) -> dict:
    """Read a manifest and check that every listed file is present and unchanged."""
    out = Path(out_dir)
    try:
        manifest = json.loads((out / MANIFEST).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{out / MANIFEST}: {exc}") from exc
    for name, digest in manifest.get("files", {}).items():
        path = out / name
        if not path.exists():
            raise ConfigError(f"{out}: manifest lists missing file {name}")
        if hashlib.sha256(path.read_bytes()).hexdigest() != digest:
            raise ConfigError(f"{out}: {name} does not match its manifest digest")
    return manifest
