"""Artifact directory with a checksummed manifest."""

from __future__ import annotations

import hashlib
import logging
from pathlib import Path

import pandas as pd

from fdtransport.grid.export import FLOAT_FORMAT
from fdtransport.models import ArtifactEntry, Manifest

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


def sha256_of(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


class ArtifactStore:
    """Files of one run under <root>/<name>; every emitted file goes through add()."""

    def __init__(self, root: str | Path, name: str, scheme: str = ""):
        self.root = Path(root)
        self.dir = self.root / name
        self.dir.mkdir(parents=True, exist_ok=True)
        self.manifest = Manifest(name=name, scheme=scheme)

    def path(self, relpath: str) -> Path:
        p = self.dir / relpath
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def add(self, path: str | Path, kind: str) -> ArtifactEntry:
        path = Path(path)
        entry = ArtifactEntry(
            path=path.relative_to(self.dir).as_posix(),
            kind=kind,
            size=path.stat().st_size,
            sha256=sha256_of(path),
        )
        self.manifest.files = [f for f in self.manifest.files if f.path != entry.path] + [entry]
        logger.debug(f"artifact {entry.path} ({kind}, {entry.size} bytes)")
        return entry

    def write_frame(self, relpath: str, df: pd.DataFrame, kind: str) -> ArtifactEntry:
        p = self.path(relpath)
        df.to_csv(p, index=False, float_format=FLOAT_FORMAT)
        return self.add(p, kind)

    def write_manifest(self, exit_code: int = 0, **metadata) -> Path:
        self.manifest.exit_code = exit_code
        self.manifest.metadata.update(metadata)
        p = self.dir / MANIFEST_NAME
        p.write_text(self.manifest.model_dump_json(indent=2) + "\n", encoding="utf-8")
        logger.info(f"wrote {MANIFEST_NAME} with {len(self.manifest.files)} files to {self.dir}")
        return p


def verify_manifest(directory: str | Path) -> list[str]:
    """Paths whose size or checksum no longer match the manifest (empty if all match)."""
    directory = Path(directory)
    manifest = Manifest.model_validate_json((directory / MANIFEST_NAME).read_text(encoding="utf-8"))
    bad = []
    for entry in manifest.files:
        p = directory / entry.path
        if not p.exists() or p.stat().st_size != entry.size or sha256_of(p) != entry.sha256:
            bad.append(entry.path)
    return bad
