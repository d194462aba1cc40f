"""
Run manifests and deterministic artifact writers shared by every CLI command
"""
import hashlib
import json
from pathlib import Path
from typing import Any, List, Optional, Union

import pandas as pd
from pydantic import BaseModel

from services import __version__

MANIFEST_NAME = "manifest.json"


class RunManifest(BaseModel):
    command: str
    config_hash: str
    seed: int
    tool_version: str = __version__
    outputs: List[str]
    argv: List[str]


def hash_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def hash_config(config: Union[BaseModel, dict]) -> str:
    """sha256 of the canonical JSON form of a resolved config"""
    payload = config.model_dump(mode="json", by_alias=True) if isinstance(config, BaseModel) else config
    return hash_bytes(json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8"))


def dumps(payload: Any) -> str:
    """Indented JSON; floats use Python's shortest round-trip repr"""
    if isinstance(payload, BaseModel):
        payload = payload.model_dump(mode="json", by_alias=True)
    return json.dumps(payload, indent=2) + "\n"


class ArtifactWriter:
    """Writes named artifacts under one output directory and remembers them for the manifest"""

    def __init__(self, out_dir: Path):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.outputs: List[str] = []

    def path(self, name: str) -> Path:
        self.outputs.append(name)
        return self.out_dir / name

    def json(self, name: str, payload: Any) -> Path:
        path = self.path(name)
        path.write_text(dumps(payload), encoding="utf-8")
        return path

    def csv(self, name: str, frame: pd.DataFrame, float_format: Optional[str] = None) -> Path:
        path = self.path(name)
        frame.to_csv(path, index=False, float_format=float_format)
        return path

    def text(self, name: str, content: str) -> Path:
        path = self.path(name)
        path.write_text(content, encoding="utf-8")
        return path

    def manifest(self, command: str, config_hash: str, seed: int, argv: List[str]) -> RunManifest:
        manifest = RunManifest(
            command=command,
            config_hash=config_hash,
            seed=seed,
            outputs=list(self.outputs),
            argv=list(argv),
        )
        (self.out_dir / MANIFEST_NAME).write_text(dumps(manifest), encoding="utf-8")
        return manifest


def portable_argv(argv: List[str]) -> List[str]:
    """argv with the --out destination removed, so manifests of identical runs compare equal"""
    kept, skip = [], False
    for token in argv:
        if skip:
            skip = False
            continue
        if token == "--out":
            skip = True
            continue
        if token.startswith("--out="):
            continue
        kept.append(token)
    return kept
