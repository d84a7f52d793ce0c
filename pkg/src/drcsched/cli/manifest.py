"""Run manifests: what was run, with which inputs, and what it produced."""

from __future__ import annotations

import hashlib
import json
import platform
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__
from ..dataio import atomic_write

MANIFEST_NAME = "manifest.json"


def sha256_file(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class RunManifest:
    command: str
    args: dict
    config: dict = field(default_factory=dict)
    seeds: list[int] = field(default_factory=list)
    artifacts: list[dict] = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    tool_version: str = __version__
    environment: dict = field(
        default_factory=lambda: {"python": platform.python_version(), "numpy": np.__version__}
    )

    def add(self, path: str | Path, role: str, base: str | Path, deterministic: bool = True) -> None:
        """Record an artifact written under ``base`` (stored relative to it)."""
        path = Path(path)
        self.artifacts.append(
            {
                "role": role,
                "path": str(path.relative_to(base)),
                "sha256": sha256_file(path),
                "deterministic": deterministic,
            }
        )

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=1, sort_keys=True, default=_jsonable) + "\n"

    def write(self, path: str | Path) -> None:
        atomic_write(path, self.to_json())

    @classmethod
    def read(cls, path: str | Path) -> "RunManifest":
        data = json.loads(Path(path).read_text())
        return cls(**data)


def _jsonable(x):
    if isinstance(x, (tuple, set)):
        return list(x)
    if isinstance(x, Path):
        return str(x)
    if hasattr(x, "value"):
        return x.value
    if isinstance(x, np.generic):
        return x.item()
    raise TypeError(f"cannot serialize {type(x).__name__}")


def deterministic_hashes(manifest: RunManifest) -> dict[str, str]:
    return {a["role"]: a["sha256"] for a in manifest.artifacts if a["deterministic"]}
