"""Run manifests: every CLI output file gets a sidecar recording the command,
flags, seeds, input hashes, tool version, and wall clock, so any artifact can
be traced to the invocation that produced it."""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import asdict, dataclass, field

VERSION = "0.1.0"


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    command: str
    flags: dict
    seeds: dict = field(default_factory=dict)
    inputs: dict = field(default_factory=dict)   # path -> sha256
    outputs: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)
    version: str = VERSION
    wall_clock_s: float = 0.0

    def add_input(self, path):
        if not path:
            return
        try:
            self.inputs[str(path)] = file_sha256(path)
        except OSError:
            # the command's own loader reports unreadable inputs properly
            self.inputs[str(path)] = "unreadable"

    def write(self, out_path):
        """Write next to the primary output as <out>.manifest.json."""
        target = f"{out_path}.manifest.json"
        doc = asdict(self)
        with open(target, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, default=str)
            fh.write("\n")
        return target


class Stopwatch:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0
        return False
