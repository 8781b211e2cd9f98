"""Config loading (TOML or JSON), canonical JSON output, and digests.

Every experiment artifact embeds the sha256 digest of its canonical
config JSON; re-running with the same digest reproduces outputs
bit-for-bit.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

try:
    import tomllib  # py311+
except ImportError:
    import tomli as tomllib

from .errors import ConfigError


def load_config(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    if path.suffix == ".toml":
        with path.open("rb") as fh:
            return tomllib.load(fh)
    if path.suffix == ".json":
        with path.open(encoding="utf-8") as fh:
            return json.load(fh)
    raise ConfigError(f"unsupported config format {path.suffix!r} (use .toml or .json)")


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_digest(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()


def dump_json(obj, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")


def write_jsonl(rows, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def read_jsonl(path):
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]
