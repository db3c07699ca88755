"""Small helpers for self-describing artifact files.

Every artifact the CLI writes embeds a schema version, the seed(s) it was
produced from and a hash of the resolved configuration, so a results
directory can always be traced back to the exact run settings.
"""

from __future__ import annotations

import hashlib
import json

__all__ = ["canonical_json", "config_hash", "dump_json"]


def canonical_json(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def config_hash(config: dict) -> str:
    """Stable sha256 of a resolved configuration dict."""
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()[:16]


def dump_json(payload: dict, path) -> None:
    with open(path, "w") as f:
        json.dump(payload, f, indent=1)
        f.write("\n")
