"""On-disk cache of validated decompositions.

One JSON file per key. Stores go through a temp file plus atomic rename, so a
reader either sees the previous complete entry or the new one, never a torn
write. Anything that fails to load is treated as a miss and evicted.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

from ..util import atomic_write_bytes, sha256_hex

LOGGER = logging.getLogger(__name__)

_CACHE_FORMAT = 1


@dataclass(frozen=True)
class CacheKey:
    target_digest: str
    mode: str
    model_id: str
    cap: int

    @property
    def filename(self) -> str:
        token = "|".join((self.target_digest, self.mode, self.model_id, str(self.cap)))
        return sha256_hex(token) + ".json"

    def to_dict(self) -> dict:
        return {
            "target_digest": self.target_digest,
            "mode": self.mode,
            "model_id": self.model_id,
            "cap": self.cap,
        }


def make_cache_key(target_prompt: str, mode: "DecomposerMode", model_id: str, cap: int) -> CacheKey:
    return CacheKey(
        target_digest=sha256_hex(target_prompt),
        mode=mode.value,
        model_id=model_id,
        cap=cap,
    )


class DecompositionCache:
    def __init__(self, root: Path) -> None:
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, key: CacheKey) -> Path:
        return self.root / key.filename

    def lookup(self, key: CacheKey) -> "Decomposition | None":
        from .core import Decomposition

        path = self._path(key)
        try:
            body = json.loads(path.read_text(encoding="utf-8"))
            return Decomposition.from_json_dict(body["decomposition"])
        except FileNotFoundError:
            return None
        except (ValueError, KeyError, TypeError) as exc:
            LOGGER.warning("evicting unreadable cache entry %s: %s", path.name, exc)
            path.unlink(missing_ok=True)
            return None

    def store(self, key: CacheKey, decomposition: "Decomposition") -> Path:
        path = self._path(key)
        body = {
            "format": _CACHE_FORMAT,
            "key": key.to_dict(),
            "decomposition": decomposition.to_json_dict(),
        }
        data = json.dumps(body, ensure_ascii=False, sort_keys=True, indent=2)
        atomic_write_bytes(path, data.encode("utf-8"))
        return path
