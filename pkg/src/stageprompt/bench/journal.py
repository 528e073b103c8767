"""Append-only JSONL journal for benchmark runs.

The first record is the run header; every later record is one grid cell. A
cell is appended only after it fully resolves (scored, or failed with the
error recorded), so whatever the journal holds after a crash is exactly the
set of cells that do not need re-running. Field names in these records are a
stable interface: downstream tooling reads journals directly.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable

from ..errors import ConfigurationError, DatasetError
from ..util import append_jsonl, read_jsonl, utc_now_iso

HEADER_RECORD = "header"
CELL_RECORD = "cell"

CellKey = tuple[str, int, str, int]  # (dataset_id, prompt_id, method, seed)


@dataclass(frozen=True)
class RunHeader:
    run_id: str
    dataset_id: str
    methods: tuple[str, ...]
    seeds: tuple[int, ...]
    total_steps: int
    created_at: str

    def to_record(self) -> dict[str, Any]:
        return {
            "record": HEADER_RECORD,
            "run_id": self.run_id,
            "dataset_id": self.dataset_id,
            "methods": list(self.methods),
            "seeds": list(self.seeds),
            "total_steps": self.total_steps,
            "created_at": self.created_at,
        }

    @classmethod
    def from_record(cls, rec: dict[str, Any]) -> "RunHeader":
        return cls(
            run_id=str(rec["run_id"]),
            dataset_id=str(rec["dataset_id"]),
            methods=tuple(str(m) for m in rec["methods"]),
            seeds=tuple(int(s) for s in rec["seeds"]),
            total_steps=int(rec["total_steps"]),
            created_at=str(rec["created_at"]),
        )


@dataclass(frozen=True)
class CellRow:
    dataset_id: str
    prompt_id: int
    method: str
    seed: int
    schedule: tuple[tuple[str, int, int], ...]
    score: int | None
    error: str | None
    image_ref: str | None
    image_digest: str | None
    decomposition_mode: str
    decomposition_raw_digest: str | None
    judge_raw_digest: str | None
    fallback: bool
    started_at: str
    finished_at: str

    @property
    def key(self) -> CellKey:
        return (self.dataset_id, self.prompt_id, self.method, self.seed)

    def to_record(self) -> dict[str, Any]:
        return {
            "record": CELL_RECORD,
            "dataset_id": self.dataset_id,
            "prompt_id": self.prompt_id,
            "method": self.method,
            "seed": self.seed,
            "schedule": [list(t) for t in self.schedule],
            "score": self.score,
            "error": self.error,
            "image_ref": self.image_ref,
            "image_digest": self.image_digest,
            "decomposition_mode": self.decomposition_mode,
            "decomposition_raw_digest": self.decomposition_raw_digest,
            "judge_raw_digest": self.judge_raw_digest,
            "fallback": self.fallback,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
        }

    @classmethod
    def from_record(cls, rec: dict[str, Any]) -> "CellRow":
        return cls(
            dataset_id=str(rec["dataset_id"]),
            prompt_id=int(rec["prompt_id"]),
            method=str(rec["method"]),
            seed=int(rec["seed"]),
            schedule=tuple((str(p), int(s), int(e)) for p, s, e in rec["schedule"]),
            score=None if rec["score"] is None else int(rec["score"]),
            error=rec.get("error"),
            image_ref=rec.get("image_ref"),
            image_digest=rec.get("image_digest"),
            decomposition_mode=str(rec.get("decomposition_mode", "")),
            decomposition_raw_digest=rec.get("decomposition_raw_digest"),
            judge_raw_digest=rec.get("judge_raw_digest"),
            fallback=bool(rec.get("fallback", False)),
            started_at=str(rec.get("started_at", "")),
            finished_at=str(rec.get("finished_at", "")),
        )


@dataclass(frozen=True)
class RunResult:
    header: RunHeader
    rows: tuple[CellRow, ...]

    def __post_init__(self) -> None:
        keys = [r.key for r in self.rows]
        if len(keys) != len(set(keys)):
            raise DatasetError("run contains duplicate cell rows")

    @property
    def row_map(self) -> dict[CellKey, CellRow]:
        return {r.key: r for r in self.rows}

    def expected_keys(self, prompt_ids: Iterable[int]) -> set[CellKey]:
        return {
            (self.header.dataset_id, pid, m, s)
            for pid in prompt_ids
            for m in self.header.methods
            for s in self.header.seeds
        }


def _canonical_rows(rows: Iterable[CellRow]) -> tuple[CellRow, ...]:
    return tuple(sorted(rows, key=lambda r: (r.dataset_id, r.prompt_id, r.method, r.seed)))


class RunJournal:
    """Single-writer append access to one journal file."""

    def __init__(self, path: Path) -> None:
        self.path = Path(path)
        self._lock = threading.Lock()

    def write_header(self, header: RunHeader) -> None:
        with self._lock:
            if self.path.exists() and self.path.stat().st_size > 0:
                raise ConfigurationError(f"journal {self.path} already has content")
            append_jsonl(self.path, header.to_record())

    def append(self, row: CellRow) -> None:
        with self._lock:
            append_jsonl(self.path, row.to_record())

    @staticmethod
    def load(path: Path) -> RunResult:
        """Replay a journal into a RunResult.

        Rows are returned in canonical key order regardless of append order,
        and a duplicate key keeps its first occurrence, so a replay after any
        number of resume cycles reconstructs the same result.
        """
        path = Path(path)
        if not path.is_file():
            raise ConfigurationError(f"journal {path} does not exist")
        header: RunHeader | None = None
        rows: dict[CellKey, CellRow] = {}
        for rec in read_jsonl(path):
            kind = rec.get("record")
            if kind == HEADER_RECORD:
                if header is None:
                    header = RunHeader.from_record(rec)
                continue
            if kind != CELL_RECORD:
                continue
            row = CellRow.from_record(rec)
            rows.setdefault(row.key, row)
        if header is None:
            raise ConfigurationError(f"journal {path} has no header record")
        return RunResult(header=header, rows=_canonical_rows(rows.values()))
