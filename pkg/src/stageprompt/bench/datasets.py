"""Benchmark datasets: the bundled ContraBench prompt set and prompt files.

External prompt sets load from plain text (one prompt per line) or delimited
``id,text`` tables; nothing beyond ContraBench ships with the package. The
prompt texts below are bundled verbatim, including original casing and
punctuation, so ids stay stable across installations.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from ..errors import DatasetError

CONTRABENCH_ID = "contrabench"

CONTRABENCH_PROMPTS: tuple[str, ...] = (
    "A professional boxer does a split",
    "A bear performing a handstand in the park",
    "A photorealistic photo of SpongeBob SquarePants dancing ballet",
    "A cowboy swimming competitively in an Olympic pool",
    "A cruise ship parked in a bathtub",
    "A man giving a piggyback ride to an elephant",
    "A zebra climbing a tree",
    "A coffee machine dispensing glitter",
    "A vending machine in a human running posture",
    "A ballerina aggressively flipping a table",
    "A bathtub floating above a desert in a tornado",
    "A monkey juggles tiny elephants",
    "a woman has a marine haircut",
    "A tower with two hands",
    "An archer is shooting flowers with a bow",
    "A baseball player backswing a yellow ball with a golf club",
    "A barn built atop a skyscraper rooftop",
    "A cat balancing a skyscraper on its nose",
    "A cow grazing on a city rooftop",
    "A fireplace burning inside an igloo",
    "A mosquito pulling a royal carriage through Times Square",
    "A grandma is ice skating on the roof",
    "A muscular ferret in the woods",
    "A house with a circular door",
    "A photorealistic image of a bear ironing clothes in a laundry room",
    "A pizza being used as an umbrella in the rain",
    "A cubist lion hiding in a photorealistic jungle",
    "A chicken is smiling",
    "A realistic photo of an elephant wearing slippers",
    "A computer mouse eating a piece of cheese",
    "A horse taking a selfie with a smartphone",
    "A sheep practicing yoga on a mat",
    "a snake eating a small golden guitar",
    "A soccer field painted on a grain of rice",
    "A snake with feet",
    "A woman brushing her teeth with a paintbrush",
    "A horse with a hump",
    "A hyperrealistic unicorn made of origami",
    "A library printed on a butterfly’s wings",
    "A bodybuilder balancing on pointe shoes",
)


@dataclass(frozen=True)
class PromptEntry:
    prompt_id: int
    text: str


@dataclass(frozen=True)
class BenchmarkDataset:
    dataset_id: str
    prompts: tuple[PromptEntry, ...]

    def __post_init__(self) -> None:
        if not self.dataset_id.strip():
            raise DatasetError("dataset_id must be nonempty")
        if not self.prompts:
            raise DatasetError("a dataset needs at least one prompt")
        ids = [p.prompt_id for p in self.prompts]
        if ids != list(range(1, len(ids) + 1)):
            raise DatasetError(
                f"prompt ids must be contiguous from 1, got {ids[:5]}..."
                if len(ids) > 5 else f"prompt ids must be contiguous from 1, got {ids}"
            )
        for p in self.prompts:
            if not p.text.strip():
                raise DatasetError(f"prompt {p.prompt_id} is empty")

    def __len__(self) -> int:
        return len(self.prompts)

    def text_of(self, prompt_id: int) -> str:
        return self.prompts[prompt_id - 1].text


def load_contrabench() -> BenchmarkDataset:
    return BenchmarkDataset(
        dataset_id=CONTRABENCH_ID,
        prompts=tuple(
            PromptEntry(prompt_id=i + 1, text=text)
            for i, text in enumerate(CONTRABENCH_PROMPTS)
        ),
    )


_DELIMITED_RE = re.compile(r"^\s*(\d+)\s*[,\t](.*)$")


def load_prompt_file(path: Path, dataset_id: str | None = None) -> BenchmarkDataset:
    """Load a prompt set from ``path``.

    Two layouts are accepted, sniffed from the first line: delimited
    ``id,text`` (or tab-separated) rows, and plain one-prompt-per-line text
    where ids are assigned 1..n in file order. Blank lines are only legal at
    the very end of the file.
    """
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DatasetError(f"cannot read prompt file {path}: {exc}") from exc
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise DatasetError(f"prompt file {path} is empty")

    ds_id = dataset_id or path.stem
    delimited = _DELIMITED_RE.match(lines[0]) is not None

    entries: list[PromptEntry] = []
    seen: dict[int, int] = {}
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            raise DatasetError("blank line inside the prompt list", line=lineno)
        if delimited:
            match = _DELIMITED_RE.match(line)
            if match is None:
                raise DatasetError(f"expected 'id,text', got {line!r}", line=lineno)
            pid = int(match.group(1))
            text = match.group(2).strip()
            if pid in seen:
                raise DatasetError(
                    f"duplicate prompt id {pid} (first seen on line {seen[pid]})", line=lineno,
                )
            seen[pid] = lineno
            entries.append(PromptEntry(prompt_id=pid, text=text))
        else:
            entries.append(PromptEntry(prompt_id=lineno, text=line.strip()))

    entries.sort(key=lambda e: e.prompt_id)
    try:
        return BenchmarkDataset(dataset_id=ds_id, prompts=tuple(entries))
    except DatasetError as exc:
        raise DatasetError(f"{path}: {exc}") from exc


def save_prompt_file(dataset: BenchmarkDataset, path: Path) -> Path:
    """Write the canonical delimited form: ``id,text`` lines, UTF-8, one
    trailing newline. Loading the result reproduces the dataset exactly."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = "".join(f"{p.prompt_id},{p.text}\n" for p in dataset.prompts)
    path.write_text(body, encoding="utf-8")
    return path
