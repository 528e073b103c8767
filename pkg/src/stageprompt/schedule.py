"""Piecewise-constant mapping from sampler steps to prompts.

Steps count from 0 (the noisiest, first sampler iteration). Each entry owns a
half-open window [start, end); a switch step is the first step on which the
new prompt is active. Entries partition [0, total_steps) exactly, so every
step resolves to exactly one prompt.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import ScheduleError


@dataclass(frozen=True)
class ScheduleEntry:
    prompt: str
    start: int  # inclusive
    end: int    # exclusive


@dataclass(frozen=True)
class PromptSchedule:
    entries: tuple[ScheduleEntry, ...]
    total_steps: int

    def __post_init__(self) -> None:
        if self.total_steps < 2:
            raise ScheduleError(f"total_steps must be >= 2, got {self.total_steps}")
        if not self.entries:
            raise ScheduleError("a schedule needs at least one entry")
        if self.entries[0].start != 0:
            raise ScheduleError(f"first entry must start at 0, got {self.entries[0].start}")
        if self.entries[-1].end != self.total_steps:
            raise ScheduleError(
                f"last entry must end at total_steps ({self.total_steps}), "
                f"got {self.entries[-1].end}"
            )
        for i, entry in enumerate(self.entries):
            if entry.end <= entry.start:
                raise ScheduleError(
                    f"entry {i} has an empty window [{entry.start}, {entry.end})"
                )
            if i and entry.start != self.entries[i - 1].end:
                raise ScheduleError(
                    f"entry {i} starts at {entry.start} but the previous window "
                    f"ends at {self.entries[i - 1].end}"
                )

    def prompt_index_at(self, t: int) -> int:
        if not 0 <= t < self.total_steps:
            raise ScheduleError(f"step {t} is outside [0, {self.total_steps})")
        for i, entry in enumerate(self.entries):
            if entry.start <= t < entry.end:
                return i
        raise ScheduleError(f"step {t} matched no window")  # unreachable by construction

    def prompt_at(self, t: int) -> str:
        return self.entries[self.prompt_index_at(t)].prompt

    @property
    def prompts(self) -> tuple[str, ...]:
        return tuple(e.prompt for e in self.entries)

    @property
    def switch_steps(self) -> tuple[int, ...]:
        return tuple(e.start for e in self.entries[1:])

    @property
    def is_static(self) -> bool:
        return len(self.entries) == 1

    def to_triples(self) -> list[list]:
        return [[e.prompt, e.start, e.end] for e in self.entries]

    @classmethod
    def from_triples(cls, triples: Sequence[Sequence], total_steps: int) -> "PromptSchedule":
        entries = tuple(
            ScheduleEntry(prompt=str(p), start=int(s), end=int(e)) for p, s, e in triples
        )
        return cls(entries=entries, total_steps=total_steps)


def build_schedule(decomposition: "Decomposition", total_steps: int) -> PromptSchedule:
    """Expand a validated decomposition into windows covering [0, total_steps).

    Prompt i runs from switch_steps[i-1] (or 0 for the first prompt) up to
    switch_steps[i] (or total_steps for the last).
    """
    prompts = decomposition.prompts
    steps = decomposition.switch_steps
    if len(steps) != len(prompts) - 1:
        raise ScheduleError(
            f"{len(prompts)} prompts need {len(prompts) - 1} switch steps, got {len(steps)}"
        )
    bounds = [0, *steps, total_steps]
    for lo, hi in zip(bounds, bounds[1:]):
        if hi <= lo:
            raise ScheduleError(f"switch steps {list(steps)} do not increase within [1, {total_steps - 1}]")
    entries = tuple(
        ScheduleEntry(prompt=prompts[i], start=bounds[i], end=bounds[i + 1])
        for i in range(len(prompts))
    )
    return PromptSchedule(entries=entries, total_steps=total_steps)


def prompt_index_at(schedule: PromptSchedule, t: int) -> int:
    return schedule.prompt_index_at(t)


def is_static(schedule: PromptSchedule) -> bool:
    return schedule.is_static
