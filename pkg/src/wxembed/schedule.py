"""Evaluation schedule: days {1, 2, 15, 16} of each month, every hour."""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime

EVAL_DAYS = (1, 2, 15, 16)


class ScheduleError(ValueError):
    pass


@dataclass
class EvalSchedule:
    entries: list[tuple[int, datetime]]   # (dataset index, timestamp), increasing
    warning_count: int = 0                # matched days with fewer than 24 hours

    def __len__(self):
        return len(self.entries)

    @property
    def indices(self) -> list[int]:
        return [i for i, _ in self.entries]


def build_schedule(timestamps: list[datetime], year: int | None = None) -> EvalSchedule:
    """Select the scheduled hours present in `timestamps` (hourly-resolved)."""
    prev = None
    for t in timestamps:
        if prev is not None and t <= prev:
            raise ScheduleError("timestamps must be strictly increasing")
        prev = t
    entries = [(i, t) for i, t in enumerate(timestamps)
               if t.day in EVAL_DAYS and (year is None or t.year == year)]
    if not entries:
        raise ScheduleError("no timestamps fall on an evaluation day")
    hours_per_day: dict[tuple, set] = {}
    for _, t in entries:
        hours_per_day.setdefault((t.year, t.month, t.day), set()).add(t.hour)
    warnings = sum(1 for hours in hours_per_day.values() if len(hours) < 24)
    return EvalSchedule(entries, warnings)


def complement_indices(n_times: int, schedule: EvalSchedule) -> list[int]:
    """Every dataset index not claimed by the schedule (the training split)."""
    taken = set(schedule.indices)
    return [i for i in range(n_times) if i not in taken]
