"""Denial-of-service attack schedules and the measured (masked) output."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "AttackScheduleError",
    "AttackSchedule",
    "AttackSignalPolicy",
    "is_attacked",
    "masked_output",
    "worst_case_schedule",
]

# slack on the T_a / T_na declarations, absorbs round-off in generated schedules
_DECL_TOL = 1e-9


class AttackScheduleError(ValueError):
    """Schedule or attack-signal definition is invalid."""


@dataclass(frozen=True)
class AttackSchedule:
    """Half-open attack intervals ``[t1, t2)`` with declared ``T_a`` / ``T_na``.

    ``declared_t_a`` bounds every interval length and ``declared_t_na`` bounds
    every gap between consecutive intervals from below, as well as the start
    of the first interval when it does not begin at ``t = 0``.  Leave either
    declaration as ``None`` to take the tightest value implied by the
    intervals.
    """

    intervals: tuple[tuple[float, float], ...] = ()
    declared_t_a: float | None = None
    declared_t_na: float | None = None

    def __post_init__(self):
        ivs = tuple((float(a), float(b)) for a, b in self.intervals)
        for a, b in ivs:
            if not (math.isfinite(a) and math.isfinite(b)) or a < 0.0 or b <= a:
                raise AttackScheduleError(f"invalid interval [{a}, {b})")
        for (_, b0), (a1, _) in zip(ivs, ivs[1:]):
            if a1 < b0:
                raise AttackScheduleError("intervals must be sorted and disjoint")
        t_a = self.declared_t_a
        if t_a is None:
            t_a = max((b - a for a, b in ivs), default=0.0)
        t_na = self.declared_t_na
        if t_na is None:
            gaps = [a1 - b0 for (_, b0), (a1, _) in zip(ivs, ivs[1:])]
            if ivs and ivs[0][0] > 0.0:
                gaps.append(ivs[0][0])
            t_na = min(gaps, default=math.inf)
        t_a, t_na = float(t_a), float(t_na)
        for a, b in ivs:
            if b - a > t_a + _DECL_TOL:
                raise AttackScheduleError(
                    f"interval [{a}, {b}) is longer than the declared T_a={t_a}")
        for (_, b0), (a1, _) in zip(ivs, ivs[1:]):
            if a1 - b0 < t_na - _DECL_TOL:
                raise AttackScheduleError(
                    f"gap [{b0}, {a1}) is shorter than the declared T_na={t_na}")
        if ivs and 0.0 < ivs[0][0] < t_na - _DECL_TOL:
            raise AttackScheduleError("first attack starts after t=0 but before T_na")
        object.__setattr__(self, "intervals", ivs)
        object.__setattr__(self, "declared_t_a", t_a)
        object.__setattr__(self, "declared_t_na", t_na)

    @property
    def starts(self) -> list[float]:
        return [a for a, _ in self.intervals]

    @property
    def ends(self) -> list[float]:
        return [b for _, b in self.intervals]

    def boundaries(self) -> list[float]:
        return sorted({t for iv in self.intervals for t in iv})

    def interval_index(self, t: float) -> int | None:
        """Index of the interval containing *t*, or ``None``."""
        i = bisect.bisect_right(self.starts, t) - 1
        if i >= 0 and t < self.intervals[i][1]:
            return i
        return None

    def is_attacked(self, t: float) -> bool:
        return self.interval_index(t) is not None

    def __len__(self) -> int:
        return len(self.intervals)


def is_attacked(schedule: AttackSchedule, t: float) -> bool:
    return schedule.is_attacked(t)


def worst_case_schedule(horizon: float, t_a: float, t_na: float,
                        start_attacked: bool = True) -> AttackSchedule:
    """Back-to-back attacks of length ``t_a`` separated by gaps of ``t_na``.

    The last interval is truncated at *horizon*.
    """
    if horizon <= 0 or t_a <= 0 or t_na <= 0:
        raise AttackScheduleError("horizon, T_a and T_na must be positive")
    intervals = []
    k = 0
    offset = 0.0 if start_attacked else t_na
    period = t_a + t_na
    while True:
        # closed form per interval keeps the boundaries free of accumulated round-off
        t1 = offset + k * period
        if t1 >= horizon:
            break
        intervals.append((t1, min(t1 + t_a, horizon)))
        k += 1
    return AttackSchedule(tuple(intervals), declared_t_a=t_a, declared_t_na=t_na)


@dataclass(frozen=True)
class AttackSignalPolicy:
    """What the vulnerable channels read while under attack.

    ``kind`` is one of ``"zero"``, ``"hold"`` (last clean value, i.e. the value
    at the attack start), ``"noise"`` (uniform in ``[-amplitude, amplitude]``,
    drawn from ``seed``) or ``"custom"`` (one constant vector per attack
    interval in ``table``).
    """

    kind: str = "zero"
    amplitude: float = 0.0
    seed: int = 0
    table: tuple[tuple[float, ...], ...] = field(default=())

    KINDS = ("zero", "hold", "noise", "custom")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise AttackScheduleError(f"unknown attack policy {self.kind!r}")
        if self.amplitude < 0:
            raise AttackScheduleError("noise amplitude must be nonnegative")
        object.__setattr__(self, "table", tuple(tuple(float(v) for v in row) for row in self.table))

    def signal(self, interval: int, t: float, hold_value, n_vulnerable: int,
               rng: np.random.Generator | None = None) -> np.ndarray:
        """Attacked value of the vulnerable channels during *interval*."""
        if self.kind == "zero":
            return np.zeros(n_vulnerable)
        if self.kind == "hold":
            return np.asarray(hold_value, dtype=float).copy()
        if self.kind == "noise":
            if rng is None:
                rng = np.random.default_rng([self.seed, int(interval), int(round(t * 1e9))])
            return rng.uniform(-self.amplitude, self.amplitude, size=n_vulnerable)
        if interval >= len(self.table):
            raise AttackScheduleError(f"custom attack table has no entry for interval {interval}")
        row = np.asarray(self.table[interval], dtype=float)
        if row.size != n_vulnerable:
            raise AttackScheduleError("custom attack table row has the wrong length")
        return row

    def check_covers(self, schedule: AttackSchedule) -> None:
        if self.kind == "custom" and len(self.table) < len(schedule):
            raise AttackScheduleError(
                f"custom attack table defines {len(self.table)} intervals, "
                f"schedule has {len(schedule)}")


def masked_output(schedule: AttackSchedule, policy: AttackSignalPolicy, t: float, y,
                  secured_rows: Sequence[int], hold_value=None,
                  rng: np.random.Generator | None = None) -> np.ndarray:
    """Measured output: true values off-attack, policy signal on vulnerable rows under attack.

    *hold_value* is the vulnerable sub-vector at the start of the current
    interval and is only consulted by the ``"hold"`` policy.
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    out = y.copy()
    idx = schedule.interval_index(t)
    if idx is None:
        return out
    sec = set(int(i) for i in secured_rows)
    vul = [i for i in range(y.size) if i not in sec]
    if policy.kind == "hold" and hold_value is None:
        raise AttackScheduleError("hold policy needs the value at the attack start")
    out[vul] = policy.signal(idx, t, hold_value, len(vul), rng)
    return out
