"""Per-step records of one controlled episode."""

import math
from dataclasses import astuple, dataclass, field
from typing import Literal, Optional

from src.core.grid import Field

EpisodeMode = Literal["train", "eval"]

CURVE_COLUMNS = ("episode", "step", "t", "r_global", "r_local_mean", "action_rms", "mse_to_ref")


@dataclass(frozen=True, slots=True)
class StepRecord:
    """One control step; `t` is the absolute simulation time after the step."""

    episode: int
    step: int
    t: float
    r_global: float
    r_local_mean: float
    action_rms: float
    mse_to_ref: float

    def as_row(self) -> tuple[int, int, float, float, float, float, float]:
        return astuple(self)


@dataclass
class EpisodeLog:
    episode: int
    mode: EpisodeMode
    activation_time: float
    records: list[StepRecord] = field(default_factory=list)
    snapshots: dict[str, Field] = field(default_factory=dict)
    blow_up_time: Optional[float] = None

    def __len__(self) -> int:
        return len(self.records)

    @property
    def terminated(self) -> bool:
        """True when the episode ended early on a blow-up."""
        return self.blow_up_time is not None

    def append(self, record: StepRecord) -> None:
        self.records.append(record)

    def total_return(self) -> float:
        return math.fsum(r.r_global for r in self.records)

    def final_mse(self) -> float:
        if not self.records:
            return math.nan
        return self.records[-1].mse_to_ref

    def mse_at(self, time: float) -> float:
        """mse_to_ref of the first step reaching `time`; the last value if the episode ended before."""
        for record in self.records:
            if record.t >= time - 1e-9:
                return record.mse_to_ref
        return self.final_mse()
