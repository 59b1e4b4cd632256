from typing import Annotated, Literal

import numpy as np
from pydantic import Field

from .base import Base

Mode = Literal["wrapped360", "folded180"]


class MetricsSummary(Base):
    """Mean absolute, root mean square and maximum orientation error, in degrees.

    A run that diverged still gets a row: its metrics are NaN and `diverged` is set.
    """

    mae: float
    rmse: float
    me: float
    count: Annotated[int, Field(ge=0)]
    mode: Mode
    diverged: bool = False

    @classmethod
    def from_errors(cls, errors, mode: Mode) -> "MetricsSummary":
        errors = np.asarray(errors, dtype=np.float64)
        if errors.size == 0:
            msg = "cannot summarise an empty error sample"
            raise ValueError(msg)
        return cls(
            mae=float(np.mean(errors)),
            rmse=float(np.sqrt(np.mean(errors**2))),
            me=float(np.max(errors)),
            count=int(errors.size),
            mode=mode,
        )

    @classmethod
    def diverged_run(cls, mode: Mode, count: int = 0) -> "MetricsSummary":
        nan = float("nan")
        return cls(mae=nan, rmse=nan, me=nan, count=count, mode=mode, diverged=True)


class AmbiguityRow(Base):
    index: int
    truth_deg: float
    pred_deg: float
    solar_alt_deg: float
    error_deg: float


class AmbiguityReport(Base):
    window_deg: tuple[float, float] = (170.0, 190.0)
    rows: list[AmbiguityRow] = []

    @property
    def n180e(self) -> int:
        return len(self.rows)

    @property
    def msa(self) -> float | None:
        """Maximum solar altitude among the ~180 degree errors, None when there are none."""
        return max((row.solar_alt_deg for row in self.rows), default=None)


class SweepEntry(Base):
    m: float
    mae: float
    rmse: float


class SweepResult(Base):
    entries: list[SweepEntry] = []

    @property
    def argmin(self) -> float | None:
        """m with the smallest MAE (NaN entries ignored), reported, never asserted."""
        finite = [e for e in self.entries if np.isfinite(e.mae)]
        if not finite:
            return None
        return min(finite, key=lambda e: e.mae).m
