"""Training-free asleep/awake segmentation over 30-second epochs.

Each epoch is scored against a moving threshold: the mean of the previous
three minutes of valid heart-rate samples plus a scalar times their
(population) standard deviation. The first three minutes are forced awake;
epochs whose lookback still overlaps that forced prefix use scalar -1, later
epochs use +2. An epoch is asleep when more than half of its samples sit
strictly below the threshold, unless more than ten zero-HR samples (motion
artifacts) force it awake.

Zeros and holes are excluded from the threshold statistics, and zeros are
excluded from the below-threshold count: a defective waveform is evidence of
motion, not of a low heart rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Sequence

from .core import NightRecord
from .errors import NoEpochs, RecordTooShort
from .preprocess import raw_hr_series


class WakeState(Enum):
    AWAKE = "awake"
    ASLEEP = "asleep"


@dataclass(frozen=True)
class ThresholdConfig:
    """Tunable constants of the segmentation algorithm.

    below_majority and zero_limit are counts that must be EXCEEDED, so the
    defaults read: asleep needs at least 16 of 30 below, and 11 zeros force
    awake.
    """

    epoch_len: int = 30
    lookback: int = 180
    scalar_early: float = -1.0
    scalar_late: float = 2.0
    forced_awake_prefix: int = 180
    below_majority: int = 15
    zero_limit: int = 10

    def __post_init__(self):
        if self.epoch_len <= 0 or self.lookback <= 0:
            raise ValueError("epoch_len and lookback must be positive")
        if self.forced_awake_prefix < 0 or self.forced_awake_prefix % self.epoch_len:
            raise ValueError("forced_awake_prefix must be a multiple of epoch_len")

    def scalar_for(self, start_t: int) -> float:
        """Scalar for the epoch starting at start_t (not in the forced prefix).

        Early scalar applies exactly while the lookback window still overlaps
        the forced-awake prefix, i.e. start_t < prefix + lookback.
        """
        if start_t < self.forced_awake_prefix + self.lookback:
            return self.scalar_early
        return self.scalar_late


@dataclass(frozen=True)
class SleepWakeEpoch:
    """One scored 30-second epoch with the evidence counts behind it."""

    index: int
    start_t: int
    state: WakeState
    threshold: Optional[float]
    n_below: int
    n_zero: int
    n_present: int

    @property
    def asleep(self) -> bool:
        return self.state is WakeState.ASLEEP


def moving_threshold(
    lookback_hr: Sequence[Optional[float]], scalar: float
) -> Optional[float]:
    """mean + scalar * population std over the valid samples of a lookback.

    Valid means present (not a hole) and nonzero. Returns None when the
    lookback holds no valid sample.
    """
    valid = [v for v in lookback_hr if v is not None and v > 0.0]
    if not valid:
        return None
    n = len(valid)
    mean = sum(valid) / n
    var = sum((v - mean) ** 2 for v in valid) / n
    return mean + scalar * math.sqrt(var)


def classify_epoch(
    epoch_hr: Sequence[Optional[float]],
    threshold: Optional[float],
    config: ThresholdConfig = ThresholdConfig(),
) -> tuple[WakeState, int, int, int]:
    """Score one epoch; returns (state, n_below, n_zero, n_present).

    Holes count toward neither tally. With an undefined threshold there is
    no evidence of sleep, so the epoch is awake (zeros still counted).
    """
    n_present = 0
    n_zero = 0
    n_below = 0
    for v in epoch_hr:
        if v is None:
            continue
        n_present += 1
        if v == 0.0:
            n_zero += 1
        elif threshold is not None and v < threshold:
            n_below += 1
    asleep = (
        threshold is not None
        and n_below > config.below_majority
        and n_zero <= config.zero_limit
    )
    return (WakeState.ASLEEP if asleep else WakeState.AWAKE, n_below, n_zero, n_present)


def run_night(
    record: NightRecord, config: ThresholdConfig = ThresholdConfig()
) -> list[SleepWakeEpoch]:
    """Segment a whole night into scored epochs.

    The record must span at least the forced-awake prefix. A trailing
    partial epoch is dropped, not padded.
    """
    series = raw_hr_series(record)
    span = len(series)
    if span < config.forced_awake_prefix:
        raise RecordTooShort(span, config.forced_awake_prefix)

    epochs = []
    n_epochs = span // config.epoch_len
    forced = config.forced_awake_prefix // config.epoch_len
    for index in range(n_epochs):
        start_t = index * config.epoch_len
        window = series[start_t : start_t + config.epoch_len]
        if index < forced:
            _, n_below, n_zero, n_present = classify_epoch(window, None, config)
            epochs.append(
                SleepWakeEpoch(index, start_t, WakeState.AWAKE, None,
                               n_below, n_zero, n_present)
            )
            continue
        lookback = series[start_t - config.lookback : start_t]
        threshold = moving_threshold(lookback, config.scalar_for(start_t))
        state, n_below, n_zero, n_present = classify_epoch(window, threshold, config)
        epochs.append(
            SleepWakeEpoch(index, start_t, state, threshold,
                           n_below, n_zero, n_present)
        )
    return epochs


def sleep_efficiency(epochs: Sequence[SleepWakeEpoch]) -> float:
    """Asleep epochs over total bedtime epochs."""
    if not epochs:
        raise NoEpochs()
    return sum(1 for e in epochs if e.asleep) / len(epochs)


def sleep_onset_latency(epochs: Sequence[SleepWakeEpoch]) -> Optional[int]:
    """Seconds from record start to the first asleep epoch; None if never slept."""
    for e in epochs:
        if e.asleep:
            return e.start_t
    return None


def waso(epochs: Sequence[SleepWakeEpoch], epoch_len: int = 30) -> int:
    """Wake-after-sleep-onset: awake seconds strictly after the first asleep
    epoch; 0 when sleep never began."""
    onset_seen = False
    awake_epochs = 0
    for e in epochs:
        if e.asleep:
            onset_seen = True
        elif onset_seen:
            awake_epochs += 1
    return awake_epochs * epoch_len


EPOCH_CSV_HEADER = "index,start_t,state,threshold,n_below,n_zero"


def epochs_to_csv(epochs: Iterable[SleepWakeEpoch]) -> Iterable[str]:
    """Export scored epochs as CSV lines (threshold blank when undefined)."""
    yield EPOCH_CSV_HEADER
    for e in epochs:
        thr = "" if e.threshold is None else repr(e.threshold)
        yield f"{e.index},{e.start_t},{e.state.value},{thr},{e.n_below},{e.n_zero}"
