"""Spatiotemporal analytics over tracked mask sequences.

Everything downstream of tracking lives here: the scar area time series and
its seasonal split, relative-error and percent-change arithmetic, spike
detection against a trailing-median baseline, boundary extraction, and
interannual expansion diffs.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import statistics
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, DimensionError
from .raster import BinaryMask
from .sequence import VideoSequence

__all__ = [
    "AreaEntry",
    "AreaSeries",
    "SpikeEvent",
    "ExpansionDiff",
    "area",
    "area_series",
    "relative_error",
    "percent_change",
    "seasonal_split",
    "detect_spikes",
    "boundary",
    "expansion_diff",
    "interannual_pairs",
    "series_to_csv",
    "series_from_csv",
]

SUMMER_AUTUMN_MONTHS = frozenset({6, 7, 8, 9, 10})


@dataclass(frozen=True)
class AreaEntry:
    frame_index: int
    date: dt.date
    area_m2: float


@dataclass
class AreaSeries:
    """Scar area per frame, in m2, ordered by frame index."""

    entries: list[AreaEntry]
    cell_size: float

    def __post_init__(self):
        for a, b in zip(self.entries, self.entries[1:]):
            if a.date >= b.date:
                raise ArgumentError(f"series dates not strictly increasing at {b.date}")
        for e in self.entries:
            if e.area_m2 < 0:
                raise ArgumentError(f"negative area {e.area_m2} at frame {e.frame_index}")

    def areas(self) -> list[float]:
        return [e.area_m2 for e in self.entries]

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class SpikeEvent:
    frame_index: int
    date: dt.date
    area_m2: float
    baseline_m2: float
    ratio: float


@dataclass
class ExpansionDiff:
    new_area: BinaryMask
    lost_area: BinaryMask
    net_m2: float


def area(mask: BinaryMask) -> float:
    """Scar area in m2: true-cell count times the squared cell edge."""
    return mask.count * mask.cell_size ** 2


def area_series(masks: list[BinaryMask | None], sequence: VideoSequence) -> AreaSeries:
    """One entry per frame, dated from the sequence; a missing mask is an error."""
    if len(masks) != sequence.n:
        raise ArgumentError(
            f"got {len(masks)} masks for {sequence.n} frames; "
            "propagate the full sequence before computing the series"
        )
    entries = []
    for i, (mask, frame) in enumerate(zip(masks, sequence.frames)):
        if mask is None:
            raise ArgumentError(f"no mask for frame {i} ({frame.date})")
        entries.append(AreaEntry(frame_index=i, date=frame.date, area_m2=area(mask)))
    return AreaSeries(entries=entries, cell_size=sequence.template.cell_size)


def relative_error(pred_m2: float, ref_m2: float) -> float:
    """Unsigned percent deviation of a prediction from a reference area."""
    if not (ref_m2 > 0):
        raise ArgumentError(f"reference area must be > 0, got {ref_m2}")
    return 100.0 * abs(pred_m2 - ref_m2) / ref_m2


def percent_change(a0_m2: float, a1_m2: float) -> float:
    """Signed percent change from a0 to a1."""
    if not (a0_m2 > 0):
        raise ArgumentError(f"baseline area must be > 0, got {a0_m2}")
    return 100.0 * (a1_m2 - a0_m2) / a0_m2


def seasonal_split(series: AreaSeries) -> dict[str, AreaSeries]:
    """Partition into summer-autumn (June-October) and winter-spring (the rest)."""
    summer = [e for e in series.entries if e.date.month in SUMMER_AUTUMN_MONTHS]
    winter = [e for e in series.entries if e.date.month not in SUMMER_AUTUMN_MONTHS]
    return {
        "summer_autumn": AreaSeries(entries=summer, cell_size=series.cell_size),
        "winter_spring": AreaSeries(entries=winter, cell_size=series.cell_size),
    }


def detect_spikes(series: AreaSeries, factor: float = 2.0, window: int = 5) -> list[SpikeEvent]:
    """Entries whose area reaches ``factor`` times the trailing-median baseline.

    The baseline for entry t is the median area of the ``window`` entries
    before it, so only t >= window can fire. The median (not mean) resists
    the seasonal oscillation ordinary scar series show. A zero baseline
    counts as a spike only when the area actually rose above it.
    """
    if not (factor > 1.0):
        raise ArgumentError(f"spike factor must be > 1, got {factor}")
    if not (1 <= window < len(series)):
        raise ArgumentError(
            f"window must lie in [1, {len(series) - 1}] for this series, got {window}"
        )
    areas = series.areas()
    events = []
    for t in range(window, len(areas)):
        baseline = statistics.median(areas[t - window:t])
        if areas[t] >= factor * baseline and areas[t] > baseline:
            ratio = areas[t] / baseline if baseline > 0 else float("inf")
            e = series.entries[t]
            events.append(SpikeEvent(frame_index=e.frame_index, date=e.date,
                                     area_m2=e.area_m2, baseline_m2=baseline, ratio=ratio))
    return events


def boundary(mask: BinaryMask) -> BinaryMask:
    """Scar cells with at least one background or out-of-grid 4-neighbor.

    4-neighborhood keeps boundaries of 8-connected components closed.
    """
    bits = mask.bits
    interior = np.ones_like(bits)
    interior[0, :] = interior[-1, :] = False
    interior[:, 0] = interior[:, -1] = False
    if bits.shape[0] > 1:
        interior[1:, :] &= bits[:-1, :]
        interior[:-1, :] &= bits[1:, :]
    if bits.shape[1] > 1:
        interior[:, 1:] &= bits[:, :-1]
        interior[:, :-1] &= bits[:, 1:]
    edge = bits & ~interior
    return BinaryMask(mask.width, mask.height, mask.cell_size, edge)


def expansion_diff(reference: BinaryMask, current: BinaryMask) -> ExpansionDiff:
    """Cells gained and lost between two epochs, plus the signed net area."""
    if not reference.same_shape(current):
        raise DimensionError(
            f"mask shapes differ: reference {reference.width}x{reference.height}, "
            f"current {current.width}x{current.height}"
        )
    new_bits = current.bits & ~reference.bits
    lost_bits = reference.bits & ~current.bits
    new_mask = BinaryMask(current.width, current.height, current.cell_size, new_bits)
    lost_mask = BinaryMask(current.width, current.height, current.cell_size, lost_bits)
    return ExpansionDiff(new_area=new_mask, lost_area=lost_mask,
                         net_m2=area(current) - area(reference))


def _window_midpoint(year: int, start_month: int, end_month: int) -> dt.date:
    first = dt.date(year, start_month, 1)
    if end_month == 12:
        last = dt.date(year, 12, 31)
    else:
        last = dt.date(year, end_month + 1, 1) - dt.timedelta(days=1)
    return first + (last - first) / 2


def interannual_pairs(series: AreaSeries,
                      month_window: int | tuple[int, int]) -> list[tuple[AreaEntry, AreaEntry]]:
    """Pairs of corresponding-period frames from successive qualifying years.

    For every year holding at least one frame inside the month window, the
    frame nearest the window midpoint represents that year; representatives
    of consecutive qualifying years are paired. Years with no in-window frame
    drop out entirely.
    """
    if isinstance(month_window, int):
        start_month = end_month = month_window
    else:
        start_month, end_month = month_window
    if not (1 <= start_month <= 12 and 1 <= end_month <= 12 and start_month <= end_month):
        raise ArgumentError(f"month window must be ascending within 1..12, got {month_window}")

    in_window = [e for e in series.entries if start_month <= e.date.month <= end_month]
    by_year: dict[int, AreaEntry] = {}
    for year in sorted({e.date.year for e in in_window}):
        midpoint = _window_midpoint(year, start_month, end_month)
        candidates = [e for e in in_window if e.date.year == year]
        by_year[year] = min(candidates, key=lambda e: (abs(e.date - midpoint), e.date))

    years = sorted(by_year)
    return [(by_year[a], by_year[b]) for a, b in zip(years, years[1:])]


def series_to_csv(series: AreaSeries) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["frame_index", "date", "area_m2"])
    for e in series.entries:
        writer.writerow([e.frame_index, e.date.isoformat(), repr(e.area_m2)])
    return buf.getvalue()


def series_from_csv(text: str, cell_size: float = 1.0) -> AreaSeries:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != ["frame_index", "date", "area_m2"]:
        raise ArgumentError(f"unexpected area series header: {header}")
    entries = [
        AreaEntry(frame_index=int(row[0]), date=dt.date.fromisoformat(row[1]),
                  area_m2=float(row[2]))
        for row in reader if row
    ]
    return AreaSeries(entries=entries, cell_size=cell_size)
