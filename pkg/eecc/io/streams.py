"""Plain-text event streams, seed lists and the CSV products of a run."""

import csv
import io
import logging
import warnings
from dataclasses import dataclass
from typing import Dict, Iterable, Iterator, List, Mapping, Optional

import numpy as np

from ..base.geometry import Event, FeatureState
from ..base.misc import (
    OutOfSensorWarning,
    SeedRejectedWarning,
    StreamParseError,
    TimestampOrderWarning,
)
from ..base.track import TerminationReason, TrackRecord
from ..mpi import MPI_RAISE_EXCEPTION

from .text import open_sink, open_text, strip_comment

logger = logging.getLogger(__name__)

TRACK_HEADER = ["feature_id", "t_us", "x", "y", "theta_rad"]
METRICS_HEADER = ["feature_id", "age_s", "mean_err_px", "outlier", "sharpness"]
CDF_HEADER = ["t", "cdf"]
BENCH_HEADER = ["mode", "events", "mean_us", "median_us"]
SUMMARY_HEADER = ["feature_id", "age_s", "states", "status", "sharpness"]


@dataclass(frozen=True)
class StreamHeader:
    """Sensor geometry and time origin of a stream

    Attributes
    ----------
    width : int
        Sensor width in pixels
    height : int
        Sensor height in pixels
    t0_s : float
        Time origin subtracted from every timestamp, in seconds
    """

    width: int = 240
    height: int = 180
    t0_s: float = 0.0

    def __post_init__(self):
        MPI_RAISE_EXCEPTION(
            condition=(self.width <= 0 or self.height <= 0),
            exception=ValueError,
            message=f"Invalid sensor size {self.width}x{self.height}",
        )

    def contains(self, x: float, y: float) -> bool:
        return 0.0 <= x < self.width and 0.0 <= y < self.height


@dataclass(frozen=True)
class SeedSpec:
    """Where and when to start a track

    Attributes
    ----------
    t_us : int
        Start time in microseconds
    x : float
        Column of the feature centre
    y : float
        Row of the feature centre
    label : str | None
        Free-form name
    """

    t_us: int
    x: float
    y: float
    label: Optional[str] = None

    @property
    def t(self) -> float:
        return self.t_us * 1.0e-6

    def state(self) -> FeatureState:
        return FeatureState(x=self.x, y=self.y, theta=0.0)


def seconds_to_us(value: float) -> int:
    return int(round(float(value) * 1.0e6))


def parse_event_line(line: str, line_number: int, t0_us: int = 0) -> Optional[Event]:
    """Parses a `t x y p` line. Returns `None` for blank and comment lines.

    Raises
    ------
    StreamParseError
        On a malformed line
    """
    text = strip_comment(line)
    if not text:
        return None
    parts = text.split()
    if len(parts) != 4:
        raise StreamParseError(
            line_number, f"expected `t x y p`, got {len(parts)} fields"
        )
    try:
        t_us = seconds_to_us(parts[0]) - t0_us
        x = float(parts[1])
        y = float(parts[2])
        p = int(parts[3])
    except ValueError as err:
        raise StreamParseError(line_number, str(err))
    if p not in (0, 1):
        raise StreamParseError(line_number, f"polarity must be 0 or 1, got {p}")
    if t_us < 0 or not (np.isfinite(x) and np.isfinite(y)):
        raise StreamParseError(line_number, "negative timestamp or non-finite position")
    return Event(t_us=t_us, x=x, y=y, polarity=1 if p == 1 else -1)


class EventStreamReader(object):
    """Lazy iterator over the events of a text stream.

    Lines are read one at a time, so memory use does not depend on the
    stream length. Events outside the sensor are dropped. An event older
    than its predecessor is skipped, or fails the stream in strict mode.

    Parameters
    ----------
    source : path | text stream | iterable of lines
        The `t x y p` stream
    header : StreamHeader | None
        Sensor geometry, 240x180 when `None`
    strict : bool
        Raise on non-monotone timestamps instead of skipping

    Attributes
    ----------
    lines_read : int
        Lines consumed so far
    events_read : int
        Events yielded so far
    skipped_order : int
        Events skipped for a non-monotone timestamp
    dropped_outside : int
        Events dropped for lying outside the sensor
    """

    def __init__(self, source, header: Optional[StreamHeader] = None, strict: bool = False):
        self.source = source
        self.header = StreamHeader() if header is None else header
        self.strict = strict
        self.lines_read = 0
        self.events_read = 0
        self.skipped_order = 0
        self.dropped_outside = 0

    def __iter__(self) -> Iterator[Event]:
        t0_us = seconds_to_us(self.header.t0_s)
        newest = None
        with open_text(self.source) as lines:
            for line_number, line in enumerate(lines, start=1):
                self.lines_read = line_number
                event = parse_event_line(line, line_number, t0_us)
                if event is None:
                    continue
                if newest is not None and event.t_us < newest:
                    if self.strict:
                        raise StreamParseError(
                            line_number,
                            f"timestamp {event.t_us} us precedes {newest} us",
                        )
                    if self.skipped_order == 0:
                        warnings.warn(
                            f"line {line_number}: non-monotone timestamp skipped",
                            TimestampOrderWarning,
                        )
                    self.skipped_order += 1
                    continue
                if not self.header.contains(event.x, event.y):
                    if self.dropped_outside == 0:
                        warnings.warn(
                            f"line {line_number}: event outside the "
                            f"{self.header.width}x{self.header.height} sensor dropped",
                            OutOfSensorWarning,
                        )
                    self.dropped_outside += 1
                    continue
                newest = event.t_us
                self.events_read += 1
                yield event

        if self.skipped_order or self.dropped_outside:
            logger.info(
                "%d events read, %d skipped out of order, %d outside the sensor",
                self.events_read,
                self.skipped_order,
                self.dropped_outside,
            )


def parse_event_stream(
    source, header: Optional[StreamHeader] = None, strict: bool = False
) -> EventStreamReader:
    """Lazy event sequence of a `t x y p` text stream.

    Timestamps are decimal seconds, converted to integer microseconds;
    polarity 0 maps to -1 and 1 to +1.
    """
    return EventStreamReader(source, header=header, strict=strict)


def parse_seeds(
    source,
    header: Optional[StreamHeader] = None,
    rejected: Optional[list] = None,
) -> List[SeedSpec]:
    """Reads `t x y [label]` lines, `#` starting a comment.

    Seeds outside the sensor are left out with a `SeedRejectedWarning`, and
    appended to `rejected` when given.

    Returns
    -------
    List[SeedSpec]
        Valid seeds sorted by start time, ties in file order
    """
    header = StreamHeader() if header is None else header
    t0_us = seconds_to_us(header.t0_s)
    seeds = []
    with open_text(source) as lines:
        for line_number, line in enumerate(lines, start=1):
            text = strip_comment(line)
            if not text:
                continue
            parts = text.split(maxsplit=3)
            if len(parts) < 3:
                raise StreamParseError(
                    line_number, f"expected `t x y [label]`, got {len(parts)} fields"
                )
            try:
                seed = SeedSpec(
                    t_us=seconds_to_us(parts[0]) - t0_us,
                    x=float(parts[1]),
                    y=float(parts[2]),
                    label=parts[3] if len(parts) == 4 else None,
                )
            except ValueError as err:
                raise StreamParseError(line_number, str(err))
            if not header.contains(seed.x, seed.y):
                warnings.warn(
                    f"line {line_number}: seed ({seed.x}, {seed.y}) outside the "
                    f"{header.width}x{header.height} sensor rejected",
                    SeedRejectedWarning,
                )
                if rejected is not None:
                    rejected.append(seed)
                continue
            seeds.append(seed)
    return sorted(seeds, key=lambda s: s.t_us)


def write_events(sink, events: Iterable[Event]) -> None:
    """Writes `t x y p` lines, polarity as 0/1"""
    rows = np.array(
        [(e.t_us * 1.0e-6, e.x, e.y, 1 if e.polarity > 0 else 0) for e in events],
        dtype=np.float64,
    ).reshape(-1, 4)
    with open_sink(sink) as handle:
        np.savetxt(handle, rows, fmt=["%.6f", "%.4f", "%.4f", "%d"], delimiter=" ")


def write_seeds(sink, seeds: Iterable[SeedSpec]) -> None:
    with open_sink(sink) as handle:
        for seed in seeds:
            label = "" if seed.label is None else f" {seed.label}"
            handle.write(f"{seed.t_us * 1.0e-6:.6f} {seed.x:.4f} {seed.y:.4f}{label}\n")


def _emit(sink, header: Optional[List[str]], rows: Iterable[list]) -> int:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    if header is not None:
        writer.writerow(header)
    writer.writerows(rows)
    text = buffer.getvalue()
    with open_sink(sink) as handle:
        handle.write(text)
    return len(text.encode("utf-8"))


def _track_rows(record: TrackRecord) -> Iterator[list]:
    for t_us, state in zip(record.times_us, record.states):
        yield [
            record.feature_id,
            t_us,
            f"{state.x:.9f}",
            f"{state.y:.9f}",
            f"{state.theta:.9f}",
        ]
    reason = "" if record.reason is None else TerminationReason(record.reason).value
    yield [record.feature_id, "end", reason, "", ""]


def write_track(sink, record: TrackRecord, header: bool = True) -> int:
    """Writes one track as CSV rows `feature_id,t_us,x,y,theta_rad` closed by
    a `feature_id,end,reason,,` row. Timestamps are integer microseconds
    and `x`, `y`, `theta_rad` carry 9 fractional digits.

    Returns
    -------
    int
        Bytes written
    """
    return _emit(sink, TRACK_HEADER if header else None, _track_rows(record))


def write_tracks(sink, records: Iterable[TrackRecord]) -> int:
    """Writes several tracks under a single header, one contiguous group each"""
    rows = (row for record in records for row in _track_rows(record))
    return _emit(sink, TRACK_HEADER, rows)


def parse_tracks(source) -> List[TrackRecord]:
    """Reads back the tracks written by `write_track` / `write_tracks`

    Raises
    ------
    StreamParseError
        On a wrong header, a malformed row or an unknown termination reason
    """
    records = []
    current = None
    with open_text(source) as lines:
        reader = csv.reader(lines)
        for row in reader:
            line_number = reader.line_num
            if line_number == 1:
                if row != TRACK_HEADER:
                    raise StreamParseError(1, f"unexpected track header {row}")
                continue
            if not row:
                continue
            if len(row) != len(TRACK_HEADER):
                raise StreamParseError(
                    line_number, f"expected {len(TRACK_HEADER)} fields, got {len(row)}"
                )
            try:
                feature_id = int(row[0])
                if current is None or current.feature_id != feature_id:
                    current = TrackRecord(feature_id=feature_id)
                    records.append(current)
                if row[1] == "end":
                    current.reason = TerminationReason(row[2]) if row[2] else None
                    current = None
                    continue
                current.append(
                    int(row[1]),
                    FeatureState(x=float(row[2]), y=float(row[3]), theta=float(row[4])),
                )
            except ValueError as err:
                raise StreamParseError(line_number, str(err))
    return records


def _fraction(value: float) -> str:
    return "" if np.isnan(value) else f"{value:.6f}"


def write_metrics(sink, evaluations: Iterable) -> int:
    """`feature_id,age_s,mean_err_px,outlier,sharpness` rows of per-feature
    evaluations, with an empty sharpness when the template is unknown"""
    rows = (
        [
            e.feature_id,
            f"{e.age_s:.6f}",
            f"{e.mean_error_px:.6f}",
            int(e.outlier),
            _fraction(e.template_sharpness),
        ]
        for e in evaluations
    )
    return _emit(sink, METRICS_HEADER, rows)


def write_cdf(sink, grid: np.ndarray, cdf: np.ndarray) -> int:
    """Plot-ready `t,cdf` columns"""
    rows = ([f"{t:.6f}", f"{c:.6f}"] for t, c in zip(grid, cdf))
    return _emit(sink, CDF_HEADER, rows)


def write_bench(sink, rows: Iterable) -> int:
    """`mode,events,mean_us,median_us` timing rows"""
    rows = (
        [r.mode, r.events, f"{r.mean_us:.3f}", f"{r.median_us:.3f}"] for r in rows
    )
    return _emit(sink, BENCH_HEADER, rows)


def write_summary(
    sink,
    records: Iterable[TrackRecord],
    sharpness: Optional[Mapping[int, float]] = None,
) -> int:
    """`feature_id,age_s,states,status,sharpness` row per track. `sharpness`
    maps feature ids to the share of their final template above a low
    threshold; missing ids get an empty cell."""
    sharpness = {} if sharpness is None else sharpness
    rows = (
        [
            r.feature_id,
            f"{r.age_s:.6f}",
            len(r),
            "" if r.reason is None else TerminationReason(r.reason).value,
            _fraction(sharpness.get(r.feature_id, float("nan"))),
        ]
        for r in records
    )
    return _emit(sink, SUMMARY_HEADER, rows)


def read_rows(source) -> List[dict]:
    """CSV rows as dictionaries keyed by the header"""
    with open_text(source) as lines:
        return list(csv.DictReader(lines))


def read_sharpness(source) -> Dict[int, float]:
    """Template sharpness by feature id from a `write_summary` file; tracks
    with an empty cell are left out

    Raises
    ------
    StreamParseError
        When the file has no sharpness column or holds a malformed value
    """
    rows = read_rows(source)
    sharpness = {}
    for line_number, row in enumerate(rows, start=2):
        if "sharpness" not in row:
            raise StreamParseError(1, "summary without a sharpness column")
        if not row["sharpness"]:
            continue
        try:
            sharpness[int(row["feature_id"])] = float(row["sharpness"])
        except (TypeError, ValueError) as err:
            raise StreamParseError(line_number, str(err))
    return sharpness
