############################ TEST DESCRIPTION ############################
#
# Tests of the text formats of `eecc.io.streams`.
#
# - class `TestEventLines`: parsing of single `t x y p` lines.
#
# - class `TestEventStreamReader`: lazy reading, non-monotone and
# out-of-sensor events, strict mode, and memory that stays flat over a
# stream of ten million lines.
#
# - class `TestSeeds`: seed lists, rejection and ordering.
#
# - class `TestTrackFiles`: track CSV files with 9 fractional digits, and
# the other CSV products with the per-feature template sharpness of the
# summary and metrics files.
#
###########################################################################

import io
import tracemalloc

import numpy as np
import pytest

from eecc.base import (
    Event,
    FeatureState,
    OutOfSensorWarning,
    SeedRejectedWarning,
    StreamParseError,
    TerminationReason,
    TimestampOrderWarning,
    TrackRecord,
)
from eecc.io import (
    SeedSpec,
    StreamHeader,
    parse_event_line,
    parse_event_stream,
    parse_seeds,
    parse_tracks,
    read_rows,
    read_sharpness,
    write_bench,
    write_cdf,
    write_events,
    write_metrics,
    write_seeds,
    write_summary,
    write_track,
    write_tracks,
)
from eecc.synth import BenchRow, FeatureEvaluation


class TestEventLines:
    def test_polarity_and_units(self):
        event = parse_event_line("0.001500 10.25 20.5 1\n", 1)
        assert event == Event(t_us=1500, x=10.25, y=20.5, polarity=1)
        assert parse_event_line("2.0 1 2 0", 1).polarity == -1
        assert parse_event_line("2.0 1 2 0", 1, t0_us=500_000).t_us == 1_500_000

    @pytest.mark.parametrize("line", ["", "   \n", "# t x y p", "  # comment"])
    def test_blank_and_comment(self, line):
        assert parse_event_line(line, 3) is None

    def test_trailing_comment(self):
        event = parse_event_line("0.5 1 2 1 # on edge", 1)
        assert event.t_us == 500_000

    @pytest.mark.parametrize(
        "line",
        [
            "0.1 1 2",
            "0.1 1 2 1 5",
            "abc 1 2 1",
            "0.1 1 2 2",
            "0.1 1 2 -1",
            "-0.1 1 2 1",
            "0.1 nan 2 1",
        ],
    )
    def test_malformed(self, line):
        with pytest.raises(StreamParseError) as err:
            parse_event_line(line, 7)
        assert err.value.line_number == 7
        assert "line 7" in str(err.value)


class TestEventStreamReader:
    def test_lazy_from_lines(self):
        lines = ["# header\n", "0.1 1 1 1\n", "\n", "0.2 2 2 0\n"]
        reader = parse_event_stream(lines)
        events = list(reader)
        assert [e.t_us for e in events] == [100_000, 200_000]
        assert reader.events_read == 2
        assert reader.lines_read == 4

    def test_skips_non_monotone(self):
        lines = ["0.3 1 1 1", "0.1 1 1 1", "0.2 1 1 1", "0.4 1 1 1"]
        reader = parse_event_stream(lines)
        with pytest.warns(TimestampOrderWarning):
            events = list(reader)
        assert [e.t_us for e in events] == [300_000, 400_000]
        assert reader.skipped_order == 2

    def test_equal_timestamps_kept(self):
        lines = ["0.1 1 1 1", "0.1 2 2 1"]
        assert len(list(parse_event_stream(lines))) == 2

    def test_strict(self):
        lines = ["0.3 1 1 1", "0.1 1 1 1"]
        with pytest.raises(StreamParseError) as err:
            list(parse_event_stream(lines, strict=True))
        assert err.value.line_number == 2

    def test_outside_sensor(self):
        lines = ["0.1 1 1 1", "0.2 240 10 1", "0.3 10 -0.5 1", "0.4 239.5 179.5 0"]
        reader = parse_event_stream(lines, header=StreamHeader(240, 180))
        with pytest.warns(OutOfSensorWarning):
            events = list(reader)
        assert len(events) == 2
        assert reader.dropped_outside == 2

    def test_from_file(self, tmp_path):
        path = tmp_path / "events.txt"
        events = [Event(t_us=10 * i, x=1.0 + i, y=2.0, polarity=1) for i in range(5)]
        write_events(path, events)
        back = list(parse_event_stream(path))
        assert [e.t_us for e in back] == [e.t_us for e in events]
        np.testing.assert_allclose([e.x for e in back], [e.x for e in events])

    @pytest.mark.slow
    def test_memory_does_not_grow_with_length(self):
        total = 10_000_000
        lines = (
            f"{k * 1.0e-6:.6f} {k % 200 + 0.5} {k % 150 + 0.5} {k % 2}\n"
            for k in range(total)
        )
        reader = parse_event_stream(lines)
        tracemalloc.start()
        try:
            count = sum(1 for _ in reader)
            _, peak = tracemalloc.get_traced_memory()
        finally:
            tracemalloc.stop()
        assert count == total
        assert reader.lines_read == total
        assert peak < 1 << 20


class TestSeeds:
    def test_sorted_and_labels(self):
        text = io.StringIO("0.2 50 60 b\n# comment\n0.1 70 80 a label\n0.2 30 40\n")
        seeds = parse_seeds(text)
        assert [s.t_us for s in seeds] == [100_000, 200_000, 200_000]
        assert seeds[0].label == "a label"
        # ties keep file order
        assert seeds[1].label == "b"
        assert seeds[2].label is None

    def test_rejected(self):
        rejected = []
        text = ["0.0 10 10\n", "0.0 300 10 far\n"]
        with pytest.warns(SeedRejectedWarning):
            seeds = parse_seeds(text, rejected=rejected)
        assert len(seeds) == 1
        assert rejected[0].label == "far"

    def test_malformed(self):
        with pytest.raises(StreamParseError):
            parse_seeds(["0.0 10\n"])
        with pytest.raises(StreamParseError):
            parse_seeds(["0.0 x 10\n"])

    def test_write(self):
        sink = io.StringIO()
        seeds = [SeedSpec(0, 10.0, 20.0, "one"), SeedSpec(5000, 30.0, 40.0)]
        write_seeds(sink, seeds)
        back = parse_seeds(io.StringIO(sink.getvalue()))
        assert back == seeds


def make_record(feature_id, n, reason=TerminationReason.LOST, rng=None):
    rng = np.random.default_rng(feature_id) if rng is None else rng
    record = TrackRecord(feature_id=feature_id, reason=reason)
    for i in range(n):
        record.append(
            1000 * i,
            FeatureState(
                x=rng.uniform(15, 200), y=rng.uniform(15, 160), theta=rng.uniform(-3, 3)
            ),
        )
    return record


class TestTrackFiles:
    def test_single_track(self, tmp_path):
        path = tmp_path / "track_0000.csv"
        record = make_record(4, 25)
        assert write_track(path, record) == path.stat().st_size

        lines = path.read_text().splitlines()
        assert lines[0] == "feature_id,t_us,x,y,theta_rad"
        assert lines[-1] == "4,end,lost,,"
        for field in lines[1].split(",")[2:]:
            assert len(field.split(".")[1]) == 9

        (back,) = parse_tracks(path)
        assert back.feature_id == 4
        assert back.reason == TerminationReason.LOST
        assert back.times_us == record.times_us
        np.testing.assert_allclose(
            back.state_array(), record.state_array(), rtol=0, atol=1e-9
        )

    def test_several_tracks(self):
        records = [make_record(i, 3 + i, reason=None) for i in range(3)]
        records[1].reason = TerminationReason.END_OF_STREAM
        sink = io.StringIO()
        write_tracks(sink, records)
        back = parse_tracks(io.StringIO(sink.getvalue()))
        assert [r.feature_id for r in back] == [0, 1, 2]
        assert [len(r) for r in back] == [3, 4, 5]
        assert back[0].reason is None
        assert back[1].reason == TerminationReason.END_OF_STREAM

    def test_empty_track(self):
        sink = io.StringIO()
        write_track(sink, TrackRecord(7, reason=TerminationReason.INIT_STARVED))
        (back,) = parse_tracks(io.StringIO(sink.getvalue()))
        assert len(back) == 0
        assert back.reason == TerminationReason.INIT_STARVED

    @pytest.mark.parametrize(
        "text",
        [
            "id,t,x,y,theta\n",
            "feature_id,t_us,x,y,theta_rad\n0,10,1.0,2.0\n",
            "feature_id,t_us,x,y,theta_rad\n0,10,a,2.0,0.0\n",
            "feature_id,t_us,x,y,theta_rad\n0,end,vanished,,\n",
        ],
    )
    def test_malformed(self, text):
        with pytest.raises(StreamParseError):
            parse_tracks(io.StringIO(text))

    def test_products(self):
        sink = io.StringIO()
        write_cdf(sink, np.linspace(0.0, 1.0, 3), np.array([0.0, 0.5, 1.0]))
        rows = read_rows(io.StringIO(sink.getvalue()))
        assert list(rows[0]) == ["t", "cdf"]
        assert [float(r["cdf"]) for r in rows] == [0.0, 0.5, 1.0]

        sink = io.StringIO()
        write_bench(sink, [BenchRow("incremental", 100, 12.5, 11.0)])
        (row,) = read_rows(io.StringIO(sink.getvalue()))
        assert row == {
            "mode": "incremental",
            "events": "100",
            "mean_us": "12.500",
            "median_us": "11.000",
        }

        sink = io.StringIO()
        write_summary(sink, [make_record(0, 3, reason=TerminationReason.IDLE)])
        (row,) = read_rows(io.StringIO(sink.getvalue()))
        assert row["status"] == "idle"
        assert row["states"] == "3"
        assert float(row["age_s"]) == pytest.approx(0.002)
        assert row["sharpness"] == ""

    def test_summary_sharpness(self, tmp_path):
        path = tmp_path / "summary.csv"
        records = [make_record(i, 3, reason=None) for i in range(3)]
        write_summary(path, records, sharpness={0: 0.125, 2: float("nan")})
        assert read_sharpness(path) == {0: 0.125}

        with pytest.raises(StreamParseError):
            read_sharpness(io.StringIO("feature_id,sharpness\n0,sharp\n"))
        with pytest.raises(StreamParseError):
            read_sharpness(io.StringIO("feature_id,age_s\n0,1.0\n"))

    def test_metrics(self):
        times = np.linspace(0.0, 0.5, 6)
        evaluations = [
            FeatureEvaluation(
                feature_id=feature_id,
                times_s=times,
                position_errors=np.full(6, error),
                theta_errors=np.zeros(6),
                start_s=0.0,
                track_age_s=0.5,
                terminated_early=False,
                template_sharpness=sharpness,
            )
            for feature_id, error, sharpness in [(0, 0.25, 0.2), (1, 7.0, float("nan"))]
        ]
        sink = io.StringIO()
        write_metrics(sink, evaluations)
        rows = read_rows(io.StringIO(sink.getvalue()))
        assert list(rows[0]) == [
            "feature_id",
            "age_s",
            "mean_err_px",
            "outlier",
            "sharpness",
        ]
        assert rows[0]["outlier"] == "0"
        assert float(rows[0]["sharpness"]) == pytest.approx(0.2)
        assert rows[1]["outlier"] == "1"
        assert rows[1]["sharpness"] == ""
