"""
Text formats read and written by `eecc`: event streams, seed lists, tracks,
metrics and configuration files.

"""

from .text import open_text, open_sink, read_key_values

from .config import Config, load_config

from .streams import (
    StreamHeader,
    SeedSpec,
    EventStreamReader,
    parse_event_line,
    parse_event_stream,
    parse_seeds,
    write_events,
    write_seeds,
    write_track,
    write_tracks,
    parse_tracks,
    write_metrics,
    write_cdf,
    write_bench,
    write_summary,
    read_rows,
    read_sharpness,
)

__all__ = [
    # text.py
    "open_text",
    "open_sink",
    "read_key_values",
    # config.py
    "Config",
    "load_config",
    # streams.py
    "StreamHeader",
    "SeedSpec",
    "EventStreamReader",
    "parse_event_line",
    "parse_event_stream",
    "parse_seeds",
    "write_events",
    "write_seeds",
    "write_track",
    "write_tracks",
    "parse_tracks",
    "write_metrics",
    "write_cdf",
    "write_bench",
    "write_summary",
    "read_rows",
    "read_sharpness",
]
