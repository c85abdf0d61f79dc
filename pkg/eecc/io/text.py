import os
from contextlib import contextmanager
from typing import Dict, Iterator, Tuple

from ..base.misc import ConfigError


@contextmanager
def open_text(source) -> Iterator:
    """Yields the lines of `source`.

    `source` is either a path, which is opened (and closed on exit), or an
    already open text stream / iterable of lines, which is used as is.
    """
    if isinstance(source, (str, os.PathLike)):
        with open(source, "r", encoding="utf-8") as handle:
            yield handle
    else:
        yield source


def strip_comment(line: str) -> str:
    return line.split("#", 1)[0].strip()


def read_key_values(source) -> Dict[str, Tuple[str, int]]:
    """Reads `key = value` lines. Blank lines and `#` comments are ignored.

    Returns
    -------
    Dict[str, Tuple[str, int]]
        Raw value and 1-based line number of every key

    Raises
    ------
    ConfigError
        On a line without `=`, an empty key or a repeated key
    """
    entries = {}
    with open_text(source) as lines:
        for line_number, line in enumerate(lines, start=1):
            text = strip_comment(line)
            if not text:
                continue
            key, sep, value = text.partition("=")
            key = key.strip()
            if not sep or not key:
                raise ConfigError(
                    f"line {line_number}: expected `key = value`, got {line.strip()!r}"
                )
            if key in entries:
                raise ConfigError(f"line {line_number}: repeated key {key!r}")
            entries[key] = (value.strip(), line_number)
    return entries


def parse_bool(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


@contextmanager
def open_sink(sink) -> Iterator:
    """Yields a writable text stream for `sink`, a path or an open stream"""
    if isinstance(sink, (str, os.PathLike)):
        with open(sink, "w", encoding="utf-8", newline="") as handle:
            yield handle
    else:
        yield sink
