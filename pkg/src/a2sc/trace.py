"""Trace files: ordered envelope wire records concatenated in a ``.trace`` file."""

from __future__ import annotations

from pathlib import Path
from typing import Iterable

from .messaging import WIRE_MAGIC, Envelope, decode, encode


def dump_trace(envelopes: Iterable[Envelope]) -> bytes:
    return b"".join(encode(e) for e in envelopes)


def write_trace(envelopes: Iterable[Envelope], path: str | Path) -> None:
    Path(path).write_bytes(dump_trace(envelopes))


def read_trace(path: str | Path) -> list[Envelope]:
    """Parse a trace file back into its envelope sequence."""
    data = Path(path).read_bytes()
    text = data.decode("utf-8")
    if not text:
        return []
    magic = WIRE_MAGIC + "\n"
    chunks = text.split(magic)
    if chunks[0] != "":
        raise ValueError("trace does not start with a record magic line")
    return [decode((magic + chunk).encode("utf-8")) for chunk in chunks[1:]]
