"""Tests for the JSON-lines trace format."""

import json

import pytest

from wbansim.trace import TraceRecord, TraceWriter, read_trace, write_trace


def _records():
    return [
        TraceRecord("CSIM", 0, 1, "s0.0", "tdma", 0, 4, "delivered"),
        TraceRecord("CSIM", 0, 11, "crd0", "fcs", 0, -1, "silent"),
    ]


def test_record_serializes_compactly():
    """Each record is one compact JSON object with every field."""
    line = _records()[0].to_json()
    assert " " not in line
    assert json.loads(line) == {
        "scheme": "CSIM",
        "superframe": 0,
        "tick": 1,
        "node": "s0.0",
        "frame": "tdma",
        "slot": 0,
        "channel": 4,
        "outcome": "delivered",
    }


def test_write_and_read_trace(tmp_path):
    """Written traces read back as the same records."""
    path = tmp_path / "nested" / "trace.jsonl"
    assert write_trace(_records(), path) == 2
    assert read_trace(path) == _records()
    assert len(path.read_text().splitlines()) == 2


def test_writer_outside_context_raises(tmp_path):
    """The writer only accepts records while open."""
    writer = TraceWriter(tmp_path / "t.jsonl")
    with pytest.raises(RuntimeError):
        writer(_records()[0])


def test_unwritable_path_raises_oserror(tmp_path):
    """A trace path under a regular file cannot be created."""
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError, match="cannot write trace"):
        with TraceWriter(blocker / "trace.jsonl"):
            pass
