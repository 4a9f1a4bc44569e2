"""Trace records emitted by the protocol automata, and their JSON-lines file format."""

import json
from pathlib import Path
from typing import IO, Callable, Iterable, NamedTuple, Optional


class TraceRecord(NamedTuple):
    """One protocol event.

    `channel` is -1 when no channel applies (a silent FCS decision).
    """

    scheme: str
    superframe: int
    tick: int
    node: str
    frame: str
    slot: int
    channel: int
    outcome: str

    def to_json(self) -> str:
        return json.dumps(self._asdict(), separators=(",", ":"))


TraceSink = Callable[[TraceRecord], None]


class TraceWriter:
    """Writes records to a file, one JSON object per line.

    Use as a context manager; the instance itself is a TraceSink.
    """

    def __init__(self, path: Path):
        self.path = Path(path)
        self._file: Optional[IO[str]] = None
        self.written = 0

    def __enter__(self) -> "TraceWriter":
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._file = open(self.path, "w", encoding="utf-8", newline="\n")
        except OSError as exc:
            raise OSError(f"cannot write trace to {self.path}: {exc}") from exc
        return self

    def __exit__(self, *exc_info) -> None:
        if self._file is not None:
            self._file.close()
            self._file = None

    def __call__(self, record: TraceRecord) -> None:
        if self._file is None:
            raise RuntimeError("TraceWriter used outside its context")
        self._file.write(record.to_json() + "\n")
        self.written += 1


def write_trace(records: Iterable[TraceRecord], path: Path) -> int:
    """Write all records to `path`; returns how many were written."""
    with TraceWriter(path) as writer:
        for record in records:
            writer(record)
    return writer.written


def read_trace(path: Path) -> list[TraceRecord]:
    with open(path, "r", encoding="utf-8") as f:
        return [TraceRecord(**json.loads(line)) for line in f if line.strip()]
