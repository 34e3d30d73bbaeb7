"""
Append-only run history.

The first line of a log file is a JSON object holding run metadata; every
further line is one record `[time_ms, seq, agent, transition, payload]`
serialized with sorted keys so identical runs give identical bytes.
"""
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterator, List, NamedTuple, Optional, Tuple


logger = logging.getLogger(__name__)

LOG_FORMAT = "bikesim-eventlog v1"
RUN_END = "run_end"


class EventLogError(RuntimeError):
    pass


class LogRecord(NamedTuple):
    time: int
    seq: int
    agent: str
    transition: str
    payload: Dict[str, Any]


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


class EventLog:
    """
    Records are kept in memory, and also streamed to `path` when one is given.

    `keep_in_memory=False` bounds memory for long sweeps; the records can
    then only be read back from the file.
    """

    def __init__(self, metadata: Dict[str, Any], path=None, keep_in_memory: bool = True,
                 flush_every: int = 10000):
        self.metadata = dict(metadata, format=LOG_FORMAT)
        self.path = Path(path) if path else None
        self.keep_in_memory = keep_in_memory or self.path is None
        self.flush_every = max(1, flush_every)
        self.records: List[LogRecord] = []
        self.count = 0
        self.last_time = 0
        self.closed = False
        self._fh = None
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._fh = self.path.open("w", encoding="utf-8", newline="\n")
            self._fh.write(_dumps({"meta": self.metadata}) + "\n")

    def __len__(self):
        return self.count

    def __iter__(self) -> Iterator[LogRecord]:
        if self.keep_in_memory:
            return iter(self.records)
        return read_log(self.path)[1]

    def record(self, time_ms: int, agent: str, transition: str, payload: Optional[Dict[str, Any]] = None):
        if self.closed:
            raise EventLogError(f"Log is closed; cannot append {transition} for {agent}")
        if time_ms < self.last_time:
            raise EventLogError(
                f"Out-of-order record at t={time_ms} ms after t={self.last_time} ms ({agent} {transition})"
            )
        rec = LogRecord(int(time_ms), self.count, agent, transition, dict(payload or {}))
        self.count += 1
        self.last_time = rec.time
        if self.keep_in_memory:
            self.records.append(rec)
        if self._fh is not None:
            self._fh.write(_dumps(list(rec)) + "\n")
            if self.count % self.flush_every == 0:
                self._fh.flush()

    def close(self, time_ms: int, payload: Optional[Dict[str, Any]] = None):
        self.record(time_ms, "sim", RUN_END, payload)
        self.closed = True
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def abort(self):
        if self._fh is not None:
            self._fh.close()
            self._fh = None
        self.closed = True


def _iter_records(path: Path) -> Iterator[LogRecord]:
    with path.open("r", encoding="utf-8") as fh:
        next(fh, None)
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                time_ms, seq, agent, transition, payload = json.loads(line)
            except ValueError as exc:
                raise EventLogError(f"{path.name}:{lineno}: malformed record") from exc
            yield LogRecord(time_ms, seq, agent, transition, payload)


def read_log(path) -> Tuple[Dict[str, Any], Iterator[LogRecord]]:
    path = Path(path)
    if not path.is_file():
        raise EventLogError(f"Event log not found: {path}")
    with path.open("r", encoding="utf-8") as fh:
        first = fh.readline()
    try:
        metadata = json.loads(first)["meta"]
    except (ValueError, KeyError, TypeError) as exc:
        raise EventLogError(f"{path.name} has no metadata header") from exc
    if metadata.get("format") != LOG_FORMAT:
        raise EventLogError(f"{path.name} is not a {LOG_FORMAT} file")
    return metadata, _iter_records(path)
