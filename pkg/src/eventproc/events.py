"""Typed event streams in continuous time, plus JSON-lines I/O.

A stream is a strictly increasing sequence of ``(k, t)`` pairs observed on
``[0, T]``.  Type ids run from 1 to K; id 0 is reserved for the
beginning-of-stream marker that models read before the first event.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

BOS = 0


class StreamError(ValueError):
    """Raised when a stream or stream file violates the data model."""


@dataclass(frozen=True)
class Event:
    k: int
    t: float


@dataclass(frozen=True)
class EventStream:
    """Events sorted by time on the observation window ``[0, horizon]``.

    Times and types are held as numpy arrays (``times`` float64, ``types``
    int64) so that models can consume them without copying.
    """

    times: np.ndarray
    types: np.ndarray
    horizon: float

    def __post_init__(self):
        times = np.ascontiguousarray(self.times, dtype=np.float64).reshape(-1)
        types = np.ascontiguousarray(self.types, dtype=np.int64).reshape(-1)
        times.setflags(write=False)
        types.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "types", types)
        object.__setattr__(self, "horizon", float(self.horizon))

    @classmethod
    def from_events(cls, events: Iterable[Event | tuple[int, float]], horizon: float) -> "EventStream":
        pairs = [(e.k, e.t) if isinstance(e, Event) else (int(e[0]), float(e[1])) for e in events]
        types = np.array([k for k, _ in pairs], dtype=np.int64)
        times = np.array([t for _, t in pairs], dtype=np.float64)
        return cls(times, types, horizon)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def events(self) -> list[Event]:
        return [Event(int(k), float(t)) for k, t in zip(self.types, self.times)]

    def prefix(self, n: int) -> "EventStream":
        """First ``n`` events; the horizon is kept."""
        return EventStream(self.times[:n], self.types[:n], self.horizon)

    def validate(self, num_types: int) -> None:
        """Check ordering, range and horizon; raise :class:`StreamError` naming the event index."""
        if not self.horizon > 0 or not np.isfinite(self.horizon):
            raise StreamError(f"horizon must be positive and finite, got {self.horizon}")
        for i, (k, t) in enumerate(zip(self.types, self.times)):
            if not 1 <= k <= num_types:
                raise StreamError(f"type {k} out of range 1..{num_types} at index {i}")
            if not np.isfinite(t) or t <= 0:
                raise StreamError(f"time {t} not in (0, T] at index {i}")
            if t > self.horizon:
                raise StreamError(f"time {t} exceeds horizon {self.horizon} at index {i}")
            if i > 0 and t <= self.times[i - 1]:
                raise StreamError(f"non-increasing times at index {i}")


@dataclass(frozen=True)
class Dataset:
    streams: tuple[EventStream, ...]
    num_types: int
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "streams", tuple(self.streams))
        if self.num_types < 1:
            raise StreamError(f"K must be at least 1, got {self.num_types}")

    def __len__(self) -> int:
        return len(self.streams)

    def __iter__(self):
        return iter(self.streams)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return Dataset(self.streams[i], self.num_types)
        return self.streams[i]

    @property
    def num_events(self) -> int:
        return sum(len(s) for s in self.streams)

    def validate(self) -> None:
        for j, s in enumerate(self.streams):
            try:
                s.validate(self.num_types)
            except StreamError as err:
                raise StreamError(f"stream {j}: {err}") from None


def stream_to_json(stream: EventStream, num_types: int) -> str:
    # repr() of a Python float is the shortest string that round-trips exactly
    events = ", ".join(f'{{"k": {int(k)}, "t": {float(t)!r}}}' for k, t in zip(stream.types, stream.times))
    return f'{{"T": {stream.horizon!r}, "K": {num_types}, "events": [{events}]}}'


def parse_stream(line: str, lineno: int = 1) -> tuple[EventStream, int]:
    try:
        obj = json.loads(line)
        horizon = float(obj["T"])
        num_types = int(obj["K"])
        raw = obj["events"]
        pairs = [(int(e["k"]), float(e["t"])) for e in raw]
    except (ValueError, KeyError, TypeError) as err:
        raise StreamError(f"line {lineno}: malformed stream record ({err})") from None
    stream = EventStream.from_events(pairs, horizon)
    return stream, num_types


def load_dataset(path: str | Path) -> Dataset:
    """Read a JSON-lines stream file and validate every stream.

    Blank lines and lines starting with ``#`` (provenance headers) are skipped.
    All records must agree on K.
    """
    streams: list[EventStream] = []
    num_types = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            stream, k = parse_stream(line, lineno)
            if num_types is None:
                num_types = k
            elif k != num_types:
                raise StreamError(f"line {lineno}: K={k} disagrees with K={num_types} declared earlier")
            try:
                stream.validate(k)
            except StreamError as err:
                raise StreamError(f"line {lineno} (stream {len(streams)}): {err}") from None
            streams.append(stream)
    if num_types is None:
        raise StreamError(f"{path}: no streams found")
    return Dataset(streams, num_types)


def save_dataset(dataset: Dataset, path: str | Path, header: dict | None = None) -> None:
    with open(path, "w") as fh:
        if header is not None:
            fh.write("# " + json.dumps(header, sort_keys=True) + "\n")
        for s in dataset.streams:
            fh.write(stream_to_json(s, dataset.num_types) + "\n")


def split_dataset(dataset: Dataset, fractions: Sequence[float], seed: int) -> tuple[Dataset, Dataset, Dataset]:
    """Shuffle with ``seed`` and cut into train/dev/test.

    Dev and test sizes are ``floor(f * n)``; train takes the remainder.
    """
    if len(fractions) != 3 or any(f < 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must be three non-negative numbers summing to 1, got {fractions}")
    n = len(dataset)
    order = np.random.default_rng(seed).permutation(n)
    n_dev = int(np.floor(fractions[1] * n + 1e-9))
    n_test = int(np.floor(fractions[2] * n + 1e-9))
    n_train = n - n_dev - n_test
    pick = lambda idx: Dataset([dataset.streams[i] for i in idx], dataset.num_types)
    return (
        pick(order[:n_train]),
        pick(order[n_train:n_train + n_dev]),
        pick(order[n_train + n_dev:]),
    )
