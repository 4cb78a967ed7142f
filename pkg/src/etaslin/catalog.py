"""Event catalogs: ingestion, validation and history bookkeeping."""

import csv
import io
import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

logger = logging.getLogger(__name__)


class CatalogError(ValueError):
    """Raised for invalid catalogs or windows."""


class CatalogParseError(CatalogError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmptyCatalogError(CatalogError):
    pass


@dataclass(frozen=True)
class Event:
    time: float
    magnitude: float


@dataclass(frozen=True)
class ObservationWindow:
    """Time interval ``[t_start, t_end]`` (days) and magnitude cutoff."""

    t_start: float
    t_end: float
    m_cutoff: float

    def __post_init__(self):
        if not (np.isfinite(self.t_start) and np.isfinite(self.t_end)):
            raise CatalogError("window bounds must be finite")
        if not self.t_start < self.t_end:
            raise CatalogError(
                f"t_start ({self.t_start}) must be < t_end ({self.t_end})")

    @property
    def length(self):
        return self.t_end - self.t_start


@dataclass(frozen=True)
class EventCatalog:
    """Immutable, time-ordered catalog of (time, magnitude) events.

    Times are stored in the original units; ``rel_times`` gives them relative
    to the window start, which is what the model code works with.
    """

    times: np.ndarray
    magnitudes: np.ndarray
    window: ObservationWindow
    n_dropped: int = field(default=0, compare=False)

    def __post_init__(self):
        times = np.array(self.times, dtype=float).reshape(-1)
        mags = np.array(self.magnitudes, dtype=float).reshape(-1)
        if times.shape != mags.shape:
            raise CatalogError("times and magnitudes differ in length")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(mags))):
            raise CatalogError("event times and magnitudes must be finite")
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise CatalogError("event times must be strictly increasing")
        w = self.window
        if times.size and (times[0] < w.t_start or times[-1] > w.t_end):
            raise CatalogError("event times outside the observation window")
        if mags.size and mags.min() < w.m_cutoff:
            raise CatalogError("magnitude below the cutoff")
        times.setflags(write=False)
        mags.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "magnitudes", mags)

    def __len__(self):
        return self.times.size

    def __iter__(self):
        for t, m in zip(self.times, self.magnitudes):
            yield Event(float(t), float(m))

    def __eq__(self, other):
        if not isinstance(other, EventCatalog):
            return NotImplemented
        return (self.window == other.window
                and np.array_equal(self.times, other.times)
                and np.array_equal(self.magnitudes, other.magnitudes))

    __hash__ = None

    @property
    def events(self):
        return list(self)

    @cached_property
    def rel_times(self):
        out = self.times - self.window.t_start
        out.setflags(write=False)
        return out

    @cached_property
    def rel_magnitudes(self):
        out = self.magnitudes - self.window.m_cutoff
        out.setflags(write=False)
        return out

    @cached_property
    def pairs(self):
        """Index arrays ``(target, source)`` over all pairs source < target."""
        n = len(self)
        target, source = np.tril_indices(n, k=-1)
        target.setflags(write=False)
        source.setflags(write=False)
        return target, source

    def to_text(self, delimiter=","):
        """Serialize as a delimited table readable by :func:`parse_catalog`."""
        lines = [delimiter.join(("time", "magnitude"))]
        lines += [delimiter.join((repr(float(t)), repr(float(m))))
                  for t, m in zip(self.times, self.magnitudes)]
        return "\n".join(lines) + "\n"


def history_before(catalog, t):
    """Events strictly before ``t``, in time order."""
    k = int(np.searchsorted(catalog.times, t, side="left"))
    return catalog.events[:k]


def _split_rows(text):
    lines = text.splitlines()
    header_idx = None
    for i, line in enumerate(lines):
        if line.strip() and not line.lstrip().startswith("#"):
            header_idx = i
            break
    if header_idx is None:
        raise EmptyCatalogError("no header line found")
    comma = "," in lines[header_idx]
    for i, line in enumerate(lines[header_idx:], start=header_idx + 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        if comma:
            fields = next(csv.reader(io.StringIO(line)))
        else:
            fields = line.split()
        yield i, [f.strip() for f in fields]


def parse_catalog(text, window, jitter_ties=None):
    """Parse a delimited event table into an :class:`EventCatalog`.

    Parameters
    ----------
    text : str
        Comma- or whitespace-delimited table with a header naming at least
        the ``time`` (days) and ``magnitude`` columns. Extra columns are
        ignored; lines starting with ``#`` are comments.
    window : ObservationWindow
        Rows outside ``[t_start, t_end]`` or below ``m_cutoff`` are dropped.
    jitter_ties : float, optional
        If given, tied times are separated by subtracting ``k * jitter_ties``
        from the ``k``-th duplicate. By default ties raise.

    Returns
    -------
    EventCatalog
        Sorted catalog; ``n_dropped`` holds the number of discarded rows.
    """
    rows = _split_rows(text)
    header_line, header = next(rows)
    names = [h.lower() for h in header]
    try:
        it, im = names.index("time"), names.index("magnitude")
    except ValueError:
        raise CatalogParseError(
            "header must name 'time' and 'magnitude' columns", header_line)

    times, mags = [], []
    dropped = 0
    for lineno, fields in rows:
        if len(fields) < len(header):
            raise CatalogParseError(
                f"expected {len(header)} fields, got {len(fields)}", lineno)
        try:
            t = float(fields[it])
            m = float(fields[im])
        except ValueError:
            raise CatalogParseError(
                f"non-numeric time or magnitude {fields[it]!r}, "
                f"{fields[im]!r}", lineno)
        if not (np.isfinite(t) and np.isfinite(m)):
            raise CatalogParseError("non-finite value", lineno)
        if t < window.t_start or t > window.t_end or m < window.m_cutoff:
            dropped += 1
            continue
        times.append(t)
        mags.append(m)

    if not times:
        raise EmptyCatalogError(
            f"no events left after windowing ({dropped} dropped)")
    if dropped:
        logger.info("dropped %d rows outside window or below cutoff", dropped)

    times = np.asarray(times)
    mags = np.asarray(mags)
    order = np.argsort(times, kind="stable")
    times, mags = times[order], mags[order]
    times = _resolve_ties(times, jitter_ties)
    order = np.argsort(times, kind="stable")
    times, mags = times[order], mags[order]
    if times[0] < window.t_start:
        raise CatalogError("tie jitter moved an event before t_start")
    return EventCatalog(times, mags, window, n_dropped=dropped)


def _resolve_ties(times, eps):
    if times.size < 2 or np.all(np.diff(times) > 0):
        return times
    if eps is None:
        dup = times[1:][np.diff(times) == 0][0]
        raise CatalogError(
            f"tied event times at t={dup!r}; pass jitter_ties to separate")
    if eps <= 0:
        raise CatalogError("jitter_ties must be positive")
    out = times.copy()
    rank = 0
    for i in range(1, times.size):
        rank = rank + 1 if times[i] == times[i - 1] else 0
        out[i] = times[i] - rank * eps
    return out


def read_catalog(path, window, jitter_ties=None):
    with open(path) as fh:
        return parse_catalog(fh.read(), window, jitter_ties=jitter_ties)


def write_catalog(catalog, path):
    with open(path, "w") as fh:
        fh.write(catalog.to_text())
