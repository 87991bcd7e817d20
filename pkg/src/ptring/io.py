"""CSV and JSON readers and writers.

Spectrum CSV: header ``freq_hz,transmission`` or ``freq_hz,dos``, one row per
grid point. Timestamp CSV: header ``channel,time_ps`` with integer
picosecond times. Every writer goes through a temporary file in the target
directory followed by an atomic rename, so a failed run leaves no partial
output.
"""

import csv
import json
import os
import tempfile
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .photon_sim import TimestampStream
from .tcmt import Spectrum


class FormatError(ValueError):
    """Input file does not follow the expected layout."""


def _fmt(x):
    return repr(float(x))


@contextmanager
def atomic_open(path, mode="w"):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, newline="" if "b" not in mode else None) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_spectrum_csv(path, spec):
    with atomic_open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["freq_hz", spec.kind])
        for f, v in zip(spec.freqs, spec.values):
            w.writerow([_fmt(f), _fmt(v)])


def read_spectrum_csv(path):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except UnicodeDecodeError as exc:
        raise FormatError(f"{path}: not a text file") from exc
    if not rows:
        raise FormatError(f"{path}: empty file")
    head = [h.strip() for h in rows[0]]
    if len(head) != 2 or head[0] != "freq_hz" or head[1] not in ("transmission", "dos"):
        raise FormatError(f"{path}: header must be freq_hz,transmission or freq_hz,dos")
    body = [r for r in rows[1:] if r]
    try:
        data = np.array([[float(a), float(b)] for a, b in body], dtype=float)
    except ValueError as exc:
        raise FormatError(f"{path}: non-numeric or malformed row") from exc
    if data.shape[0] < 2:
        raise FormatError(f"{path}: need at least 2 rows")
    try:
        return Spectrum(data[:, 0], data[:, 1], kind=head[1])
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def write_timestamps_csv(path, *streams):
    with atomic_open(path) as fh:
        fh.write("channel,time_ps\n")
        for st in streams:
            if st.times_ps.size:
                fh.write("".join(f"{st.channel},{t}\n" for t in st.times_ps.tolist()))


def read_timestamps_csv(path):
    """Streams in the file keyed by channel name, in order of first appearance."""
    with open(path, newline="") as fh:
        head = fh.readline().strip()
        if head != "channel,time_ps":
            raise FormatError(f"{path}: header must be channel,time_ps")
        chans, times = [], []
        for n, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2 or not parts[1].strip().isdigit():
                raise FormatError(f"{path}:{n}: expected channel,unsigned integer")
            chans.append(parts[0].strip())
            times.append(int(parts[1]))
    out = {}
    chans = np.array(chans, dtype=object)
    times = np.array(times, dtype=np.int64)
    for name in dict.fromkeys(chans.tolist()):
        t = times[chans == name]
        if np.any(np.diff(t) < 0):
            raise FormatError(f"{path}: channel {name} is not sorted")
        out[name] = TimestampStream(name, t)
    return out


def read_single_stream(path):
    streams = read_timestamps_csv(path)
    if len(streams) != 1:
        raise FormatError(f"{path}: expected one channel, found {len(streams)}")
    return next(iter(streams.values()))


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path, obj):
    with atomic_open(path) as fh:
        json.dump(_plain(obj), fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def write_matrix_csv(path, header, rows):
    with atomic_open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
