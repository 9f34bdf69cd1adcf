"""Retention periods, sidecar metadata and the cache reuse rule."""

from __future__ import annotations

import datetime as dt
import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

from filelock import FileLock

from .._fsutil import atomic_write_text
from ..errors import SidecarError, ValidationError

HASH_ALGORITHM = "sha256"
TIME_FORMAT = "%Y-%m-%d %H:%M:%S"
SIDECAR_SUFFIX = ".json"
SETTINGS_NAME = ".behaviometry-retention"
LOCK_NAME = ".behaviometry.lock"

_UNIT_SECONDS = {
    "second": 1,
    "minute": 60,
    "hour": 3600,
    "day": 86400,
    "week": 7 * 86400,
    "month": 30 * 86400,
    "year": 365 * 86400,
}
_GRAMMAR = "'<number> <unit>' with unit one of second, minute, hour, day, week, month, year"
_RETENTION_RE = re.compile(r"^\s*(\d+(?:\.\d+)?)\s+([A-Za-z]+)\s*$")


@dataclass(frozen=True)
class RetentionPeriod:
    seconds: int
    source_text: str = ""

    def __post_init__(self):
        if self.seconds < 0:
            raise ValidationError(f"retention must be non-negative, got {self.seconds}")


def parse_retention(text: str) -> RetentionPeriod:
    """Parse phrases such as ``'1 year'``, ``'3 minutes'``, ``'7 seconds'``.

    Months are 30 days and years 365 days.
    """
    m = _RETENTION_RE.match(text or "")
    if not m:
        raise ValidationError(f"cannot parse retention {text!r}; expected {_GRAMMAR}")
    number, unit = m.groups()
    unit = unit.lower()
    if unit.endswith("s") and unit[:-1] in _UNIT_SECONDS:
        unit = unit[:-1]
    if unit not in _UNIT_SECONDS:
        raise ValidationError(f"unknown retention unit {m.group(2)!r}; expected {_GRAMMAR}")
    seconds = float(number) * _UNIT_SECONDS[unit]
    if seconds != int(seconds):
        raise ValidationError(f"retention {text!r} is not a whole number of seconds")
    return RetentionPeriod(int(seconds), text)


def format_retention(r: RetentionPeriod) -> str:
    """Shortest ``'<n> <unit>'`` phrase using the largest exact unit."""
    s = r.seconds
    for unit, size in sorted(_UNIT_SECONDS.items(), key=lambda kv: -kv[1]):
        if s and s % size == 0 or (s == 0 and unit == "second"):
            n = s // size
            return f"{n} {unit}" + ("" if n == 1 else "s")
    raise AssertionError("unreachable")


DEFAULT_RETENTION = parse_retention("6 months")


def sidecar_path(output_path) -> Path:
    """``out/x.csv`` -> ``out/x.csv.json``; ``out/x`` -> ``out/x.json``."""
    p = Path(output_path)
    if p.name.lower().endswith(SIDECAR_SUFFIX):
        raise ValidationError(f"{p} ends with {SIDECAR_SUFFIX}; outputs may not be sidecars")
    return p.with_name(p.name + SIDECAR_SUFFIX)


def hash_input(path, chunk_size: int = 1 << 20) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(chunk_size), b""):
            h.update(chunk)
    return h.hexdigest()


def hash_inputs(paths) -> str:
    """Digest of one file, or of the newline-joined digests of several."""
    paths = list(paths)
    if len(paths) == 1:
        return hash_input(paths[0])
    joined = "\n".join(hash_input(p) for p in paths)
    return hashlib.sha256(joined.encode()).hexdigest()


def _local_now() -> dt.datetime:
    return dt.datetime.now().astimezone()


def _offset(now: dt.datetime) -> str:
    return now.strftime("%z") or "+0000"


_REQUIRED = ("backend", "cmd", "input", "input_hash", "output", "time")
_KNOWN = _REQUIRED + ("hash_algorithm", "utc_offset", "toolkit_version")
_HEX = re.compile(r"^[0-9a-f]+$")


@dataclass
class SidecarMetadata:
    """Provenance record stored next to an output file.

    ``extra`` carries backend-specific keys (model, camera, landmark
    template, ...) that are written at the top level of the sidecar.
    """

    backend: str
    cmd: str
    input: str
    input_hash: str
    output: str
    time: str
    hash_algorithm: str = HASH_ALGORITHM
    utc_offset: str | None = None
    toolkit_version: str | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        try:
            dt.datetime.strptime(self.time, TIME_FORMAT)
        except (TypeError, ValueError):
            raise SidecarError(f"time {self.time!r} does not match {TIME_FORMAT}") from None
        if not isinstance(self.input_hash, str) or not _HEX.match(self.input_hash):
            raise SidecarError(f"input_hash {self.input_hash!r} is not lowercase hex")
        clash = set(self.extra) & set(_KNOWN)
        if clash:
            raise SidecarError(f"extra keys shadow standard keys: {sorted(clash)}")

    @classmethod
    def create(cls, backend, cmd, input_path, input_hash, output, now=None, **extra):
        from .. import __version__

        now = now or _local_now()
        return cls(
            backend=backend, cmd=cmd,
            input=str(Path(input_path).resolve()) if input_path else "",
            input_hash=input_hash, output=str(Path(output).resolve()),
            time=now.strftime(TIME_FORMAT), utc_offset=_offset(now),
            toolkit_version=__version__, extra=extra,
        )

    def timestamp(self) -> dt.datetime:
        t = dt.datetime.strptime(self.time, TIME_FORMAT)
        if self.utc_offset:
            t = dt.datetime.strptime(self.time + " " + self.utc_offset, TIME_FORMAT + " %z")
        return t

    def to_dict(self) -> dict:
        d = {"backend": self.backend}
        d.update(self.extra)
        d.update(input_hash=self.input_hash, cmd=self.cmd, input=self.input,
                 output=self.output, time=self.time, hash_algorithm=self.hash_algorithm)
        if self.utc_offset is not None:
            d["utc_offset"] = self.utc_offset
        if self.toolkit_version is not None:
            d["toolkit_version"] = self.toolkit_version
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SidecarMetadata":
        if not isinstance(d, dict):
            raise SidecarError("sidecar is not a JSON object")
        for key in _REQUIRED:
            if key not in d:
                raise SidecarError(f"sidecar missing required key {key!r}")
        known = {k: d[k] for k in _KNOWN if k in d}
        extra = {k: v for k, v in d.items() if k not in _KNOWN}
        return cls(**known, extra=extra)


def write_sidecar(meta: SidecarMetadata, output_path) -> Path:
    path = sidecar_path(output_path)
    atomic_write_text(path, json.dumps(meta.to_dict(), indent=2) + "\n")
    return path


def read_sidecar(output_path) -> SidecarMetadata:
    path = sidecar_path(output_path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise SidecarError(f"no sidecar for {output_path} (expected {path})") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SidecarError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    try:
        return SidecarMetadata.from_dict(data)
    except SidecarError as exc:
        raise SidecarError(f"{path}: {exc}") from None


class ReuseDecision(NamedTuple):
    reuse: bool
    reason: str

    def __bool__(self):
        return self.reuse


def should_reuse(output_path, retention: RetentionPeriod, current_input_hash: str,
                 now: dt.datetime | None = None, current_cmd: str | None = None) -> ReuseDecision:
    """Decide whether a cached output can be used as-is.

    Reuse requires the output and its sidecar to exist, the sidecar to
    parse, the recorded input digest to match, the recorded command to match
    (when ``current_cmd`` is given) and the output to be no older than the
    retention period. The reason names the first failing check.
    """
    out = Path(output_path)
    if not out.exists():
        return ReuseDecision(False, "output missing")
    if not sidecar_path(out).exists():
        return ReuseDecision(False, "sidecar missing")
    try:
        meta = read_sidecar(out)
        created = meta.timestamp()
    except (SidecarError, ValueError) as exc:
        return ReuseDecision(False, f"sidecar unreadable: {exc}")
    if meta.input_hash != current_input_hash:
        return ReuseDecision(False, "input changed")
    if current_cmd is not None and meta.cmd != current_cmd:
        return ReuseDecision(False, "command changed")
    now = now or _local_now()
    if created.tzinfo is None:
        now = now.replace(tzinfo=None) if now.tzinfo is None else \
            now.astimezone().replace(tzinfo=None)
    elif now.tzinfo is None:
        now = now.astimezone()
    age = (now - created).total_seconds()
    if age > retention.seconds:
        return ReuseDecision(False, "retention expired")
    return ReuseDecision(True, "within retention")


def output_lock(directory) -> FileLock:
    """Advisory lock serializing writers within one output directory."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    return FileLock(str(d / LOCK_NAME))


class Cache:
    """Retention settings persisted per output directory."""

    def __init__(self, directory):
        self.directory = Path(directory)

    @property
    def settings_path(self) -> Path:
        return self.directory / SETTINGS_NAME

    @property
    def retention(self) -> RetentionPeriod:
        try:
            return parse_retention(self.settings_path.read_text().strip())
        except FileNotFoundError:
            return DEFAULT_RETENTION
        except ValidationError as exc:
            raise SidecarError(f"{self.settings_path}: {exc}") from None

    def change_retention_period(self, text: str) -> RetentionPeriod:
        r = parse_retention(text)
        self.directory.mkdir(parents=True, exist_ok=True)
        atomic_write_text(self.settings_path, format_retention(r) + "\n")
        return r

    def outputs(self) -> list:
        """Non-hidden files in the directory that are not sidecars."""
        if not self.directory.exists():
            return []
        return sorted(p for p in self.directory.rglob("*")
                      if p.is_file() and not p.name.startswith(".")
                      and not p.name.endswith(SIDECAR_SUFFIX))

    def entries(self) -> list:
        """``(output, SidecarMetadata)`` for every output; raises on a bad sidecar."""
        return [(p, read_sidecar(p)) for p in self.outputs()]
