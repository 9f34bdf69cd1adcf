"""Reading and writing the canonical track formats.

Two interchangeable encodings are supported:

``csv``
    Line 1 is ``#BBX1 `` followed by a JSON header object, line 2 holds the
    channel labels, then one comma-separated row per frame.
``json``
    A single object with the header fields plus ``data`` (array of rows).

Header keys: ``format_version``, ``modality``, ``fps``, ``labels``,
``template_id``, ``basis_id``, ``source_backend`` and the optional ``units``
mapping. Values are written with 17 significant digits so a round trip is
bit-exact. NaN cells are written as ``nan`` (CSV) or ``null`` (JSON).
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
from pathlib import Path

import numpy as np

from ._fsutil import atomic_write_text
from .errors import ParseError, ValidationError
from .signal import (
    ExpressionTrack,
    LandmarkTrack,
    Modality,
    PoseTrack,
    RectTrack,
    Signal,
)

__all__ = [
    "FORMAT_VERSION",
    "SUPPORTED_FORMATS",
    "UnknownFormatVersion",
    "ColumnMismatch",
    "NonNumericCell",
    "InvalidHeader",
    "read_track",
    "write_track",
    "convert",
    "validate_signal",
    "to_rects",
    "to_landmarks",
    "to_pose",
    "to_expressions",
]

FORMAT_VERSION = "1"
MAGIC = "#BBX1"
SUPPORTED_FORMATS = ("csv", "json")
HEADER_KEYS = ("format_version", "modality", "fps", "labels", "template_id", "basis_id",
               "source_backend")
OPTIONAL_KEYS = ("units",)

_DEG_UNITS = {"deg", "degree", "degrees"}


class UnknownFormatVersion(ParseError):
    pass


class ColumnMismatch(ParseError):
    pass


class NonNumericCell(ParseError):
    pass


class InvalidHeader(ParseError):
    pass


def _fmt(v: float) -> str:
    if math.isnan(v):
        return "nan"
    return format(v, ".17g")


def validate_signal(s: Signal) -> Signal:
    """Check the modality-specific invariants of ``s``; return it unchanged."""
    m = s.modality
    if m is Modality.RECTS:
        RectTrack(s)
    elif m in (Modality.LANDMARKS2D, Modality.LANDMARKS3D):
        LandmarkTrack(s)
    elif m is Modality.POSE:
        PoseTrack(s)
    elif m is Modality.EXPRESSIONS:
        ExpressionTrack(s)
    return s


def _header_dict(s: Signal) -> dict:
    h = {
        "format_version": FORMAT_VERSION,
        "modality": s.modality.value,
        "fps": s.fps,
        "labels": list(s.channel_labels),
        "template_id": s.template_id,
        "basis_id": s.basis_id,
        "source_backend": s.source_backend,
    }
    if s.units:
        h["units"] = dict(s.units)
    return h


def _signal_from_header(header, data, path, line):
    def bad(msg, cls=InvalidHeader):
        return cls(msg, path=path, line=line)

    if not isinstance(header, dict):
        raise bad("header is not an object")
    version = header.get("format_version")
    if str(version) != FORMAT_VERSION:
        raise bad(f"unknown format_version {version!r} (supported: {FORMAT_VERSION})",
                  UnknownFormatVersion)
    missing = [k for k in ("modality", "fps", "labels") if k not in header]
    if missing:
        raise bad(f"header missing keys: {', '.join(missing)}")
    unknown = set(header) - set(HEADER_KEYS) - set(OPTIONAL_KEYS) - {"data"}
    if unknown:
        raise bad(f"unknown header keys: {', '.join(sorted(unknown))}")
    try:
        modality = Modality(header["modality"])
    except ValueError:
        raise bad(f"unknown modality {header['modality']!r}") from None
    fps = header["fps"]
    if isinstance(fps, bool) or not isinstance(fps, (int, float)) or not math.isfinite(fps) \
            or fps <= 0:
        raise bad(f"fps must be a positive number, got {fps!r}")
    labels = header["labels"]
    if not isinstance(labels, list) or not all(isinstance(c, str) for c in labels):
        raise bad("labels must be a list of strings")

    units = dict(header.get("units") or {})
    if modality is Modality.POSE and str(units.get("rotation", "")).lower() in _DEG_UNITS:
        data = data.copy()
        data[:, :3] = np.deg2rad(data[:, :3])
        units["rotation"] = "rad"

    try:
        s = Signal(
            data, fps, labels, modality, units=units,
            template_id=header.get("template_id"), basis_id=header.get("basis_id"),
            source_backend=header.get("source_backend"),
        )
        return validate_signal(s)
    except ValidationError as exc:
        raise InvalidHeader(str(exc), path=path, line=line) from None


def _read_csv(text: str, path) -> Signal:
    lines = text.splitlines()
    first = lines[0] if lines else ""
    if not first.startswith(MAGIC):
        raise UnknownFormatVersion(f"missing {MAGIC} header line", path=path, line=1, column=1)
    try:
        header = json.loads(first[len(MAGIC):])
    except json.JSONDecodeError as exc:
        raise InvalidHeader(f"header is not valid JSON: {exc.msg}", path=path, line=1,
                            column=len(MAGIC) + exc.colno) from None
    if len(lines) < 2:
        raise InvalidHeader("missing channel label line", path=path, line=2)
    rows = list(csv.reader(_io.StringIO("\n".join(lines[1:]))))
    label_row = rows[0] if rows else []
    if isinstance(header, dict) and "labels" in header and label_row != header["labels"]:
        raise InvalidHeader("label line does not match header labels", path=path, line=2)
    ncol = len(label_row)
    values = np.empty((len(rows) - 1, ncol))
    for r, row in enumerate(rows[1:]):
        line_no = r + 3
        if len(row) != ncol:
            raise ColumnMismatch(
                f"row {r + 1}: expected {ncol} columns (one per label), got {len(row)}",
                path=path, line=line_no, column=min(len(row), ncol) + 1,
            )
        for c, cell in enumerate(row):
            try:
                values[r, c] = float(cell)
            except ValueError:
                raise NonNumericCell(f"row {r + 1}: non-numeric cell {cell!r}",
                                     path=path, line=line_no, column=c + 1) from None
    return _signal_from_header(header, values, path, 1)


def _read_json(text: str, path) -> Signal:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", path=path, line=exc.lineno,
                         column=exc.colno) from None
    if not isinstance(obj, dict) or "data" not in obj:
        raise InvalidHeader("structured track must be an object with a 'data' array",
                            path=path, line=1)
    labels = obj.get("labels") or []
    rows = obj["data"]
    if not isinstance(rows, list):
        raise InvalidHeader("'data' must be an array of rows", path=path, line=1)
    values = np.empty((len(rows), len(labels)))
    for r, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != len(labels):
            got = len(row) if isinstance(row, list) else "non-array"
            raise ColumnMismatch(f"row {r + 1}: expected {len(labels)} columns, got {got}",
                                 path=path, line=r + 1)
        for c, cell in enumerate(row):
            if cell is None:
                values[r, c] = np.nan
            elif isinstance(cell, (int, float)) and not isinstance(cell, bool):
                values[r, c] = cell
            else:
                raise NonNumericCell(f"row {r + 1}: non-numeric cell {cell!r}",
                                     path=path, line=r + 1, column=c + 1)
    header = {k: v for k, v in obj.items() if k != "data"}
    return _signal_from_header(header, values, path, 1)


def read_track(path) -> Signal:
    """Parse a canonical CSV or JSON track into a validated :class:`Signal`."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        return _read_json(text, path)
    return _read_csv(text, path)


def _format_of(path: Path, fmt):
    if fmt is None:
        fmt = "json" if path.suffix.lower() in (".json", ".bbxj") else "csv"
    if fmt not in SUPPORTED_FORMATS:
        raise ValidationError(
            f"unknown format {fmt!r}; supported formats: {', '.join(SUPPORTED_FORMATS)}"
        )
    return fmt


def dumps_track(s: Signal, fmt: str = "csv") -> str:
    validate_signal(s)
    header = _header_dict(s)
    if fmt == "json":
        rows = [[None if math.isnan(v) else float(v) for v in row] for row in s.data.tolist()]
        return json.dumps({**header, "data": rows}) + "\n"
    buf = _io.StringIO()
    buf.write(MAGIC + " " + json.dumps(header) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(s.channel_labels)
    for row in s.data:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()


def write_track(s: Signal, path, fmt: str | None = None) -> None:
    """Write ``s`` atomically; format from ``fmt`` or the file extension."""
    path = Path(path)
    atomic_write_text(path, dumps_track(s, _format_of(path, fmt)))


def convert(path_in, path_out, target_format: str) -> None:
    """Losslessly re-encode a track as ``csv`` or ``json``."""
    if target_format not in SUPPORTED_FORMATS:
        raise ValidationError(
            f"unknown target format {target_format!r}; supported formats: "
            f"{', '.join(SUPPORTED_FORMATS)}"
        )
    write_track(read_track(path_in), path_out, target_format)


def to_rects(s: Signal) -> RectTrack:
    return RectTrack(s)


def to_landmarks(s: Signal, canonicalized=False) -> LandmarkTrack:
    return LandmarkTrack(s, canonicalized=canonicalized)


def to_pose(s: Signal) -> PoseTrack:
    return PoseTrack(s)


def to_expressions(s: Signal) -> ExpressionTrack:
    return ExpressionTrack(s, is_local=bool(s.basis_id))
