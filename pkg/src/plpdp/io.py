"""
File formats
============

Activation files hold one value per line with an optional ``# fps=<int>``
header (100 FPS when absent).  Annotation files hold one beat time in
seconds per line; further whitespace- or comma-separated columns (e.g.
metrical positions) are ignored.  Lines starting with ``#`` are comments in
both formats.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import DEFAULT_FPS, NoveltyCurve, ParameterError, open_output, validate_novelty

__all__ = [
    "ParseError",
    "ACTIVATION_SUFFIX",
    "ANNOTATION_SUFFIX",
    "ActivationFile",
    "AnnotationFile",
    "read_activation",
    "write_activation",
    "read_annotation",
    "track_id",
    "find_files",
]

ACTIVATION_SUFFIX = ".act.csv"
ANNOTATION_SUFFIX = ".beats"

_FPS_HEADER = re.compile(r"#\s*fps\s*=\s*(\S+)\s*$")
_SPLIT = re.compile(r"[\s,;]+")


class ParseError(Exception):
    """Malformed or unreadable input file."""


def _lines(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ParseError(f"{path}: cannot read ({exc})") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if line:
            yield lineno, line


@dataclass(frozen=True)
class ActivationFile:
    """Parsed activation file.

    ``fps`` is None when the file has no header.
    """

    path: Path
    fps: int | None
    values: np.ndarray

    @classmethod
    def parse(cls, path) -> "ActivationFile":
        fps = None
        values = []
        for lineno, line in _lines(path):
            if line.startswith("#"):
                m = _FPS_HEADER.match(line)
                if m:
                    try:
                        fps = int(m.group(1))
                    except ValueError:
                        raise ParseError(f"{path}:{lineno}: bad fps header {line!r}") from None
                continue
            try:
                values.append(float(_SPLIT.split(line)[0]))
            except ValueError:
                raise ParseError(f"{path}:{lineno}: not a number: {line!r}") from None
        if not values:
            raise ParseError(f"{path}: no activation values")
        return cls(Path(path), fps, np.asarray(values))

    def curve(self, fps: int | None = None) -> NoveltyCurve:
        """Validated curve.  An explicit ``fps`` overrides the header."""
        if fps is None:
            fps = self.fps if self.fps is not None else DEFAULT_FPS
        try:
            return validate_novelty(self.values, fps)
        except ParameterError as exc:
            raise ParseError(f"{self.path}: {exc}") from exc


@dataclass(frozen=True)
class AnnotationFile:
    """Parsed beat annotation: strictly increasing, non-negative seconds."""

    path: Path
    times: np.ndarray

    @classmethod
    def parse(cls, path) -> "AnnotationFile":
        times = []
        for lineno, line in _lines(path):
            if line.startswith("#"):
                continue
            try:
                times.append(float(_SPLIT.split(line)[0]))
            except ValueError:
                raise ParseError(f"{path}:{lineno}: not a time: {line!r}") from None
        times = np.asarray(times, dtype=float)
        if not np.all(np.isfinite(times)) or np.any(times < 0):
            raise ParseError(f"{path}: beat times must be finite and non-negative")
        if np.any(np.diff(times) <= 0):
            raise ParseError(f"{path}: beat times must be strictly increasing")
        return cls(Path(path), times)


def read_activation(path, fps: int | None = None) -> NoveltyCurve:
    return ActivationFile.parse(path).curve(fps)


def write_activation(path, curve: NoveltyCurve) -> None:
    """Header line with the frame rate, then the shortest round-trip repr
    of every value."""
    with open_output(path) as fh:
        fh.write(f"# fps={curve.fps}\n")
        fh.writelines(f"{float(v)!r}\n" for v in curve.values)


def read_annotation(path) -> np.ndarray:
    return AnnotationFile.parse(path).times


def track_id(path) -> str:
    """File name without the format suffix."""
    name = Path(path).name
    for suffix in (ACTIVATION_SUFFIX, ANNOTATION_SUFFIX):
        if name.endswith(suffix):
            return name[: -len(suffix)]
    return Path(path).stem


def find_files(path, suffix: str) -> list[Path]:
    """``[path]`` for a file, else every ``*suffix`` below the directory in
    sorted order."""
    path = Path(path)
    if path.is_dir():
        return sorted(p for p in path.rglob(f"*{suffix}") if p.is_file())
    if not path.exists():
        raise ParseError(f"{path}: no such file or directory")
    return [path]
