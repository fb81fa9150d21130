"""Line-oriented ``key = value`` configuration files.

Blank lines and ``#`` comments are skipped.  An ``include FILE`` line splices
in another file, resolved relative to the including file; later assignments
override earlier ones, so a file can include a base profile and then adjust
individual keys.
"""

from __future__ import annotations

from collections.abc import Iterable
from pathlib import Path

from .errors import ValidationError


def parse_config(
    lines: Iterable[str],
    *,
    source: str = "<config>",
    base_dir: str | Path | None = None,
) -> dict[str, str]:
    """Parse configuration lines into an ordered key -> value mapping."""
    return _parse(lines, source, None if base_dir is None else Path(base_dir),
                  frozenset())


def load_config(path: str | Path) -> dict[str, str]:
    return _load(Path(path), frozenset())


def _load(path: Path, seen: frozenset[Path]) -> dict[str, str]:
    resolved = path.resolve()
    if resolved in seen:
        raise ValidationError(f"configuration include cycle at {path}")
    try:
        text = resolved.read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read config file {path}: {exc}") from exc
    return _parse(text.splitlines(), str(path), resolved.parent,
                  seen | {resolved})


def _parse(
    lines: Iterable[str],
    source: str,
    base_dir: Path | None,
    seen: frozenset[Path],
) -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("include ") or line == "include":
            target = line[len("include"):].strip()
            if not target:
                raise ValidationError(f"{source}:{lineno}: include needs a file name")
            if base_dir is None:
                raise ValidationError(
                    f"{source}:{lineno}: include is only available when "
                    "reading from a file"
                )
            values.update(_load(base_dir / target, seen))
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ValidationError(
                f"{source}:{lineno}: expected key = value, got {line!r}"
            )
        values[key.strip()] = value.strip()
    return values
