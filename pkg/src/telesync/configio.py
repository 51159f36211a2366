"""Plain-text key/value config files.

Format: one `key value...` pair per line, `#` starts a comment, blank lines
ignored. Values are whitespace-separated tokens; repeated keys are rejected.
Used by device presets and experiment configs.
"""

from __future__ import annotations

from .errors import FileFormatError


def read_kv_file(path) -> dict[str, list[str]]:
    """Parse a key/value file into {key: [tokens...]}. Errors cite line numbers."""
    out: dict[str, list[str]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            key, values = parts[0], parts[1:]
            if key in out:
                raise FileFormatError(path, lineno, f"duplicate key {key!r}")
            if not values:
                raise FileFormatError(path, lineno, f"key {key!r} has no value")
            out[key] = values
    return out


def write_kv_file(path, entries: dict[str, list[str]], header: str | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            for line in header.splitlines():
                fh.write(f"# {line}\n")
        for key, values in entries.items():
            fh.write(f"{key} {' '.join(str(v) for v in values)}\n")


def kv_floats(kv: dict[str, list[str]], key: str, path="<config>") -> list[float]:
    try:
        return [float(tok) for tok in kv[key]]
    except KeyError:
        raise FileFormatError(path, 0, f"missing key {key!r}") from None
    except ValueError as exc:
        raise FileFormatError(path, 0, f"key {key!r}: {exc}") from None
