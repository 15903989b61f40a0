"""Plain-text serialization helpers shared by the solvers and the CLI.

Every CSV starts with a ``# key: value`` metadata block, then a header
row, then ``%.12g`` cells.  Nothing here writes timestamps; wall-clock
values go through :func:`excluded_line` so reproducibility checks can
filter them out with a single substring match.
"""

import hashlib
import json

EXCLUDED_MARK = "excluded"


def format_cell(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return "%.12g" % value
    return str(value)


def settings_hash(mapping: dict) -> str:
    """Stable 12-hex digest of a flat settings mapping."""
    canon = json.dumps(
        {str(k): format_cell(v) for k, v in mapping.items()},
        sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


def excluded_line(key: str, value) -> str:
    """Metadata line exempt from byte-reproducibility comparisons."""
    return f"# {EXCLUDED_MARK} {key}: {format_cell(value)}"


def write_csv(path, columns, rows, metadata=None, excluded=None):
    """Write one CSV file; returns the path.

    metadata: ordered mapping rendered as ``# key: value`` lines.
    excluded: mapping rendered through :func:`excluded_line`.
    """
    lines = []
    for key, value in (metadata or {}).items():
        lines.append(f"# {key}: {format_cell(value)}")
    for key, value in (excluded or {}).items():
        lines.append(excluded_line(key, value))
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(format_cell(v) for v in row))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def write_document(path, document: dict):
    """Structured result document as stable, sorted JSON."""
    with open(path, "w", newline="\n") as fh:
        json.dump(document, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def reproducible_lines(text: str):
    """The lines of a report that must be byte-identical across reruns."""
    return [line for line in text.splitlines()
            if not line.startswith(f"# {EXCLUDED_MARK} ")
            and f'"{EXCLUDED_MARK} ' not in line]
