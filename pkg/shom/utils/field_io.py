"""
shom - Field I/O

Binary field dumps and the text artifacts written into run directories.

Binary layout (all little-endian):

    b"SHOM"                magic
    u32                    format version
    u32                    d
    u32 x d                grid sizes
    u32                    number of fields
    f64                    box length L
    f64 x (n_fields * N)   payload, fields in order, C order per field
"""

import csv
import logging
from pathlib import Path

import numpy as np

from shom.spectral import SlowField, SlowGrid

logger = logging.getLogger(__name__)

MAGIC = b"SHOM"
FORMAT_VERSION = 1

_U32 = np.dtype("<u4")
_F64 = np.dtype("<f8")


def write_fields(path: Path | str, fields: list[SlowField]) -> Path:
    """
    Dump slow fields sharing one grid.

    Raises:
        ValueError: empty list, or fields on different grids.
    """
    if not fields:
        raise ValueError("nothing to write")
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise ValueError("all dumped fields must share one grid")

    header = np.array([FORMAT_VERSION, grid.dim, *grid.shape, len(fields)], dtype=_U32)
    payload = np.stack([np.asarray(f.values, dtype=float) for f in fields])
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(header.tobytes())
        fh.write(np.array([grid.box_length], dtype=_F64).tobytes())
        fh.write(payload.astype(_F64).tobytes())
    logger.debug(f"[IO] wrote {len(fields)} field(s) on {grid.shape} to {path}")
    return path


def read_fields(path: Path | str) -> list[SlowField]:
    """
    Read a dump written by write_fields.

    Raises:
        ValueError: wrong magic, unsupported version, truncated payload.
    """
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise ValueError(f"{path}: not a SHOM field file")
    offset = 4
    version, dim = np.frombuffer(data, _U32, 2, offset)
    offset += 8
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported format version {version}")
    sizes = tuple(int(n) for n in np.frombuffer(data, _U32, int(dim), offset))
    offset += 4 * int(dim)
    (n_fields,) = np.frombuffer(data, _U32, 1, offset)
    offset += 4
    (box_length,) = np.frombuffer(data, _F64, 1, offset)
    offset += 8

    if len(set(sizes)) != 1:
        raise ValueError(f"{path}: non-square grid {sizes}")
    count = int(n_fields) * int(np.prod(sizes))
    if len(data) - offset != count * _F64.itemsize:
        raise ValueError(f"{path}: payload holds {len(data) - offset} bytes, expected {count * 8}")
    payload = np.frombuffer(data, _F64, count, offset).reshape((int(n_fields),) + sizes)

    grid = SlowGrid(int(dim), float(box_length), sizes[0])
    return [SlowField(grid, np.array(values)) for values in payload]


def write_csv(path: Path | str, rows: list[dict], fieldnames: list[str] | None = None) -> Path:
    """Write rows as CSV; columns default to the keys of the first row."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fieldnames is None:
        fieldnames = list(rows[0]) if rows else []
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _format_value(v) for k, v in row.items()})
    return path


def field_rows(fields: dict[str, SlowField]) -> list[dict]:
    """One row per grid point: coordinates x0.. followed by the named field values."""
    grid = next(iter(fields.values())).grid
    coords = [c.reshape(-1) for c in grid.coordinates]
    columns = {f"x{j}": c for j, c in enumerate(coords)}
    columns.update({name: f.values.reshape(-1) for name, f in fields.items()})
    return [{k: float(v[i]) for k, v in columns.items()} for i in range(grid.size)]


def write_summary(path: Path | str, summary: dict) -> Path:
    """Line-oriented key=value text, keys in insertion order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"{key}={_format_value(value)}" for key, value in summary.items()]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _format_value(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (tuple, list)):
        return " ".join(_format_value(v) for v in value)
    return str(value)
