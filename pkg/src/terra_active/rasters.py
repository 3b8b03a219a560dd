"""Label raster I/O: PGM (P2 ASCII / P5 binary) and CSV integer grids.

Entry point for running experiments on externally produced class maps.
Class ids map to gray levels directly, with maxval = K - 1.
"""

from __future__ import annotations

from pathlib import Path as FilePath

import numpy as np


class RasterFormatError(ValueError):
    """Raised for malformed or out-of-range raster files."""


def _read_pgm_tokens(data: bytes, count: int) -> tuple[list[int], int]:
    """First `count` whitespace-separated header tokens, skipping # comments.
    Returns the tokens and the offset one past the final token's whitespace."""
    tokens: list[int] = []
    i = 0
    while len(tokens) < count:
        if i >= len(data):
            raise RasterFormatError("truncated PGM header")
        ch = data[i : i + 1]
        if ch == b"#":
            while i < len(data) and data[i : i + 1] not in (b"\n", b"\r"):
                i += 1
        elif ch.isspace():
            i += 1
        else:
            j = i
            while j < len(data) and not data[j : j + 1].isspace() and data[j : j + 1] != b"#":
                j += 1
            token = data[i:j]
            try:
                tokens.append(int(token))
            except ValueError:
                raise RasterFormatError(f"non-integer PGM header token: {token!r}") from None
            i = j
    return tokens, i


def read_pgm(path: str | FilePath) -> tuple[np.ndarray, int]:
    """Read a P2 or P5 PGM file; returns (raster, maxval)."""
    data = FilePath(path).read_bytes()
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise RasterFormatError("not a P2/P5 PGM file")
    (width, height, maxval), header_end = _read_pgm_tokens(data[2:], 3)
    body_start = 2 + header_end
    if width < 1 or height < 1 or maxval < 1:
        raise RasterFormatError("invalid PGM dimensions or maxval")

    if magic == b"P2":
        try:
            values = np.array([int(t) for t in data[body_start:].split()], dtype=np.int64)
        except ValueError:
            raise RasterFormatError("non-integer pixel token in P2 body") from None
    else:
        body = data[body_start + 1 :]  # exactly one whitespace byte after maxval
        if maxval < 256:
            values = np.frombuffer(body[: width * height], dtype=np.uint8).astype(np.int64)
        else:
            values = np.frombuffer(body[: 2 * width * height], dtype=">u2").astype(np.int64)
    if values.size < width * height:
        raise RasterFormatError("PGM pixel data shorter than header promises")
    raster = values[: width * height].reshape(height, width)
    if raster.min() < 0 or raster.max() > maxval:
        raise RasterFormatError("PGM pixel value outside [0, maxval]")
    return raster, maxval


def write_pgm(path: str | FilePath, raster: np.ndarray, maxval: int | None = None) -> None:
    """Write an integer raster as ASCII P2."""
    raster = np.asarray(raster, dtype=np.int64)
    if maxval is None:
        maxval = max(int(raster.max()), 1)
    h, w = raster.shape
    lines = [f"P2\n{w} {h}\n{maxval}\n"]
    for row in raster:
        lines.append(" ".join(str(v) for v in row) + "\n")
    FilePath(path).write_text("".join(lines))


def read_csv_raster(path: str | FilePath) -> np.ndarray:
    """Read a CSV grid of integers; errors carry the offending row/column."""
    rows: list[list[int]] = []
    with open(path) as fh:
        for r, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            row = []
            for c, token in enumerate(line.split(",")):
                try:
                    row.append(int(token.strip()))
                except ValueError:
                    raise RasterFormatError(
                        f"non-integer token {token.strip()!r} at row {r}, column {c}"
                    ) from None
            rows.append(row)
    if not rows:
        raise RasterFormatError("empty CSV raster")
    width = len(rows[0])
    for r, row in enumerate(rows):
        if len(row) != width:
            raise RasterFormatError(f"ragged CSV raster: row {r} has {len(row)} columns")
    return np.array(rows, dtype=np.int64)


def write_csv_raster(path: str | FilePath, raster: np.ndarray) -> None:
    with open(path, "w") as fh:
        for row in np.asarray(raster, dtype=np.int64):
            fh.write(",".join(str(v) for v in row) + "\n")


def load_label_raster(path: str | FilePath, num_classes: int | None = None) -> np.ndarray:
    """Load a class raster from PGM or CSV.

    K is inferred as max label + 1 unless num_classes overrides it; declared
    K must cover every label (and the PGM maxval).
    """
    path = FilePath(path)
    if path.suffix.lower() == ".csv":
        raster = read_csv_raster(path)
        declared_max = int(raster.max())
    else:
        raster, maxval = read_pgm(path)
        declared_max = maxval
    if raster.min() < 0:
        raise RasterFormatError("negative class id in raster")
    if num_classes is not None and declared_max > num_classes - 1:
        raise RasterFormatError(
            f"raster allows labels up to {declared_max} but num_classes is {num_classes}"
        )
    return raster
