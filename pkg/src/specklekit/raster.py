"""Raster container and file I/O.

Two on-disk formats are supported. FR32 is the native lossless format:
the ASCII magic ``FR32``, two little-endian uint32 fields (width, height),
then width*height little-endian float32 samples in row-major order. Binary
PGM (P5, maxval 255) is provided for interchange with image viewers;
writing quantizes to 8 bits, so PGM round trips are lossy.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError, RasterFormatError

FR32_MAGIC = b"FR32"
_FR32_HEADER = struct.Struct("<4sII")

# Guard against absurd dimensions from a corrupt header before allocating.
_MAX_ELEMENTS = 1 << 26


@dataclass
class Raster:
    """A 2-D image with a domain tag.

    Parameters
    ----------
    data : ndarray
        2-D array of samples, row-major. Stored as float64.
    kind : str
        ``"intensity"`` for physical images (non-negative by contract) or
        ``"transformed"`` for values in a transformed working domain.
    """

    data: np.ndarray
    kind: str = "intensity"

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2 or self.data.size == 0:
            raise ValueError("raster data must be a non-empty 2-D array")
        if self.kind not in ("intensity", "transformed"):
            raise ValueError(f"unknown raster kind: {self.kind!r}")

    @property
    def height(self) -> int:
        return int(self.data.shape[0])

    @property
    def width(self) -> int:
        return int(self.data.shape[1])

    def require_intensity(self) -> None:
        """Raise unless this raster is a valid intensity image."""
        if self.kind != "intensity":
            raise DomainError(f"expected an intensity raster, got kind={self.kind!r}")
        if not np.all(np.isfinite(self.data)):
            raise DomainError("intensity raster contains non-finite samples")
        if np.any(self.data < 0):
            raise DomainError("intensity raster contains negative samples")


def write_fr32(path: str | Path, raster: Raster | np.ndarray) -> None:
    """Write a raster as an FR32 file (lossless float32)."""
    data = raster.data if isinstance(raster, Raster) else np.asarray(raster)
    if data.ndim != 2 or data.size == 0:
        raise ValueError("FR32 payload must be a non-empty 2-D array")
    height, width = data.shape
    payload = np.ascontiguousarray(data, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(_FR32_HEADER.pack(FR32_MAGIC, width, height))
        fh.write(payload)


def read_fr32(path: str | Path) -> Raster:
    """Read an FR32 file. Malformed input raises with the failing byte offset."""
    blob = Path(path).read_bytes()
    if len(blob) < _FR32_HEADER.size:
        raise RasterFormatError(
            f"truncated header: file has {len(blob)} bytes, header needs "
            f"{_FR32_HEADER.size}",
            offset=len(blob),
        )
    magic, width, height = _FR32_HEADER.unpack_from(blob)
    if magic != FR32_MAGIC:
        raise RasterFormatError(f"bad magic {magic!r}, expected {FR32_MAGIC!r}", offset=0)
    if width == 0 or height == 0:
        raise RasterFormatError(f"invalid dimensions {width}x{height}", offset=4)
    if width * height > _MAX_ELEMENTS:
        raise RasterFormatError(
            f"dimensions {width}x{height} exceed the {_MAX_ELEMENTS}-element limit",
            offset=4,
        )
    expected = _FR32_HEADER.size + 4 * width * height
    if len(blob) != expected:
        raise RasterFormatError(
            f"payload size mismatch: file has {len(blob)} bytes, expected {expected}",
            offset=min(len(blob), expected),
        )
    data = np.frombuffer(blob, dtype="<f4", offset=_FR32_HEADER.size)
    return Raster(data.astype(np.float64).reshape(height, width))


def write_pgm(path: str | Path, raster: Raster | np.ndarray) -> None:
    """Write an 8-bit binary PGM, mapping [0, max] to [0, 255] half-up."""
    data = raster.data if isinstance(raster, Raster) else np.asarray(raster, dtype=np.float64)
    if data.ndim != 2 or data.size == 0:
        raise ValueError("PGM payload must be a non-empty 2-D array")
    height, width = data.shape
    peak = float(data.max())
    if peak > 0:
        levels = np.floor(data * (255.0 / peak) + 0.5)
    else:
        levels = np.zeros_like(data)
    payload = np.clip(levels, 0, 255).astype(np.uint8).tobytes()
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        fh.write(payload)


def _pgm_tokens(blob: bytes, count: int, start: int) -> tuple[list[bytes], int]:
    """Scan `count` whitespace-separated header tokens, honoring # comments."""
    tokens: list[bytes] = []
    pos = start
    while len(tokens) < count:
        while pos < len(blob) and blob[pos : pos + 1].isspace():
            pos += 1
        if pos < len(blob) and blob[pos : pos + 1] == b"#":
            while pos < len(blob) and blob[pos : pos + 1] != b"\n":
                pos += 1
            continue
        end = pos
        while end < len(blob) and not blob[end : end + 1].isspace():
            end += 1
        if end == pos:
            raise RasterFormatError("truncated PGM header", offset=pos)
        tokens.append(blob[pos:end])
        pos = end
    return tokens, pos


def read_pgm(path: str | Path) -> Raster:
    """Read a binary P5 PGM with maxval 255; sample values become intensities."""
    blob = Path(path).read_bytes()
    if blob[:2] != b"P5":
        raise RasterFormatError(f"bad magic {blob[:2]!r}, expected b'P5'", offset=0)
    try:
        (w_tok, h_tok, max_tok), pos = _pgm_tokens(blob, 3, start=2)
        width, height, maxval = int(w_tok), int(h_tok), int(max_tok)
    except ValueError as exc:
        raise RasterFormatError(f"non-numeric PGM header field: {exc}", offset=2) from exc
    if maxval != 255:
        raise RasterFormatError(f"unsupported PGM maxval {maxval}, need 255", offset=pos)
    if width == 0 or height == 0:
        raise RasterFormatError(f"invalid dimensions {width}x{height}", offset=2)
    pos += 1  # single whitespace byte separates header from samples
    expected = pos + width * height
    if len(blob) != expected:
        raise RasterFormatError(
            f"payload size mismatch: file has {len(blob)} bytes, expected {expected}",
            offset=min(len(blob), expected),
        )
    data = np.frombuffer(blob, dtype=np.uint8, offset=pos)
    return Raster(data.astype(np.float64).reshape(height, width))


def read_raster(path: str | Path) -> Raster:
    """Read FR32 or PGM, sniffing the format from the magic bytes."""
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head[:4] == FR32_MAGIC:
        return read_fr32(path)
    if head[:2] == b"P5":
        return read_pgm(path)
    raise RasterFormatError(
        f"unrecognized raster format (leading bytes {head!r})", offset=0
    )


def write_raster(path: str | Path, raster: Raster | np.ndarray) -> None:
    """Write FR32 or PGM based on the file extension (.fr32 or .pgm)."""
    suffix = Path(path).suffix.lower()
    if suffix == ".fr32":
        write_fr32(path, raster)
    elif suffix == ".pgm":
        write_pgm(path, raster)
    else:
        raise ValueError(f"unsupported raster extension {suffix!r}, use .fr32 or .pgm")
