"""File format tests: FR32 byte layout, PGM quantization, and error reporting."""

import struct

import numpy as np
import pytest

from specklekit.errors import DomainError, RasterFormatError
from specklekit.raster import (
    Raster,
    read_fr32,
    read_pgm,
    read_raster,
    write_fr32,
    write_pgm,
    write_raster,
)


def test_fr32_round_trip_bit_identical(tmp_path):
    rng = np.random.default_rng(11)
    data = rng.normal(size=(37, 53)).astype(np.float32).astype(np.float64)
    path = tmp_path / "img.fr32"
    write_fr32(path, Raster(data))
    back = read_fr32(path)
    assert back.data.shape == (37, 53)
    assert np.array_equal(back.data, data)

    write_fr32(path, back)
    second = path.read_bytes()
    write_fr32(path, read_fr32(path))
    assert path.read_bytes() == second


def test_fr32_exact_byte_layout(tmp_path):
    path = tmp_path / "tiny.fr32"
    write_fr32(path, np.array([[0.0, 1.0]]))
    blob = path.read_bytes()
    assert len(blob) == 20
    assert blob[:4] == b"FR32"
    assert struct.unpack("<II", blob[4:12]) == (2, 1)
    assert np.frombuffer(blob, dtype="<f4", offset=12).tolist() == [0.0, 1.0]


def test_fr32_bad_magic_reports_offset(tmp_path):
    path = tmp_path / "bad.fr32"
    path.write_bytes(b"NOPE" + struct.pack("<II", 1, 1) + b"\x00" * 4)
    with pytest.raises(RasterFormatError) as err:
        read_fr32(path)
    assert err.value.offset == 0


def test_fr32_truncation_reports_offset(tmp_path):
    path = tmp_path / "short.fr32"
    path.write_bytes(b"FR32" + struct.pack("<II", 4, 4) + b"\x00" * 8)
    with pytest.raises(RasterFormatError) as err:
        read_fr32(path)
    assert err.value.offset == 20
    assert "expected 76" in str(err.value)

    path.write_bytes(b"FR32\x00")
    with pytest.raises(RasterFormatError) as err:
        read_fr32(path)
    assert err.value.offset == 5


def test_fr32_rejects_zero_and_huge_dimensions(tmp_path):
    path = tmp_path / "dims.fr32"
    path.write_bytes(b"FR32" + struct.pack("<II", 0, 3))
    with pytest.raises(RasterFormatError):
        read_fr32(path)
    path.write_bytes(b"FR32" + struct.pack("<II", 1 << 16, 1 << 16))
    with pytest.raises(RasterFormatError):
        read_fr32(path)


def test_pgm_payload_size_and_header(tmp_path):
    path = tmp_path / "img.pgm"
    write_pgm(path, np.array([[0.0, 255.0], [128.0, 64.0]]))
    blob = path.read_bytes()
    header = b"P5\n2 2\n255\n"
    assert blob.startswith(header)
    assert len(blob) - len(header) == 4


def test_pgm_rounds_half_up(tmp_path):
    path = tmp_path / "round.pgm"
    # peak 2.0, so 1.0 maps to 127.5 which rounds up to 128
    write_pgm(path, np.array([[0.0, 1.0], [2.0, 2.0]]))
    back = read_pgm(path)
    assert back.data.tolist() == [[0.0, 128.0], [255.0, 255.0]]


def test_pgm_constant_zero_image(tmp_path):
    path = tmp_path / "zero.pgm"
    write_pgm(path, np.zeros((3, 3)))
    assert read_pgm(path).data.tolist() == np.zeros((3, 3)).tolist()


def test_pgm_reads_comments_and_rejects_other_maxval(tmp_path):
    path = tmp_path / "c.pgm"
    path.write_bytes(b"P5\n# a comment\n2 1\n255\n\x05\x07")
    back = read_pgm(path)
    assert back.data.tolist() == [[5.0, 7.0]]

    path.write_bytes(b"P5\n2 1\n65535\n\x00\x00\x00\x00")
    with pytest.raises(RasterFormatError):
        read_pgm(path)


def test_read_raster_sniffs_format(tmp_path):
    f32 = tmp_path / "a.bin"
    write_fr32(f32, np.ones((2, 2)))
    assert read_raster(f32).data.tolist() == np.ones((2, 2)).tolist()

    pgm = tmp_path / "b.bin"
    write_pgm(pgm, np.full((2, 2), 9.0))
    assert read_raster(pgm).data.max() == 255.0

    other = tmp_path / "c.bin"
    other.write_bytes(b"GIF89a")
    with pytest.raises(RasterFormatError):
        read_raster(other)


def test_write_raster_dispatches_on_extension(tmp_path):
    write_raster(tmp_path / "x.fr32", np.ones((2, 2)))
    assert (tmp_path / "x.fr32").read_bytes()[:4] == b"FR32"
    write_raster(tmp_path / "x.pgm", np.ones((2, 2)))
    assert (tmp_path / "x.pgm").read_bytes()[:2] == b"P5"
    with pytest.raises(ValueError):
        write_raster(tmp_path / "x.png", np.ones((2, 2)))


def test_raster_validation():
    with pytest.raises(ValueError):
        Raster(np.zeros(5))
    with pytest.raises(ValueError):
        Raster(np.zeros((2, 2)), kind="other")

    r = Raster(np.array([[1.0, -2.0]]))
    with pytest.raises(DomainError):
        r.require_intensity()
    Raster(np.array([[1.0, 2.0]])).require_intensity()

    t = Raster(np.array([[1.0, -2.0]]), kind="transformed")
    with pytest.raises(DomainError):
        t.require_intensity()
