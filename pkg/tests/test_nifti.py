import gzip
import struct

import numpy as np
import pytest

from sdtseg.errors import (MalformedHeaderError, UnsupportedNiftiError,
                           WrongDimensionError)
from sdtseg.nifti import (HEADER_SIZE, VOX_OFFSET, read_mask, read_volume,
                          write_volume)
from sdtseg.volume import Mask, Volume


def test_float32_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    data = rng.random(5 * 6 * 7).astype(np.float32)
    v = Volume(data, (5, 6, 7), (1.0, 1.25, 2.0))
    for name in ("vol.nii", "vol.nii.gz"):
        path = tmp_path / name
        write_volume(v, path)
        back = read_volume(path)
        assert np.array_equal(back.data, data)
        assert back.shape == v.shape
        assert np.allclose(back.spacing, v.spacing, rtol=1e-6)


def test_mask_round_trip_uint8(tmp_path):
    rng = np.random.default_rng(1)
    m = Mask((rng.random(27) < 0.5).astype(np.uint8), (3, 3, 3), (1, 1, 1))
    path = tmp_path / "m.nii.gz"
    write_volume(m, path)
    back = read_mask(path)
    assert np.array_equal(back.data, m.data)
    assert back.data.dtype == np.uint8


def test_affine_carried_through(tmp_path):
    affine = np.diag((2.0, 3.0, 4.0, 1.0))
    affine[:3, 3] = (-90, -126, -72)
    v = Volume(np.zeros(8, dtype=np.float32), (2, 2, 2), (2, 3, 4), affine=affine)
    path = tmp_path / "a.nii"
    write_volume(v, path)
    assert np.array_equal(read_volume(path).affine, affine)


def test_gzip_output_deterministic(tmp_path):
    v = Volume(np.ones(8, dtype=np.float32), (2, 2, 2), (1, 1, 1))
    p1, p2 = tmp_path / "a.nii.gz", tmp_path / "b.nii.gz"
    write_volume(v, p1)
    write_volume(v, p2)
    assert p1.read_bytes() == p2.read_bytes()


def _valid_blob(tmp_path):
    v = Volume(np.zeros(8, dtype=np.float32), (2, 2, 2), (1, 1, 1))
    path = tmp_path / "ok.nii"
    write_volume(v, path)
    return bytearray(path.read_bytes())


def test_bad_magic_is_malformed(tmp_path):
    blob = _valid_blob(tmp_path)
    blob[344:348] = b"nix\x00"
    bad = tmp_path / "bad.nii"
    bad.write_bytes(blob)
    with pytest.raises(MalformedHeaderError):
        read_volume(bad)


def test_two_file_magic_unsupported(tmp_path):
    blob = _valid_blob(tmp_path)
    blob[344:348] = b"ni1\x00"
    bad = tmp_path / "pair.nii"
    bad.write_bytes(blob)
    with pytest.raises(UnsupportedNiftiError):
        read_volume(bad)


def test_unsupported_datatype(tmp_path):
    blob = _valid_blob(tmp_path)
    blob[70:72] = struct.pack("<h", 64)  # float64
    bad = tmp_path / "f64.nii"
    bad.write_bytes(blob)
    with pytest.raises(UnsupportedNiftiError):
        read_volume(bad)


def test_wrong_dimension_count(tmp_path):
    blob = _valid_blob(tmp_path)
    blob[40:42] = struct.pack("<h", 4)
    bad = tmp_path / "4d.nii"
    bad.write_bytes(blob)
    with pytest.raises(WrongDimensionError):
        read_volume(bad)


def test_truncated_file(tmp_path):
    blob = _valid_blob(tmp_path)
    bad = tmp_path / "short.nii"
    bad.write_bytes(blob[:VOX_OFFSET + 3])
    with pytest.raises(MalformedHeaderError):
        read_volume(bad)


def test_scaling_rejected(tmp_path):
    blob = _valid_blob(tmp_path)
    blob[112:116] = struct.pack("<f", 2.0)  # scl_slope
    bad = tmp_path / "scaled.nii"
    bad.write_bytes(blob)
    with pytest.raises(UnsupportedNiftiError):
        read_volume(bad)


def test_big_endian_unsupported(tmp_path):
    blob = _valid_blob(tmp_path)
    blob[0:4] = struct.pack(">i", HEADER_SIZE)
    bad = tmp_path / "be.nii"
    bad.write_bytes(blob)
    with pytest.raises(UnsupportedNiftiError):
        read_volume(bad)


def test_garbage_is_malformed(tmp_path):
    bad = tmp_path / "garbage.nii"
    bad.write_bytes(b"\x13\x37" * 400)
    with pytest.raises(MalformedHeaderError):
        read_volume(bad)
    short = tmp_path / "short.nii"
    short.write_bytes(b"oops")
    with pytest.raises(MalformedHeaderError):
        read_volume(short)


def test_nonbinary_mask_file_rejected(tmp_path):
    v = Volume(np.array([0, 1, 2, 3, 0, 1, 2, 3], dtype=np.float32),
               (2, 2, 2), (1, 1, 1))
    path = tmp_path / "notmask.nii"
    write_volume(v, path)
    with pytest.raises(ValueError):
        read_mask(path)


def test_gzip_suffix_actually_gzip(tmp_path):
    v = Volume(np.zeros(8, dtype=np.float32), (2, 2, 2), (1, 1, 1))
    path = tmp_path / "z.nii.gz"
    write_volume(v, path)
    with gzip.open(path, "rb") as f:
        blob = f.read()
    assert blob[:4] == struct.pack("<i", HEADER_SIZE)
