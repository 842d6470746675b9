"""Minimal NIfTI-1 reader and writer.

Deliberately a strict subset of the format: single-file ``.nii`` /
``.nii.gz``, exactly 3 dimensions, little-endian, datatypes uint8, int16,
float32, no intensity scaling, no extensions. Anything else raises a
distinct error instead of guessing. The 4x4 sform affine is carried through
opaquely; only pixdim is interpreted.
"""

from __future__ import annotations

import gzip
import io
import os
import struct
from pathlib import Path

import numpy as np

from .errors import MalformedHeaderError, UnsupportedNiftiError, WrongDimensionError
from .volume import Mask, Volume, VolumeKind

HEADER_SIZE = 348
VOX_OFFSET = 352

# field layout of the 348-byte NIfTI-1 header
_HDR_FMT = "<i10s18sihbb8h3fhhhh8ffffhbbffffii80s24shh3f3f4f4f4f16s4s"
_HDR_FIELDS = (
    "sizeof_hdr", "data_type", "db_name", "extents", "session_error",
    "regular", "dim_info", "dim", "intent_p", "intent_code", "datatype",
    "bitpix", "slice_start", "pixdim", "vox_offset", "scl_slope",
    "scl_inter", "slice_end", "slice_code", "xyzt_units", "cal_max",
    "cal_min", "slice_duration", "toffset", "glmax", "glmin", "descrip",
    "aux_file", "qform_code", "sform_code", "quatern", "qoffset",
    "srow_x", "srow_y", "srow_z", "intent_name", "magic",
)
_GROUPED = {"dim": 8, "intent_p": 3, "pixdim": 8, "quatern": 3, "qoffset": 3,
            "srow_x": 4, "srow_y": 4, "srow_z": 4}

_DTYPES = {2: np.uint8, 4: np.int16, 16: np.float32}
_DTYPE_CODES = {np.dtype(np.uint8): (2, 8), np.dtype(np.int16): (4, 16),
                np.dtype(np.float32): (16, 32)}

assert struct.calcsize(_HDR_FMT) == HEADER_SIZE


def _read_bytes(path) -> bytes:
    path = Path(path)
    if path.suffix == ".gz":
        with gzip.open(path, "rb") as f:
            return f.read()
    return path.read_bytes()


def _write_bytes(path, blob: bytes) -> None:
    path = Path(path)
    if path.suffix == ".gz":
        # mtime pinned so identical volumes produce identical files
        buf = io.BytesIO()
        with gzip.GzipFile(fileobj=buf, mode="wb", mtime=0) as f:
            f.write(blob)
        blob = buf.getvalue()
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(blob)
    os.replace(tmp, path)


def _parse_header(blob: bytes) -> dict:
    if len(blob) < HEADER_SIZE:
        raise MalformedHeaderError(f"file too short for a NIfTI-1 header ({len(blob)} bytes)")
    magic = blob[344:348]
    if magic == b"ni1\x00":
        raise UnsupportedNiftiError("two-file NIfTI (.hdr/.img pair) is not supported")
    if magic != b"n+1\x00":
        raise MalformedHeaderError(f"header magic is not 'n+1'/'ni1' (got {magic!r})")
    (le_size,) = struct.unpack("<i", blob[:4])
    if le_size != HEADER_SIZE:
        (be_size,) = struct.unpack(">i", blob[:4])
        if be_size == HEADER_SIZE:
            raise UnsupportedNiftiError("big-endian NIfTI files are not supported")
        raise MalformedHeaderError(f"sizeof_hdr is {le_size}, expected {HEADER_SIZE}")
    values = struct.unpack(_HDR_FMT, blob[:HEADER_SIZE])
    hdr = {}
    i = 0
    for name in _HDR_FIELDS:
        n = _GROUPED.get(name, 1)
        hdr[name] = values[i] if n == 1 else values[i:i + n]
        i += n
    return hdr


def read_volume(path) -> Volume:
    """Read a single-frame scalar volume.

    Raises MalformedHeaderError, UnsupportedNiftiError, or
    WrongDimensionError for files outside the supported subset.
    """
    blob = _read_bytes(path)
    hdr = _parse_header(blob)

    if hdr["dim"][0] != 3:
        raise WrongDimensionError(f"expected a 3D image, got dim[0]={hdr['dim'][0]}")
    nx, ny, nz = (int(d) for d in hdr["dim"][1:4])
    if min(nx, ny, nz) < 1:
        raise MalformedHeaderError(f"non-positive dimension in header: {(nx, ny, nz)}")

    if hdr["datatype"] not in _DTYPES:
        raise UnsupportedNiftiError(
            f"datatype code {hdr['datatype']} not in supported set "
            "{2: uint8, 4: int16, 16: float32}"
        )
    dtype = np.dtype(_DTYPES[hdr["datatype"]])
    if hdr["bitpix"] != dtype.itemsize * 8:
        raise MalformedHeaderError(
            f"bitpix {hdr['bitpix']} inconsistent with datatype {hdr['datatype']}"
        )
    slope, inter = hdr["scl_slope"], hdr["scl_inter"]
    if slope not in (0.0, 1.0) or inter != 0.0:
        raise UnsupportedNiftiError(
            f"intensity scaling (slope={slope}, inter={inter}) is not supported"
        )

    spacing = tuple(float(p) for p in hdr["pixdim"][1:4])
    if any(not (s > 0) for s in spacing):
        raise MalformedHeaderError(f"non-positive pixdim in header: {spacing}")

    offset = int(hdr["vox_offset"])
    if offset < VOX_OFFSET:
        raise MalformedHeaderError(f"vox_offset {offset} below minimum {VOX_OFFSET}")
    n = nx * ny * nz
    payload = blob[offset:offset + n * dtype.itemsize]
    if len(payload) != n * dtype.itemsize:
        raise MalformedHeaderError("file truncated: fewer data bytes than header promises")
    data = np.frombuffer(payload, dtype=dtype)

    affine = np.array([hdr["srow_x"], hdr["srow_y"], hdr["srow_z"], (0, 0, 0, 1)],
                      dtype=np.float64) if hdr["sform_code"] > 0 else None
    # value kind is an in-memory tag; files always read back as intensity
    return Volume(data, (nx, ny, nz), spacing, VolumeKind.INTENSITY, affine)


def read_mask(path) -> Mask:
    """Read a volume and require strictly binary content."""
    v = read_volume(path)
    if not np.isin(v.data, (0, 1)).all():
        raise ValueError(f"{path}: mask file has values other than 0 and 1")
    return Mask(v.data.astype(np.uint8), v.shape, v.spacing, v.affine)


def _build_header(shape, spacing, dtype: np.dtype, affine) -> bytes:
    code, bits = _DTYPE_CODES[dtype]
    if affine is None:
        sx, sy, sz = spacing
        affine = np.diag((sx, sy, sz, 1.0))
    dim = (3, *shape, 1, 1, 1, 1)
    pixdim = (1.0, *spacing, 0.0, 0.0, 0.0, 0.0)
    return struct.pack(
        _HDR_FMT,
        HEADER_SIZE, b"", b"", 0, 0, 0, 0,
        *dim, 0.0, 0.0, 0.0, 0, code, bits, 0,
        *pixdim, float(VOX_OFFSET), 1.0, 0.0, 0,
        0, 2,  # xyzt_units: mm
        0.0, 0.0, 0.0, 0.0, 0, 0,
        b"sdtseg", b"", 0, 1,
        0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
        *np.asarray(affine[0], dtype=np.float64),
        *np.asarray(affine[1], dtype=np.float64),
        *np.asarray(affine[2], dtype=np.float64),
        b"", b"n+1\x00",
    )


def write_volume(v, path) -> None:
    """Write a Volume (float32) or Mask (uint8) as single-file NIfTI-1."""
    if isinstance(v, Mask):
        data = v.data.astype(np.uint8)
    else:
        data = v.data.astype(np.float32)
    hdr = _build_header(v.shape, v.spacing, data.dtype, v.affine)
    blob = hdr + b"\x00" * (VOX_OFFSET - HEADER_SIZE) + data.tobytes()
    _write_bytes(path, blob)
