"""
Reading and writing of hypercubes, signatures, detection maps and masks.

In memory a hypercube is a float64 array of shape ``(h, v, d)`` (rows, columns,
bands), so ``cube[i, j]`` is the signature of pixel (i, j). On disk the payload
is band-sequential float32 little-endian.

Binary layouts (all integers u32 little-endian)::

    HSC1  "HSC1" h v d  then h*v*d float32, band outermost, then row, column
    DMP1  "DMP1" h v    then h*v float32 row-major
    GTM1  "GTM1" h v    then h*v uint8 in {0, 1, 2} row-major

ENVI band-sequential float32 files (``data type = 4``, ``interleave = bsq``,
``byte order = 0``) are accepted by :func:`read_hypercube` when a sidecar
``.hdr`` file is present.
"""

import os
import struct
import warnings

import numpy as np

from .errors import (DimensionMismatch, EmptyFile, IllegalLabel, IoFailure, MalformedHeader,
                     NonFiniteValue, TruncatedData, UnparseableLine)

HSC1_MAGIC = b"HSC1"
DMP1_MAGIC = b"DMP1"
GTM1_MAGIC = b"GTM1"

BACKGROUND, PLUME, BOUNDARY = 0, 1, 2

_F32 = np.dtype("<f4")


def _read_bytes(path):
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc


def _write_bytes(path, payload):
    try:
        with open(path, "wb") as fh:
            fh.write(payload)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _check_finite(arr, what):
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValue(f"{what} contains NaN or Inf")


def _unpack_dims(raw, magic, ndims, path):
    head = 4 + 4 * ndims
    if len(raw) < head or raw[:4] != magic:
        raise MalformedHeader(f"{path}: expected {magic.decode()} header")
    dims = struct.unpack("<" + "I" * ndims, raw[4:head])
    if min(dims) < 1:
        raise MalformedHeader(f"{path}: zero dimension in {dims}")
    return dims, head


def _payload(raw, head, count, itemsize, path):
    size = count * itemsize
    body = raw[head:]
    if len(body) < size:
        raise TruncatedData(f"{path}: expected {size} payload bytes, found {len(body)}")
    if len(body) > size:
        raise MalformedHeader(f"{path}: {len(body) - size} trailing bytes after payload")
    return body


# -- hypercubes ------------------------------------------------------------

def validate_cube(cube):
    """Return `cube` as a float64 (h, v, d) array, checking the invariants."""
    cube = np.asarray(cube, dtype=np.float64)
    if cube.ndim != 3 or min(cube.shape) < 1:
        raise ValueError(f"hypercube must be a non-empty 3-D array, got shape {cube.shape}")
    _check_finite(cube, "hypercube")
    return cube


def read_hypercube(path):
    """Read an HSC1 file, or an ENVI BSQ float32 file with a ``.hdr`` sidecar.

    Returns
    -------
    ndarray, shape (h, v, d), float64
    """
    raw = _read_bytes(path)
    if raw[:4] == HSC1_MAGIC:
        (h, v, d), head = _unpack_dims(raw, HSC1_MAGIC, 3, path)
        body = _payload(raw, head, h * v * d, 4, path)
        bsq = np.frombuffer(body, dtype=_F32).reshape(d, h, v)
    else:
        hdr = _find_envi_header(path)
        if hdr is None:
            raise MalformedHeader(f"{path}: neither HSC1 magic nor ENVI header found")
        h, v, d = read_envi_header(hdr)
        body = _payload(raw, 0, h * v * d, 4, path)
        bsq = np.frombuffer(body, dtype=_F32).reshape(d, h, v)
    cube = bsq.transpose(1, 2, 0).astype(np.float64)
    _check_finite(cube, str(path))
    return cube


def write_hypercube(cube, path):
    cube = validate_cube(cube)
    h, v, d = cube.shape
    bsq = np.ascontiguousarray(cube.transpose(2, 0, 1), dtype=_F32)
    _write_bytes(path, HSC1_MAGIC + struct.pack("<III", h, v, d) + bsq.tobytes())


def _find_envi_header(path):
    path = os.fspath(path)
    candidates = [path + ".hdr", os.path.splitext(path)[0] + ".hdr"]
    for cand in candidates:
        if os.path.isfile(cand):
            return cand
    return None


_ENVI_REQUIRED = {"data type": "4", "interleave": "bsq", "byte order": "0"}


def read_envi_header(path):
    """Parse an ENVI ``.hdr`` file and return ``(lines, samples, bands)``.

    Only the float32 little-endian band-sequential flavour is supported; any
    other value of ``data type``, ``interleave``, ``byte order`` or a nonzero
    ``header offset`` raises :class:`MalformedHeader`.
    """
    try:
        with open(path, encoding="utf-8", errors="replace") as fh:
            text = fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    if not text.lstrip().startswith("ENVI"):
        raise MalformedHeader(f"{path}: missing ENVI signature line")

    fields = {}
    pending = None
    for line in text.splitlines()[1:]:
        if pending is not None:
            # multi-line {...} values such as band names; skip to the closing brace
            if "}" in line:
                pending = None
            continue
        if "=" not in line:
            continue
        key, _, value = line.partition("=")
        key, value = key.strip().lower(), value.strip()
        if value.startswith("{") and "}" not in value:
            pending = key
            continue
        fields[key] = value

    for key, want in _ENVI_REQUIRED.items():
        if fields.get(key, "").lower() != want:
            raise MalformedHeader(f"{path}: unsupported {key} = {fields.get(key)!r}")
    if fields.get("header offset", "0") != "0":
        raise MalformedHeader(f"{path}: nonzero header offset")
    try:
        dims = tuple(int(fields[k]) for k in ("lines", "samples", "bands"))
    except (KeyError, ValueError) as exc:
        raise MalformedHeader(f"{path}: bad or missing dimensions") from exc
    if min(dims) < 1:
        raise MalformedHeader(f"{path}: zero dimension in {dims}")
    return dims


def write_envi(cube, path):
    """Write `cube` as ENVI BSQ float32 (``path`` plus ``path + '.hdr'``)."""
    cube = validate_cube(cube)
    h, v, d = cube.shape
    header = (
        "ENVI\n"
        f"samples = {v}\nlines = {h}\nbands = {d}\n"
        "header offset = 0\ndata type = 4\ninterleave = bsq\nbyte order = 0\n"
    )
    bsq = np.ascontiguousarray(cube.transpose(2, 0, 1), dtype=_F32)
    _write_bytes(path, bsq.tobytes())
    _write_bytes(os.fspath(path) + ".hdr", header.encode("ascii"))


# -- signatures ------------------------------------------------------------

def read_signature(path):
    """Read a signature CSV: one value per line or ``index,value`` pairs.

    Blank lines and lines starting with ``#`` are skipped. Line numbers in
    :class:`UnparseableLine` are 1-based physical line numbers.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc

    values = []
    for lineno, line in enumerate(lines, start=1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        parts = [p.strip() for p in text.split(",")]
        if len(parts) > 2:
            raise UnparseableLine(lineno, line)
        try:
            value = float(parts[-1])
        except ValueError:
            raise UnparseableLine(lineno, line) from None
        if not np.isfinite(value):
            raise NonFiniteValue(f"{path}: line {lineno} is not finite")
        values.append(value)
    if not values:
        raise EmptyFile(f"{path}: no values")
    return np.array(values, dtype=np.float64)


def write_signature(sig, path):
    sig = np.asarray(sig, dtype=np.float64).ravel()
    _check_finite(sig, "signature")
    _write_bytes(path, "".join(f"{x:.17g}\n" for x in sig).encode("utf-8"))


def check_signature(sig, cube):
    """Validate that `sig` pairs with `cube` (same band count)."""
    sig = np.asarray(sig, dtype=np.float64)
    if sig.ndim != 1 or sig.shape[0] != cube.shape[2]:
        raise DimensionMismatch(
            f"signature length {sig.shape} does not match cube bands {cube.shape[2]}")
    _check_finite(sig, "signature")
    return sig


# -- ground-truth masks ------------------------------------------------------

def validate_mask(mask):
    mask = np.asarray(mask)
    if mask.ndim != 2 or min(mask.shape) < 1:
        raise ValueError(f"mask must be a non-empty 2-D array, got shape {mask.shape}")
    bad = ~np.isin(mask, (BACKGROUND, PLUME, BOUNDARY))
    if bad.any():
        raise IllegalLabel(int(mask[bad][0]))
    return mask.astype(np.uint8)


def read_mask(path):
    raw = _read_bytes(path)
    (h, v), head = _unpack_dims(raw, GTM1_MAGIC, 2, path)
    body = _payload(raw, head, h * v, 1, path)
    mask = np.frombuffer(body, dtype=np.uint8).reshape(h, v).copy()
    return validate_mask(mask)


def write_mask(mask, path):
    mask = validate_mask(mask)
    h, v = mask.shape
    _write_bytes(path, GTM1_MAGIC + struct.pack("<II", h, v) + mask.tobytes())


# -- detection maps ----------------------------------------------------------

def validate_map(scores):
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2 or min(scores.shape) < 1:
        raise ValueError(f"detection map must be a non-empty 2-D array, got {scores.shape}")
    _check_finite(scores, "detection map")
    return scores


def read_detection_map(path):
    raw = _read_bytes(path)
    (h, v), head = _unpack_dims(raw, DMP1_MAGIC, 2, path)
    body = _payload(raw, head, h * v, 4, path)
    scores = np.frombuffer(body, dtype=_F32).reshape(h, v).astype(np.float64)
    _check_finite(scores, str(path))
    return scores


def to_pgm16(scores):
    """Rescale [min, max] linearly onto [0, 65535]; a constant map gives zeros."""
    scores = validate_map(scores)
    lo, hi = scores.min(), scores.max()
    if hi == lo:
        return np.zeros(scores.shape, dtype=np.uint16)
    scaled = np.rint((scores - lo) / (hi - lo) * 65535.0)
    return np.clip(scaled, 0, 65535).astype(np.uint16)


def write_detection_map(scores, path, format="binary"):
    """Write a detection map as ``binary`` (DMP1), ``csv`` or ``pgm16``."""
    scores = validate_map(scores)
    h, v = scores.shape
    if format == "binary":
        payload = DMP1_MAGIC + struct.pack("<II", h, v) + scores.astype(_F32).tobytes()
    elif format == "csv":
        payload = "".join(",".join(f"{x:.17g}" for x in row) + "\n" for row in scores)
        payload = payload.encode("utf-8")
    elif format == "pgm16":
        # PGM stores 16-bit samples most significant byte first
        pixels = to_pgm16(scores).astype(">u2")
        payload = f"P5\n{v} {h}\n65535\n".encode("ascii") + pixels.tobytes()
    else:
        raise ValueError(f"unknown detection map format {format!r}")
    _write_bytes(path, payload)


def read_map_csv(path):
    try:
        with warnings.catch_warnings():
            # an empty file is reported below as EmptyFile
            warnings.simplefilter("ignore", UserWarning)
            values = np.loadtxt(path, delimiter=",", ndmin=2)
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise MalformedHeader(f"{path}: {exc}") from exc
    if values.size == 0:
        raise EmptyFile(f"{path} holds no values")
    return validate_map(values)


def read_pgm16(path):
    raw = _read_bytes(path)
    parts = raw.split(b"\n", 3)
    if len(parts) < 4 or parts[0] != b"P5" or parts[2] != b"65535":
        raise MalformedHeader(f"{path}: not a 16-bit binary PGM")
    v, h = (int(x) for x in parts[1].split())
    body = _payload(parts[3], 0, h * v, 2, path)
    return np.frombuffer(body, dtype=">u2").reshape(h, v).astype(np.uint16)
