"""Binary containers for dense tensors (MRT0) and MS tensors (MRTC), plus PGM ingestion.

All integers and doubles are little-endian. Dense payloads are row-major.

MRT0::

    "MRT0" | version u8 | dtype u8 (0 = f64) | d u8 | d x u64 shape | f64 data

MRTC::

    "MRTC" | version u8 | format u8 (0 = TT, 1 = CP) | bs u32 | L u32 | d u8
    | d x u64 base shape
    | per level k = 0..L: present u8, and if present
        TT: (d - 1) x u64 rank chain, then the cores in order
        CP: u64 rank, then weights, then the d factor matrices (n_j x r)

An absent level is the zero payload.
"""

import math
import os
import struct
import tempfile

import numpy as np

from . import dense
from .cp import CPTensor
from .dense import GridSpec
from .ms import MSTensor, payload_zeros
from .tt import TTTensor

TENSOR_MAGIC = b"MRT0"
ARCHIVE_MAGIC = b"MRTC"
VERSION = 1
DTYPE_F64 = 0
FORMAT_CODES = {"tt": 0, "cp": 1}
FORMAT_NAMES = {v: k for k, v in FORMAT_CODES.items()}
F64 = np.dtype("<f8")


class ArchiveError(ValueError):
    """Malformed container. ``code`` doubles as the CLI exit status."""

    code = 3


class BadMagicError(ArchiveError):
    code = 4


class TruncatedError(ArchiveError):
    code = 5


class ExtentMismatchError(ArchiveError):
    code = 6


class UnsupportedError(ArchiveError):
    code = 7


class PGMError(ValueError):
    code = 8


def atomic_write(path, data):
    """Write ``data`` to a temporary file next to ``path`` and rename it into place."""
    path = os.fspath(path)
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class _Reader:
    def __init__(self, data):
        self.data = memoryview(data)
        self.pos = 0

    def take(self, n, what):
        if self.pos + n > len(self.data):
            raise TruncatedError(
                f"truncated while reading {what}: need {n} bytes at offset {self.pos}, "
                f"{len(self.data) - self.pos} left"
            )
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt, what):
        size = struct.calcsize(fmt)
        return struct.unpack(fmt, self.take(size, what))

    def doubles(self, shape, what):
        count = math.prod(shape)
        raw = self.take(8 * count, what)
        return np.frombuffer(raw, dtype=F64).astype(np.float64).reshape(shape)

    def finish(self):
        extra = len(self.data) - self.pos
        if extra:
            raise ExtentMismatchError(f"{extra} trailing bytes after the declared payload")


def _f64_bytes(arr):
    return np.ascontiguousarray(arr, dtype=F64).tobytes()


def _check_magic(reader, magic):
    got = bytes(reader.take(len(magic), "magic"))
    if got != magic:
        raise BadMagicError(f"bad magic {got!r}, expected {magic!r}")


def _check_version(version):
    if version != VERSION:
        raise UnsupportedError(f"unsupported version {version}")


# dense tensors -----------------------------------------------------------------

def tensor_to_bytes(T):
    T = dense.as_tensor(T)
    if T.ndim > 255:
        raise ValueError(f"order {T.ndim} does not fit in one byte")
    head = TENSOR_MAGIC + struct.pack("<BBB", VERSION, DTYPE_F64, T.ndim)
    head += struct.pack(f"<{T.ndim}Q", *T.shape)
    return head + _f64_bytes(T)


def tensor_from_bytes(data):
    r = _Reader(data)
    _check_magic(r, TENSOR_MAGIC)
    version, dtype, d = r.unpack("<BBB", "header")
    _check_version(version)
    if dtype != DTYPE_F64:
        raise UnsupportedError(f"unsupported dtype code {dtype}")
    if d == 0:
        raise ExtentMismatchError("tensor order must be >= 1")
    shape = r.unpack(f"<{d}Q", "shape")
    if any(n == 0 for n in shape):
        raise ExtentMismatchError(f"zero mode size in {shape}")
    dense.check_size(shape)
    T = r.doubles(shape, "tensor data")
    r.finish()
    return T


def write_tensor(path, T):
    atomic_write(path, tensor_to_bytes(T))


def read_tensor(path):
    with open(path, "rb") as fh:
        return tensor_from_bytes(fh.read())


# MS archives ---------------------------------------------------------------------

def archive_to_bytes(X):
    d = X.d
    out = [ARCHIVE_MAGIC, struct.pack("<BBIIB", VERSION, FORMAT_CODES[X.fmt], X.bs, X.L, d)]
    out.append(struct.pack(f"<{d}Q", *X.shape))
    for P in X.levels:
        if P.is_zero:
            out.append(b"\x00")
            continue
        out.append(b"\x01")
        if X.fmt == "tt":
            out.append(struct.pack(f"<{d - 1}Q", *P.ranks))
            out.extend(_f64_bytes(c) for c in P.cores)
        else:
            out.append(struct.pack("<Q", P.rank))
            out.append(_f64_bytes(P.weights))
            out.extend(_f64_bytes(U) for U in P.factors)
    return b"".join(out)


def archive_from_bytes(data):
    r = _Reader(data)
    _check_magic(r, ARCHIVE_MAGIC)
    version, code, bs, L, d = r.unpack("<BBIIB", "header")
    _check_version(version)
    if code not in FORMAT_NAMES:
        raise UnsupportedError(f"unknown base format code {code}")
    fmt = FORMAT_NAMES[code]
    if d == 0:
        raise ExtentMismatchError("tensor order must be >= 1")
    shape = r.unpack(f"<{d}Q", "base shape")
    try:
        grid = GridSpec(bs, L, shape)
    except ValueError as exc:
        raise ExtentMismatchError(f"invalid grid: {exc}") from None
    levels = []
    for k in range(L + 1):
        lshape = grid.level_shape(k)
        (present,) = r.unpack("<B", f"level {k} flag")
        if present == 0:
            levels.append(payload_zeros(fmt, lshape))
        elif present == 1:
            levels.append(_read_tt(r, lshape, k) if fmt == "tt" else _read_cp(r, lshape, k))
        else:
            raise ExtentMismatchError(f"level {k} has presence flag {present}")
    r.finish()
    return MSTensor(grid, fmt, levels)


def _read_tt(r, shape, k):
    d = len(shape)
    chain = r.unpack(f"<{d - 1}Q", f"level {k} ranks")
    if any(q == 0 for q in chain):
        raise ExtentMismatchError(f"level {k} is marked present but declares ranks {chain}")
    full = (1,) + chain + (1,)
    # guard against absurd declared ranks before allocating
    need = 8 * sum(full[j] * n * full[j + 1] for j, n in enumerate(shape))
    if need > len(r.data) - r.pos:
        raise TruncatedError(
            f"level {k} ranks {chain} need {need} bytes, {len(r.data) - r.pos} left"
        )
    cores = [r.doubles((full[j], n, full[j + 1]), f"level {k} core {j}") for j, n in enumerate(shape)]
    return TTTensor(shape, cores)


def _read_cp(r, shape, k):
    (rank,) = r.unpack("<Q", f"level {k} rank")
    if rank == 0:
        raise ExtentMismatchError(f"level {k} is marked present but declares rank 0")
    need = 8 * rank * (1 + sum(shape))
    if need > len(r.data) - r.pos:
        raise TruncatedError(f"level {k} rank {rank} needs {need} bytes, {len(r.data) - r.pos} left")
    weights = r.doubles((rank,), f"level {k} weights")
    factors = [r.doubles((n, rank), f"level {k} factor {j}") for j, n in enumerate(shape)]
    return CPTensor(shape, weights, tuple(factors))


def write_archive(path, X):
    atomic_write(path, archive_to_bytes(X))


def read_archive(path):
    with open(path, "rb") as fh:
        return archive_from_bytes(fh.read())


# PGM images -------------------------------------------------------------------------

def _pgm_tokens(data, count):
    tokens, pos = [], 0
    while len(tokens) < count:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise PGMError("malformed PGM header: unexpected end of file")
        tokens.append(data[start:pos])
    # exactly one whitespace byte separates the header from the raster
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise PGMError("malformed PGM header: missing separator before pixel data")
    return tokens, pos + 1


def pgm_from_bytes(data):
    """Decode a binary (P5) greyscale image to floats in ``[0, 1]``."""
    tokens, start = _pgm_tokens(bytes(data), 4)
    if tokens[0] != b"P5":
        raise PGMError(f"not a binary PGM file (magic {tokens[0]!r})")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise PGMError(f"malformed PGM header fields {tokens[1:]}") from None
    if width < 1 or height < 1:
        raise PGMError(f"invalid image size {width}x{height}")
    if maxval == 255:
        dtype = np.dtype("u1")
    elif maxval == 65535:
        dtype = np.dtype(">u2")
    else:
        raise PGMError(f"unsupported maxval {maxval} (expected 255 or 65535)")
    need = width * height * dtype.itemsize
    raster = data[start : start + need]
    if len(raster) < need:
        raise PGMError(f"truncated PGM raster: need {need} bytes, got {len(raster)}")
    img = np.frombuffer(raster, dtype=dtype).reshape(height, width)
    return img.astype(np.float64) / maxval


def read_pgm(path):
    with open(path, "rb") as fh:
        return pgm_from_bytes(fh.read())


def pgm_to_bytes(img, maxval=255):
    """Encode values in ``[0, 1]`` as a P5 image (rounded, clipped)."""
    if maxval not in (255, 65535):
        raise PGMError(f"unsupported maxval {maxval}")
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise dense.ShapeError(f"images must be 2-D, got shape {img.shape}")
    dtype = ">u2" if maxval == 65535 else "u1"
    q = np.clip(np.rint(img * maxval), 0, maxval).astype(dtype)
    h, w = img.shape
    return f"P5\n{w} {h}\n{maxval}\n".encode() + q.tobytes()


def fit_to_grid(T, bs, L, policy=None):
    """Make every mode divisible by ``bs**L``.

    ``policy`` is ``"crop"`` (largest centred crop), ``"pad"`` (smallest
    centred edge-replicating pad) or ``None`` (raise on a non-divisible
    shape). Returns the tensor and a description of what was done, or
    ``None`` when no change was needed.
    """
    block = bs**L
    shape = T.shape
    if all(n % block == 0 for n in shape):
        return T, None
    if policy == "crop":
        target = tuple(n // block * block for n in shape)
        if any(t == 0 for t in target):
            raise dense.ShapeError(f"shape {shape} is smaller than the block size {block}")
        slices = tuple(slice((n - t) // 2, (n - t) // 2 + t) for n, t in zip(shape, target))
        return T[slices].copy(), f"crop {shape} -> {target} (centred)"
    if policy == "pad":
        target = tuple(-(-n // block) * block for n in shape)
        widths = [((t - n) // 2, t - n - (t - n) // 2) for n, t in zip(shape, target)]
        return np.pad(T, widths, mode="edge"), f"pad {shape} -> {target} (centred, edge values)"
    if policy is None:
        bad = [n for n in shape if n % block]
        raise dense.ShapeError(
            f"mode sizes {bad} of {shape} are not divisible by bs**L = {block}; use --crop or --pad"
        )
    raise ValueError(f"unknown policy {policy!r}")


def load_input(path):
    """Read an MRT0 tensor or a P5 PGM image, detected from the leading bytes."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] == TENSOR_MAGIC:
        return tensor_from_bytes(data)
    if data[:2] == b"P5":
        return pgm_from_bytes(data)
    raise BadMagicError(f"{path}: not an MRT0 tensor or P5 image (magic {data[:4]!r})")
