"""Binary tensor container: magic "LRT1", three little-endian uint64
dimensions, then the float64 payload in C order.  Matrices travel as
(rows, cols, 1) tensors.  Round trips are bit-exact."""

import struct

import numpy as np

MAGIC = b"LRT1"
_HEADER = struct.Struct("<4s3Q")


class TensorFileError(ValueError):
    """Malformed container: bad magic, truncated payload, bad dims."""


def write_tensor(path, t):
    t = np.asarray(t, dtype=np.float64)
    if t.ndim == 2:
        t = t[:, :, None]
    if t.ndim != 3:
        raise TensorFileError(f"expected an order-3 tensor, got ndim={t.ndim}")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, *t.shape))
        fh.write(np.ascontiguousarray(t, dtype="<f8").tobytes())


def read_tensor(path):
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) != _HEADER.size:
            raise TensorFileError(f"{path}: truncated header")
        magic, n1, n2, n3 = _HEADER.unpack(header)
        if magic != MAGIC:
            raise TensorFileError(f"{path}: bad magic {magic!r}")
        if min(n1, n2, n3) == 0:
            raise TensorFileError(f"{path}: zero dimension in ({n1}, {n2}, {n3})")
        payload = fh.read()
    expected = n1 * n2 * n3 * 8
    if len(payload) != expected:
        raise TensorFileError(
            f"{path}: payload is {len(payload)} bytes, dims require {expected}"
        )
    data = np.frombuffer(payload, dtype="<f8").astype(np.float64, copy=True)
    return data.reshape((n1, n2, n3))


def read_matrix(path):
    """Read a (rows, cols, 1) tensor back as a 2-D matrix."""
    t = read_tensor(path)
    if t.shape[2] != 1:
        raise TensorFileError(f"{path}: expected trailing dimension 1, got {t.shape}")
    return t[:, :, 0]
