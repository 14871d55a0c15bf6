"""Dense order-3 tensor operations: unfolding, folding, mode products.

Unfolding follows the convention where the column index of the mode-m
unfolding enumerates the remaining modes with the lower-numbered mode
varying fastest.  Under this convention the multilinear identity

    unfold(C x2 U2 x3 U3, 1) = C_(1) (U3 kron U2)^T

holds exactly, which the solver's closed-form core and factor updates
rely on.  Modes are numbered 1..3 throughout.
"""

import numpy as np

_MODES = (1, 2, 3)


def _check_mode(mode):
    if mode not in _MODES:
        raise ValueError(f"mode must be one of {_MODES}, got {mode!r}")


def unfold(t, mode):
    """Mode-m unfolding of an order-3 tensor.

    Returns a matrix with t.shape[mode-1] rows; columns run over the
    remaining two modes, lower-numbered mode fastest.
    """
    t = np.asarray(t)
    if t.ndim != 3:
        raise ValueError(f"expected an order-3 tensor, got ndim={t.ndim}")
    _check_mode(mode)
    ax = mode - 1
    # order='F' makes the first remaining axis (the lower mode) vary fastest
    return np.moveaxis(t, ax, 0).reshape((t.shape[ax], -1), order="F")


def fold(m, mode, dims):
    """Inverse of :func:`unfold`: rebuild the tensor of shape ``dims``."""
    m = np.asarray(m)
    if m.ndim != 2:
        raise ValueError(f"expected a matrix, got ndim={m.ndim}")
    _check_mode(mode)
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3:
        raise ValueError(f"dims must have length 3, got {dims}")
    ax = mode - 1
    rest = [d for i, d in enumerate(dims) if i != ax]
    if m.shape != (dims[ax], rest[0] * rest[1]):
        raise ValueError(
            f"matrix shape {m.shape} inconsistent with dims {dims} on mode {mode}"
        )
    t = m.reshape((dims[ax], rest[0], rest[1]), order="F")
    return np.moveaxis(t, 0, ax)


def mode_product(t, v, mode):
    """Mode-m product: contract mode m of ``t`` against the columns of ``v``.

    Result has the mode-m dimension replaced by v.shape[0].
    """
    t = np.asarray(t)
    v = np.asarray(v)
    _check_mode(mode)
    if v.ndim != 2:
        raise ValueError(f"expected a matrix, got ndim={v.ndim}")
    ax = mode - 1
    if v.shape[1] != t.shape[ax]:
        raise ValueError(
            f"mode-{mode} dimension {t.shape[ax]} does not match matrix columns {v.shape[1]}"
        )
    new_dims = list(t.shape)
    new_dims[ax] = v.shape[0]
    return fold(v @ unfold(t, mode), mode, new_dims)


def kronecker(a, b):
    """Kronecker product; block (i, j) equals a[i, j] * b."""
    return np.kron(np.asarray(a), np.asarray(b))


def frobenius_norm_sq(t):
    """Sum of squared entries of a tensor or matrix."""
    t = np.asarray(t)
    r = t.ravel()
    return float(r @ r)


def l1_norm(t):
    """Sum of absolute entries."""
    return float(np.sum(np.abs(t)))
