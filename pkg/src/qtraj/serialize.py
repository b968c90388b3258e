"""JSON helpers: complex arrays travel as nested ``[re, im]`` pairs."""

import hashlib

import numpy as np

from .errors import ConfigurationError


def to_pairs(arr):
    arr = np.asarray(arr, dtype=complex)
    return np.stack([arr.real, arr.imag], axis=-1).tolist()


def from_pairs(obj, ndim, name="array"):
    """Parse a nested list of ``[re, im]`` pairs (or plain reals) of rank ``ndim``."""
    try:
        arr = np.asarray(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"{name}: not a rectangular numeric array ({exc})") from None
    if arr.ndim == ndim + 1 and arr.shape[-1] == 2:
        return arr[..., 0] + 1j * arr[..., 1]
    if arr.ndim == ndim:
        return arr.astype(complex)
    raise ConfigurationError(f"{name}: expected a rank-{ndim} array of [re, im] pairs, got shape {arr.shape}")


def git_blob_hash(data: bytes) -> str:
    """Content hash computed the way ``git hash-object`` does."""
    h = hashlib.sha1()
    h.update(b"blob %d\0" % len(data))
    h.update(data)
    return h.hexdigest()
