"""Feature-matrix container and NPY (de)serialization.

Reading accepts NPY versions 1.0 and 2.0, single or double precision, in
either byte order and either storage order.  Writing always produces
NPY 1.0, little-endian, C order.
"""

from __future__ import annotations

import os
import tokenize
from dataclasses import dataclass

import numpy as np
from numpy.lib import format as npy_format

from .errors import DataError, DtypeError, FormatError, IoError, ShapeError

_PRECISIONS = {4: "single", 8: "double"}
_DTYPES = {"single": np.dtype("<f4"), "double": np.dtype("<f8")}


def _check_dtype(dtype: np.dtype) -> None:
    if dtype.kind != "f" or dtype.itemsize not in _PRECISIONS or dtype.fields:
        raise DtypeError(f"expected float32 or float64 data, got {dtype.str!r}")


def _first_nonfinite(array: np.ndarray):
    bad = np.argwhere(~np.isfinite(array))
    if len(bad):
        return tuple(int(i) for i in bad[0])
    return None


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """A T x D matrix of token features (one row per vision token).

    The wrapped array is copied into C order with native byte order and
    marked read-only, so instances can be shared freely.
    """

    data: np.ndarray

    def __post_init__(self):
        array = np.asarray(self.data)
        if array.dtype.kind in "biu":
            array = array.astype(np.float64)
        _check_dtype(array.dtype)
        if array.ndim != 2:
            raise ShapeError(f"feature matrix must be 2-D, got shape {array.shape}")
        if array.shape[0] < 1 or array.shape[1] < 1:
            raise ShapeError(f"feature matrix must be non-empty, got shape {array.shape}")
        bad = _first_nonfinite(array)
        if bad is not None:
            raise DataError(f"non-finite element at index {bad}", index=bad)
        array = np.array(array, dtype=array.dtype.newbyteorder("="), order="C", copy=True)
        array.setflags(write=False)
        object.__setattr__(self, "data", array)

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @property
    def precision(self) -> str:
        return _PRECISIONS[self.data.dtype.itemsize]

    def as_double(self) -> np.ndarray:
        return self.data.astype(np.float64, copy=False)

    def __eq__(self, other):
        if not isinstance(other, FeatureMatrix):
            return NotImplemented
        return (
            self.data.dtype == other.data.dtype
            and self.shape == other.shape
            and self.data.tobytes() == other.data.tobytes()
        )

    __hash__ = None


def _read_header(fp):
    try:
        version = npy_format.read_magic(fp)
    except ValueError as exc:
        raise FormatError(f"bad NPY magic: {exc}") from None
    if version == (1, 0):
        reader = npy_format.read_array_header_1_0
    elif version == (2, 0):
        reader = npy_format.read_array_header_2_0
    else:
        raise FormatError(f"unsupported NPY version {version[0]}.{version[1]}")
    try:
        return reader(fp)
    except (ValueError, SyntaxError, tokenize.TokenError) as exc:
        raise FormatError(f"malformed NPY header: {exc}") from None


def load_matrix(path) -> FeatureMatrix:
    """Load a 2-D float array from an NPY file."""
    try:
        fp = open(path, "rb")
    except OSError as exc:
        raise IoError(f"cannot open {os.fspath(path)!r}: {exc.strerror}") from exc
    with fp:
        shape, fortran_order, dtype = _read_header(fp)
        _check_dtype(dtype)
        if len(shape) != 2:
            raise ShapeError(f"expected a rank-2 array, got shape {shape}")
        count = shape[0] * shape[1]
        payload = fp.read(count * dtype.itemsize)
    if len(payload) != count * dtype.itemsize:
        raise FormatError(
            f"truncated data: expected {count * dtype.itemsize} bytes, got {len(payload)}"
        )
    array = np.frombuffer(payload, dtype=dtype).reshape(
        shape, order="F" if fortran_order else "C"
    )
    return FeatureMatrix(array)


def save_matrix(m: FeatureMatrix, path) -> None:
    """Write ``m`` as an NPY 1.0 file, little-endian, C order."""
    array = np.ascontiguousarray(m.data, dtype=_DTYPES[m.precision])
    try:
        with open(path, "wb") as fp:
            npy_format.write_array(fp, array, version=(1, 0), allow_pickle=False)
    except OSError as exc:
        raise IoError(f"cannot write {os.fspath(path)!r}: {exc.strerror}") from exc
