"""Array-file I/O for sample grids, label maps and uncertainty maps.

All arrays live in NPY v1.0 files (magic string, literal header dict with
dtype/fortran_order/shape, raw little-endian payload), so any toolchain can
produce or consume them from the published byte layout. Grids are float32 or
float64 on disk and held as float64 in memory; label maps use integer dtypes.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .decomposition import SampleGrid
from .errors import BadHeaderError, NonFiniteDataError, ShapeRankError

GRID_DTYPES = (np.float32, np.float64)


def write_array(array: np.ndarray, path) -> Path:
    """Write an array as NPY; round-trips bit-exactly through read_array."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        np.save(fh, np.ascontiguousarray(array))
    return path


def read_array(path) -> np.ndarray:
    """Read an NPY file; pickled payloads are rejected."""
    path = Path(path)
    try:
        return np.load(path, allow_pickle=False)
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise BadHeaderError(f"{path}: not a readable NPY file ({exc})") from exc


def peek_npy_header(path):
    """Return (shape, dtype) from an NPY header without loading the payload."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            version = np.lib.format.read_magic(fh)
            if version == (1, 0):
                shape, _, dtype = np.lib.format.read_array_header_1_0(fh)
            elif version == (2, 0):
                shape, _, dtype = np.lib.format.read_array_header_2_0(fh)
            else:
                raise BadHeaderError(f"{path}: unsupported NPY version {version}")
    except BadHeaderError:
        raise
    except Exception as exc:
        raise BadHeaderError(f"{path}: not a readable NPY file ({exc})") from exc
    return shape, dtype


def write_grid(grid, path, dtype=None) -> Path:
    """Write a sample grid (or raw [M][N][C][H][W] array) to an NPY file.

    `dtype` may narrow the payload to float32 for storage; by default the
    array's own dtype is kept so write/read round-trips are bit-exact.
    """
    probs = grid.probs if isinstance(grid, SampleGrid) else np.asarray(grid)
    if dtype is not None:
        probs = probs.astype(dtype, copy=False)
    return write_array(probs, path)


def read_grid(path) -> SampleGrid:
    """Load and validate a sample grid file.

    The payload must be a rank-5 float32/float64 tensor with finite entries;
    the first non-finite entry is reported with its (m, n, c, h, w)
    coordinates. Data is upcast to float64 and simplex-validated.
    """
    arr = read_array(path)
    if arr.ndim != 5:
        raise ShapeRankError(f"{path}: expected rank-5 [M][N][C][H][W] grid, got rank {arr.ndim}")
    if arr.dtype not in GRID_DTYPES:
        raise BadHeaderError(f"{path}: grid dtype must be float32 or float64, got {arr.dtype}")
    finite = np.isfinite(arr)
    if not finite.all():
        bad = np.argwhere(~finite)
        first = tuple(int(i) for i in bad[0])
        raise NonFiniteDataError(
            f"{path}: {len(bad)} non-finite entries, first at (m, n, c, h, w)={first}"
        )
    return SampleGrid(arr.astype(np.float64, copy=False))


def write_labels(labels, path) -> Path:
    """Write an integer [H][W] label map to an NPY file."""
    arr = np.asarray(labels)
    if arr.ndim != 2:
        raise ShapeRankError(f"label map must be rank 2, got rank {arr.ndim}")
    if not np.issubdtype(arr.dtype, np.integer):
        raise BadHeaderError(f"label map dtype must be integer, got {arr.dtype}")
    return write_array(arr, path)


def read_labels(path, classes: int | None = None) -> np.ndarray:
    """Load an integer [H][W] label map, optionally checking the class range."""
    arr = read_array(path)
    if arr.ndim != 2:
        raise ShapeRankError(f"{path}: expected rank-2 label map, got rank {arr.ndim}")
    if not np.issubdtype(arr.dtype, np.integer):
        raise BadHeaderError(f"{path}: label dtype must be integer, got {arr.dtype}")
    if classes is not None and arr.size and (arr.min() < 0 or arr.max() >= classes):
        raise ShapeRankError(f"{path}: labels must lie in [0, {classes})")
    return arr
