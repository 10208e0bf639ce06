"""Radial convolution stencils and zero-padded linear convolution."""

from __future__ import annotations

from typing import Callable

import numpy as np
from scipy.signal import fftconvolve

from fraclab.grid import GridFunction, GridSpec


def stencil_distances(spec: GridSpec, reach: int) -> np.ndarray:
    """Squared integer distances of the offsets ``|o_i| <= reach``."""
    o = np.arange(-reach, reach + 1)
    if spec.dim == 1:
        return o**2
    i, j = np.meshgrid(o, o, indexing="ij")
    return i**2 + j**2


def radial_stencil(
    spec: GridSpec, reach: int, profile: Callable[[np.ndarray], np.ndarray]
) -> np.ndarray:
    """Evaluate ``profile(r)`` at every offset of the cube ``|o_i| <= reach``.

    ``profile`` is called once on the sorted distinct distances, which keeps
    expensive kernels (quadrature per distance) affordable in 2-D.
    """
    d2 = stencil_distances(spec, reach)
    uniq, inv = np.unique(d2, return_inverse=True)
    vals = np.asarray(profile(np.sqrt(uniq.astype(np.float64)) * spec.h), dtype=np.float64)
    return vals[inv].reshape(d2.shape)


def convolve(f: GridFunction, stencil: np.ndarray, scale: float = 1.0) -> GridFunction:
    """Linear convolution with a centred odd-sized stencil.

    ``f`` is treated as zero outside the box, so nothing wraps around.
    The output is sampled on the same nodes as ``f``.
    """
    out = fftconvolve(f.values, stencil, mode="same")
    if scale != 1.0:
        out = out * scale
    return GridFunction(f.spec, out)
