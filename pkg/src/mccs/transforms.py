"""Centered unitary 2-D DFT, orthonormal multilevel D4 wavelet, pad/crop.

Every function here accepts either a :class:`~mccs.grids.ComplexGrid` (the
result keeps/updates the domain tag) or a plain complex ndarray (the result
is an ndarray). The k-space origin sits at index (rows//2, cols//2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import ComplexGrid
from .kernels import d4_analyze, d4_synthesize


def _unwrap(grid):
    if isinstance(grid, ComplexGrid):
        return grid.values, True
    return np.asarray(grid, dtype=np.complex128), False


def dft2_centered(grid):
    """Unitary 2-D DFT with DC at the centered origin; preserves the norm."""
    arr, wrapped = _unwrap(grid)
    out = np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(arr), norm="ortho"))
    return ComplexGrid(out, "kspace") if wrapped else out


def idft2_centered(grid):
    """Exact inverse of :func:`dft2_centered`."""
    arr, wrapped = _unwrap(grid)
    out = np.fft.fftshift(np.fft.ifft2(np.fft.ifftshift(arr), norm="ortho"))
    return ComplexGrid(out, "image") if wrapped else out


def dft2_stack(arr):
    """Centered unitary DFT applied to each plane of a (..., M, N) stack."""
    return np.fft.fftshift(
        np.fft.fft2(np.fft.ifftshift(arr, axes=(-2, -1)), norm="ortho"), axes=(-2, -1)
    )


def idft2_stack(arr):
    """Inverse of :func:`dft2_stack`."""
    return np.fft.fftshift(
        np.fft.ifft2(np.fft.ifftshift(arr, axes=(-2, -1)), norm="ortho"), axes=(-2, -1)
    )


@dataclass(frozen=True)
class WaveletPlan:
    """Grid dims plus recursion depth for the multilevel D4 transform."""

    rows: int
    cols: int
    levels: int

    def __post_init__(self):
        if self.levels < 1:
            raise ValueError("levels must be at least 1")
        div = 1 << self.levels
        if self.rows % div or self.cols % div:
            raise ValueError(
                f"dims {self.rows}x{self.cols} not divisible by 2^{self.levels}"
            )

    @classmethod
    def auto(cls, rows: int, cols: int, max_levels: int = 4) -> "WaveletPlan":
        """Deepest plan the divisibility rule allows, capped at ``max_levels``."""
        levels = 0
        while (
            levels < max_levels
            and rows % (1 << (levels + 1)) == 0
            and cols % (1 << (levels + 1)) == 0
        ):
            levels += 1
        if levels == 0:
            raise ValueError(f"dims {rows}x{cols} do not admit a wavelet level")
        return cls(rows, cols, levels)


def _level_forward(block):
    block = d4_analyze(np.ascontiguousarray(block))
    block = d4_analyze(np.ascontiguousarray(block.T))
    return block.T


def _level_inverse(block):
    block = d4_synthesize(np.ascontiguousarray(block.T)).T
    return d4_synthesize(np.ascontiguousarray(block))


def dwt2_d4(grid, plan: WaveletPlan):
    """Orthonormal multilevel D4 wavelet transform with periodic boundaries.

    Standard quadrant layout: after each level the approximation band ends
    up in the top-left block and is transformed again.
    """
    arr, wrapped = _unwrap(grid)
    if arr.shape != (plan.rows, plan.cols):
        raise ValueError(f"grid shape {arr.shape} does not match plan {plan.rows}x{plan.cols}")
    out = arr.copy()
    m, n = plan.rows, plan.cols
    for _ in range(plan.levels):
        out[:m, :n] = _level_forward(out[:m, :n])
        m //= 2
        n //= 2
    return ComplexGrid(out, "wavelet") if wrapped else out


def idwt2_d4(coeffs, plan: WaveletPlan):
    """Exact inverse of :func:`dwt2_d4`."""
    arr, wrapped = _unwrap(coeffs)
    if arr.shape != (plan.rows, plan.cols):
        raise ValueError(f"grid shape {arr.shape} does not match plan {plan.rows}x{plan.cols}")
    out = arr.copy()
    for level in reversed(range(plan.levels)):
        m = plan.rows >> level
        n = plan.cols >> level
        out[:m, :n] = _level_inverse(out[:m, :n])
    return ComplexGrid(out, "image") if wrapped else out


def zero_pad_embed(grid, factor: int = 2):
    """Embed the grid centered in a zero grid ``factor`` times as large."""
    if factor != 2:
        raise ValueError("only factor 2 is supported")
    arr, wrapped = _unwrap(grid)
    m, n = arr.shape
    out = np.zeros((factor * m, factor * n), dtype=np.complex128)
    r0, c0 = m // 2, n // 2
    out[r0 : r0 + m, c0 : c0 + n] = arr
    if wrapped:
        return ComplexGrid(out, grid.domain)
    return out


def crop_center(grid, rows: int, cols: int):
    """Centered sub-grid; the exact adjoint of :func:`zero_pad_embed`."""
    arr, wrapped = _unwrap(grid)
    m, n = arr.shape
    if rows > m or cols > n:
        raise ValueError(f"cannot crop {m}x{n} to larger {rows}x{cols}")
    r0 = (m - rows) // 2
    c0 = (n - cols) // 2
    out = arr[r0 : r0 + rows, c0 : c0 + cols].copy()
    if wrapped:
        return ComplexGrid(out, grid.domain)
    return out


def pad_stack(arr, factor: int = 2):
    """:func:`zero_pad_embed` applied to each plane of a (..., M, N) stack."""
    if factor != 2:
        raise ValueError("only factor 2 is supported")
    m, n = arr.shape[-2:]
    out = np.zeros(arr.shape[:-2] + (factor * m, factor * n), dtype=np.complex128)
    r0, c0 = m // 2, n // 2
    out[..., r0 : r0 + m, c0 : c0 + n] = arr
    return out


def crop_stack(arr, rows: int, cols: int):
    """:func:`crop_center` applied to each plane of a stack."""
    m, n = arr.shape[-2:]
    r0 = (m - rows) // 2
    c0 = (n - cols) // 2
    return arr[..., r0 : r0 + rows, c0 : c0 + cols].copy()
