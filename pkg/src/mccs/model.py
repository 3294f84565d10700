"""Whitened multi-coil encoding operators and coil-level utilities.

The forward model for a single slice is: multiply the image by each coil
map, take the centered unitary DFT per coil, apply the sampling mask, then
mix the coil channels at every k-space bin with the noise whitener L*. The
maps-domain operator swaps the roles of image and maps; both share the
identity S x = X s.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import ComplexGrid, MultiCoilKSpace, SamplingMask
from .transforms import crop_stack, dft2_stack, idft2_stack, pad_stack

MAP_MAGNITUDE_TOL = 1e-9


@dataclass(frozen=True)
class SensitivityMaps:
    """Per-coil complex sensitivity maps on the image grid.

    Entry magnitudes never exceed 1 (within tolerance): reception must not
    amplify the signal. ``notes`` carries generator warnings, if any.
    """

    maps: tuple
    notes: tuple = ()

    def __post_init__(self):
        maps = tuple(self.maps)
        if not maps:
            raise ValueError("need at least one coil map")
        dims = (maps[0].rows, maps[0].cols)
        for c, m in enumerate(maps):
            if not isinstance(m, ComplexGrid):
                raise TypeError("maps must be ComplexGrid instances")
            if (m.rows, m.cols) != dims:
                raise ValueError("all maps must share the image dimensions")
            peak = float(np.abs(m.values).max())
            if peak > 1.0 + MAP_MAGNITUDE_TOL:
                raise ValueError(f"map {c} magnitude {peak:.6g} exceeds 1")
        object.__setattr__(self, "maps", maps)
        object.__setattr__(self, "notes", tuple(self.notes))

    @property
    def coils(self) -> int:
        return len(self.maps)

    @property
    def rows(self) -> int:
        return self.maps[0].rows

    @property
    def cols(self) -> int:
        return self.maps[0].cols

    def stack(self) -> np.ndarray:
        return np.stack([m.values for m in self.maps])

    def concat_matrix(self) -> np.ndarray:
        """The (MN, C) matrix whose columns are the flattened coil maps."""
        return self.stack().reshape(self.coils, -1).T

    @classmethod
    def from_stack(cls, arr, notes=()) -> "SensitivityMaps":
        arr = np.asarray(arr, dtype=np.complex128)
        return cls(tuple(ComplexGrid(arr[c], "image") for c in range(arr.shape[0])), notes)


@dataclass(frozen=True)
class NoiseCovariance:
    """Coil noise covariance N with whitener L satisfying inv(N) = L L*."""

    matrix: np.ndarray
    whitener: np.ndarray

    @property
    def coils(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def identity(cls, coils: int) -> "NoiseCovariance":
        eye = np.eye(coils, dtype=np.complex128)
        return cls(eye.copy(), eye.copy())


def cholesky_whitener(n) -> NoiseCovariance:
    """Build the whitening factor from a Hermitian PSD covariance.

    Returns L with inv(N) = L L*, so applying L* across the coil channel
    decorrelates the noise: L* N L = I.
    """
    n = np.asarray(n, dtype=np.complex128)
    if n.ndim != 2 or n.shape[0] != n.shape[1]:
        raise ValueError(f"covariance must be square, got shape {n.shape}")
    scale = float(np.abs(n).max())
    if scale == 0:
        raise ValueError("covariance is all zero")
    if float(np.abs(n - n.conj().T).max()) > 1e-12 * scale:
        raise ValueError("covariance is not Hermitian")
    n = (n + n.conj().T) / 2.0
    eigs = np.linalg.eigvalsh(n)
    if eigs[0] <= 0:
        raise ValueError(f"covariance is not positive definite (min eigenvalue {eigs[0]:.3e})")
    cond = float(eigs[-1] / eigs[0])
    if cond >= 1e12:
        raise ValueError(f"covariance too ill-conditioned: cond ~ {cond:.3e}")
    whitener = np.linalg.cholesky(np.linalg.inv(n))
    resid = whitener.conj().T @ n @ whitener - np.eye(n.shape[0])
    if float(np.abs(resid).max()) > 1e-10:
        raise ValueError("whitening identity L* N L = I failed numerically")
    return NoiseCovariance(n, whitener)


def estimate_noise_cov(noise_samples) -> np.ndarray:
    """Sample covariance of per-coil noise streams, with diagonal loading.

    ``noise_samples`` is (C, n) complex with n >= 10*C. The returned matrix
    is Hermitian PSD; a ridge of 1e-6 * trace/C keeps it invertible even for
    perfectly correlated streams.
    """
    samples = np.asarray(noise_samples, dtype=np.complex128)
    if samples.ndim != 2:
        raise ValueError("noise samples must be a (coils, n) array")
    coils, n = samples.shape
    if n < 10 * coils:
        raise ValueError(f"need at least {10 * coils} samples per coil, got {n}")
    centered = samples - samples.mean(axis=1, keepdims=True)
    cov = centered @ centered.conj().T / (n - 1)
    cov = (cov + cov.conj().T) / 2.0
    ridge = 1e-6 * float(np.trace(cov).real) / coils
    return cov + ridge * np.eye(coils)


def _maps_stack(maps) -> np.ndarray:
    if isinstance(maps, SensitivityMaps):
        return maps.stack()
    return np.asarray(maps, dtype=np.complex128)


def _mask_array(mask) -> np.ndarray:
    if isinstance(mask, SamplingMask):
        return mask.kept
    return np.asarray(mask, dtype=bool)


def _whitener_matrix(whitener) -> np.ndarray:
    if isinstance(whitener, NoiseCovariance):
        return whitener.whitener
    return np.asarray(whitener, dtype=np.complex128)


def _grid_values(x) -> np.ndarray:
    if isinstance(x, ComplexGrid):
        return x.values
    return np.asarray(x, dtype=np.complex128)


def _mix(matrix, stack):
    """Apply a (C, C) matrix across the coil axis of a (C, M, N) stack."""
    return np.tensordot(matrix, stack, axes=([1], [0]))


def apply_E_image(x, maps, mask, whitener) -> np.ndarray:
    """Whitened encoding of the image: L* applied over coils of mask*DFT(S x)."""
    xv = _grid_values(x)
    s = _maps_stack(maps)
    m = _mask_array(mask)
    L = _whitener_matrix(whitener)
    k = dft2_stack(s * xv[None, :, :])
    k *= m
    return _mix(L.conj().T, k)


def adjoint_E_image(y, maps, mask, whitener) -> np.ndarray:
    """Exact adjoint of :func:`apply_E_image`; returns an image-grid array."""
    s = _maps_stack(maps)
    m = _mask_array(mask)
    L = _whitener_matrix(whitener)
    g = _mix(L, np.asarray(y, dtype=np.complex128))
    g = g * m
    img = idft2_stack(g)
    return np.einsum("cij,cij->ij", s.conj(), img)


def apply_E_maps(s, x, mask, whitener) -> np.ndarray:
    """Whitened encoding of the stacked maps: same pipeline with x fixed."""
    sv = _maps_stack(s)
    xv = _grid_values(x)
    m = _mask_array(mask)
    L = _whitener_matrix(whitener)
    k = dft2_stack(sv * xv[None, :, :])
    k *= m
    return _mix(L.conj().T, k)


def adjoint_E_maps(y, x, mask, whitener) -> np.ndarray:
    """Exact adjoint of :func:`apply_E_maps`; returns a (C, M, N) stack."""
    xv = _grid_values(x)
    m = _mask_array(mask)
    L = _whitener_matrix(whitener)
    g = _mix(L, np.asarray(y, dtype=np.complex128))
    g = g * m
    img = idft2_stack(g)
    return xv.conj()[None, :, :] * img


@dataclass(frozen=True)
class BandwidthOp:
    """High-frequency selector on the doubled-FOV grid.

    Radius is normalized so the grid corner sits at 0.5; a bin is selected
    (penalized) exactly when its radius exceeds the cutoff, so at cutoff 0.5
    nothing is selected and at cutoff 0 everything but DC is.
    """

    cutoff: float
    rows: int
    cols: int
    selector: np.ndarray

    def __post_init__(self):
        if not 0.0 <= self.cutoff <= 0.5:
            raise ValueError("cutoff must lie in [0, 0.5]")
        sel = np.ascontiguousarray(self.selector, dtype=np.float64)
        if sel.shape != (self.rows, self.cols):
            raise ValueError("selector shape mismatch")
        sel.setflags(write=False)
        object.__setattr__(self, "selector", sel)

    @classmethod
    def for_image_grid(cls, rows: int, cols: int, cutoff: float) -> "BandwidthOp":
        """Selector sized for the 2x zero-padded version of an image grid."""
        pr, pc = 2 * rows, 2 * cols
        u = (np.arange(pr) - pr // 2) / pr
        v = (np.arange(pc) - pc // 2) / pc
        radius = np.hypot(u[:, None], v[None, :]) / np.sqrt(2.0)
        return cls(cutoff, pr, pc, (radius > cutoff).astype(np.float64))


def apply_bandwidth(s, bw: BandwidthOp) -> np.ndarray:
    """Out-of-band spectrum of each map on the doubled-FOV grid."""
    sv = _maps_stack(s)
    padded = pad_stack(sv)
    if padded.shape[-2:] != (bw.rows, bw.cols):
        raise ValueError("bandwidth operator sized for a different grid")
    return dft2_stack(padded) * bw.selector


def adjoint_bandwidth(y, bw: BandwidthOp, rows: int, cols: int) -> np.ndarray:
    """Exact adjoint of :func:`apply_bandwidth` back onto the image grid."""
    g = np.asarray(y, dtype=np.complex128) * bw.selector
    return crop_stack(idft2_stack(g), rows, cols)


def scale_dc(b: MultiCoilKSpace) -> MultiCoilKSpace:
    """Normalize so the largest coil DC magnitude is exactly 1.

    The divisor accumulates into ``dc_scale``, which makes the operation
    idempotent and invertible.
    """
    stack = b.stack()
    dc = stack[:, b.rows // 2, b.cols // 2]
    divisor = float(np.abs(dc).max())
    if divisor == 0:
        raise ValueError("DC magnitude is zero in every coil; cannot scale")
    return MultiCoilKSpace.from_stack(stack / divisor, b.mask, b.dc_scale * divisor)


def sos_combine(coil_images) -> np.ndarray:
    """Pixelwise root-sum-of-squares combination across coils."""
    if isinstance(coil_images, SensitivityMaps):
        stack = coil_images.stack()
    elif isinstance(coil_images, (list, tuple)):
        stack = np.stack([_grid_values(g) for g in coil_images])
    else:
        stack = np.asarray(coil_images, dtype=np.complex128)
    return np.sqrt((np.abs(stack) ** 2).sum(axis=0))
