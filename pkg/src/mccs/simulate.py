"""Simulation harness: phantom, loop-coil field maps, coil coupling,
variable-density sampling masks, and noisy multi-coil k-space synthesis."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import ComplexGrid, MultiCoilKSpace, SamplingMask
from .model import NoiseCovariance, SensitivityMaps, scale_dc
from .transforms import dft2_stack

MU0 = 4e-7 * np.pi  # vacuum permeability [T m / A]

# (intensity, semi-axis a, semi-axis b, x0, y0, angle_deg) of the classic
# ten-ellipse head phantom.
_ELLIPSES = (
    (2.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.98, 0.6624, 0.8740, 0.0, -0.0184, 0.0),
    (-0.02, 0.1100, 0.3100, 0.22, 0.0, -18.0),
    (-0.02, 0.1600, 0.4100, -0.22, 0.0, 18.0),
    (0.01, 0.2100, 0.2500, 0.0, 0.35, 0.0),
    (0.01, 0.0460, 0.0460, 0.0, 0.1, 0.0),
    (0.01, 0.0460, 0.0460, 0.0, -0.1, 0.0),
    (0.01, 0.0460, 0.0230, -0.08, -0.605, 0.0),
    (0.01, 0.0230, 0.0230, 0.0, -0.606, 0.0),
    (0.01, 0.0230, 0.0460, 0.06, -0.605, 0.0),
)


def shepp_logan_phantom(rows: int, cols: int, oversample: int = 8) -> ComplexGrid:
    """Area-averaged rendering of the ten-ellipse head phantom, peak value 1.

    Each pixel averages ``oversample**2`` sub-samples so renderings at
    different resolutions stay mutually consistent.
    """
    if rows < 32 or cols < 32:
        raise ValueError("phantom needs dims of at least 32")
    if oversample < 1:
        raise ValueError("oversample must be at least 1")
    ys = 1.0 - (np.arange(rows * oversample) + 0.5) * (2.0 / (rows * oversample))
    xs = (np.arange(cols * oversample) + 0.5) * (2.0 / (cols * oversample)) - 1.0
    fine = np.zeros((rows * oversample, cols * oversample))
    yg = ys[:, None]
    xg = xs[None, :]
    for value, a, b, x0, y0, angle in _ELLIPSES:
        phi = np.deg2rad(angle)
        dx = xg - x0
        dy = yg - y0
        xr = dx * np.cos(phi) + dy * np.sin(phi)
        yr = -dx * np.sin(phi) + dy * np.cos(phi)
        fine += value * ((xr / a) ** 2 + (yr / b) ** 2 <= 1.0)
    img = fine.reshape(rows, oversample, cols, oversample).mean(axis=(1, 3))
    img /= img.max()
    return ComplexGrid(img.astype(np.complex128), "image")


@dataclass(frozen=True)
class CoilGeometry:
    """A ring of circular receive loops around the field of view.

    Loop planes are tangent to the ring (normals point at the isocenter);
    ``plane_offset`` shifts the loop centers out of the imaging plane.
    """

    coils: int = 8
    ring_diameter: float = 0.5  # meters between opposite coils
    loop_radius: float = 0.12
    segments: int = 64
    plane_offset: float = 0.0

    def __post_init__(self):
        if self.coils < 1:
            raise ValueError("need at least one coil")
        if self.ring_diameter <= 0 or self.loop_radius <= 0:
            raise ValueError("geometry lengths must be positive")
        if self.segments < 3:
            raise ValueError("need at least 3 segments per loop")


def _loop_field(midpoints, dls, pixels, clamp_dist):
    """Biot-Savart sum over straight segments; returns (npix, 3) field and
    whether any pixel-segment distance needed clamping."""
    rvec = pixels[None, :, :] - midpoints[:, None, :]  # (nseg, npix, 3)
    dist = np.linalg.norm(rvec, axis=2)
    clamped = bool((dist < clamp_dist).any())
    dist = np.maximum(dist, clamp_dist)
    cross = np.cross(np.broadcast_to(dls[:, None, :], rvec.shape), rvec)
    return (MU0 / (4.0 * np.pi)) * (cross / dist[:, :, None] ** 3).sum(axis=0), clamped


def biot_savart_maps(geom: CoilGeometry, rows: int, cols: int, fov: float) -> SensitivityMaps:
    """Receive sensitivity (B_x - i B_y) of each ring coil over the grid.

    The transverse field of every loop is summed over straight segments;
    maps are jointly normalized so the largest magnitude over all coils is
    exactly 1, then clamped. A pixel closer to a wire than one segment
    length has its distance clamped (noted in the result's ``notes``).
    """
    pitch_y = fov / rows
    pitch_x = fov / cols
    ys = ((rows / 2.0) - np.arange(rows) - 0.5) * pitch_y
    xs = (np.arange(cols) + 0.5 - cols / 2.0) * pitch_x
    px, py = np.meshgrid(xs, ys)
    pixels = np.stack([px.ravel(), py.ravel(), np.zeros(px.size)], axis=1)

    ring_r = geom.ring_diameter / 2.0
    alphas = 2.0 * np.pi * np.arange(geom.segments + 1) / geom.segments
    seg_len = 2.0 * geom.loop_radius * np.sin(np.pi / geom.segments)

    stack = np.empty((geom.coils, rows, cols), dtype=np.complex128)
    clamped_any = False
    for c in range(geom.coils):
        phi = 2.0 * np.pi * c / geom.coils
        center = np.array([ring_r * np.cos(phi), ring_r * np.sin(phi), geom.plane_offset])
        tangent = np.array([-np.sin(phi), np.cos(phi), 0.0])
        zhat = np.array([0.0, 0.0, 1.0])
        points = (
            center[None, :]
            + geom.loop_radius * np.cos(alphas)[:, None] * tangent[None, :]
            + geom.loop_radius * np.sin(alphas)[:, None] * zhat[None, :]
        )
        midpoints = (points[:-1] + points[1:]) / 2.0
        dls = np.diff(points, axis=0)
        field, clamped = _loop_field(midpoints, dls, pixels, seg_len)
        clamped_any = clamped_any or clamped
        stack[c] = (field[:, 0] - 1j * field[:, 1]).reshape(rows, cols)

    stack /= np.abs(stack).max()
    mag = np.abs(stack)
    np.divide(stack, mag, out=stack, where=mag > 1.0)
    notes = ("wire-distance clamp applied",) if clamped_any else ()
    return SensitivityMaps.from_stack(stack, notes)


def couple_maps_rank(maps: SensitivityMaps, rank: int) -> SensitivityMaps:
    """Project the concatenated map matrix onto the closest rank-``rank``
    matrix (Frobenius sense), then renormalize magnitudes back under 1.

    The renormalization divides the whole matrix by its peak magnitude when
    that exceeds 1; a per-entry clamp would break the low-rank structure.
    """
    if rank > maps.coils or rank < 1:
        raise ValueError(f"rank must lie in [1, {maps.coils}]")
    mat = maps.concat_matrix()
    u, sig, vh = np.linalg.svd(mat, full_matrices=False)
    sig = sig.copy()
    sig[rank:] = 0.0
    coupled = (u * sig) @ vh
    peak = float(np.abs(coupled).max())
    if peak > 1.0:
        coupled /= peak
    stack = coupled.T.reshape(maps.coils, maps.rows, maps.cols)
    return SensitivityMaps.from_stack(stack, maps.notes)


@dataclass(frozen=True)
class MaskSpec:
    """Variable-density sampling mask specification."""

    rows: int
    cols: int
    fraction: float
    std: float = 0.3  # marginal standard deviation in normalized frequency
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.fraction <= 1.0:
            raise ValueError("fraction must lie in (0, 1]")
        if self.std <= 0:
            raise ValueError("std must be positive")


def laplacian_density(spec: MaskSpec) -> np.ndarray:
    """Per-bin keep probabilities: separable two-sided exponential profile
    scaled to the target fraction, with capped mass redistributed."""
    scale = spec.std / np.sqrt(2.0)  # Laplace scale from the marginal std
    u = (np.arange(spec.rows) - spec.rows // 2) / spec.rows
    v = (np.arange(spec.cols) - spec.cols // 2) / spec.cols
    dens = np.exp(-np.abs(u) / scale)[:, None] * np.exp(-np.abs(v) / scale)[None, :]
    target = spec.fraction * spec.rows * spec.cols
    p = dens * (target / dens.sum())
    for _ in range(1000):
        over = p > 1.0
        if not over.any():
            break
        p[over] = 1.0
        free = ~over
        need = target - float(over.sum())
        mass = float(p[free].sum())
        if mass <= 0:
            break
        p[free] *= need / mass
    return p


def laplacian_mask(spec: MaskSpec) -> SamplingMask:
    """Independent Bernoulli draw per bin from the capped density; the DC
    bin is always kept."""
    p = laplacian_density(spec)
    rng = np.random.default_rng(spec.seed)
    kept = rng.random(p.shape) < p
    kept[spec.rows // 2, spec.cols // 2] = True
    return SamplingMask(kept)


def synthesize_kspace(
    phantom: ComplexGrid,
    maps: SensitivityMaps,
    mask: SamplingMask,
    ncov: NoiseCovariance,
    snr: float,
    seed: int = 0,
) -> MultiCoilKSpace:
    """Masked multi-coil k-space of the phantom with correlated noise.

    Per coil: DFT of the map-weighted phantom, masked, plus noise drawn as
    L_N z (L_N the Cholesky factor of the covariance, z circular normal)
    scaled so the per-coil k-space SNR over masked bins equals ``snr``.
    The result is DC-scaled.
    """
    if not snr > 0:
        raise ValueError("snr must be positive (use inf for noiseless)")
    m = phantom.values
    s = maps.stack()
    if (phantom.rows, phantom.cols) != (maps.rows, maps.cols):
        raise ValueError("phantom and maps dims differ")
    if (mask.rows, mask.cols) != (phantom.rows, phantom.cols):
        raise ValueError("mask dims differ from phantom")
    clean = dft2_stack(s * m[None, :, :])
    clean *= mask.kept
    if np.isfinite(snr):
        chol = np.linalg.cholesky(ncov.matrix)
        rng = np.random.default_rng(seed)
        z = (
            rng.standard_normal(clean.shape) + 1j * rng.standard_normal(clean.shape)
        ) / np.sqrt(2.0)
        noise = np.tensordot(chol, z, axes=([1], [0]))
        signal_rms = float(np.sqrt((np.abs(clean[:, mask.kept]) ** 2).mean()))
        unit_rms = float(np.sqrt(np.trace(ncov.matrix).real / ncov.coils))
        noise *= signal_rms / (snr * unit_rms)
        data = clean + noise * mask.kept
    else:
        data = clean
    return scale_dc(MultiCoilKSpace.from_stack(data, mask, 1.0))
