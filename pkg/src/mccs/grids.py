"""Dense complex grid containers and the .cxt on-disk container format.

A .cxt file is a single UTF-8 JSON header line followed by ``\\n`` and a raw
payload of little-endian float32 (re, im) pairs, row-major and coil-major.
Values are stored in float32 but all in-memory computation is complex128.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

DOMAINS = ("image", "kspace", "wavelet")

_PAYLOAD_DTYPE = np.dtype("<c8")  # little-endian float32 pairs


class CxtError(Exception):
    """Base class for .cxt container failures."""


class CxtHeaderError(CxtError):
    """Header line missing, not valid JSON, or structurally wrong."""


class CxtPayloadError(CxtError):
    """Payload truncated or of unexpected length."""


class CxtInvariantError(CxtError):
    """Decoded object violates a type invariant."""


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ComplexGrid:
    """A dense 2-D complex array tagged with the domain it lives in."""

    values: np.ndarray
    domain: str = "image"

    def __post_init__(self):
        arr = np.ascontiguousarray(self.values, dtype=np.complex128)
        if arr.ndim != 2:
            raise ValueError(f"grid must be 2-D, got shape {arr.shape}")
        if arr.shape[0] < 2 or arr.shape[1] < 2:
            raise ValueError(f"grid dims must be at least 2x2, got {arr.shape}")
        if self.domain not in DOMAINS:
            raise ValueError(f"unknown domain {self.domain!r}, expected one of {DOMAINS}")
        object.__setattr__(self, "values", _freeze(arr))

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    def with_domain(self, domain: str) -> "ComplexGrid":
        return ComplexGrid(self.values, domain)


@dataclass(frozen=True)
class SamplingMask:
    """Boolean k-space sampling pattern; the centered DC bin is always kept."""

    kept: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.kept, dtype=bool)
        if arr.ndim != 2:
            raise ValueError(f"mask must be 2-D, got shape {arr.shape}")
        if arr.shape[0] < 2 or arr.shape[1] < 2:
            raise ValueError(f"mask dims must be at least 2x2, got {arr.shape}")
        if not arr[arr.shape[0] // 2, arr.shape[1] // 2]:
            raise ValueError("mask must keep the centered DC location")
        object.__setattr__(self, "kept", _freeze(arr))

    @property
    def rows(self) -> int:
        return self.kept.shape[0]

    @property
    def cols(self) -> int:
        return self.kept.shape[1]

    @property
    def fraction(self) -> float:
        return float(self.kept.sum()) / self.kept.size

    @classmethod
    def full(cls, rows: int, cols: int) -> "SamplingMask":
        return cls(np.ones((rows, cols), dtype=bool))


@dataclass(frozen=True)
class MultiCoilKSpace:
    """Per-coil k-space grids sharing one sampling mask and DC scale factor."""

    grids: tuple
    mask: SamplingMask
    dc_scale: float = 1.0

    def __post_init__(self):
        grids = tuple(self.grids)
        if not grids:
            raise ValueError("need at least one coil")
        for g in grids:
            if not isinstance(g, ComplexGrid):
                raise TypeError("grids must be ComplexGrid instances")
            if g.domain != "kspace":
                raise ValueError("coil grids must be tagged domain 'kspace'")
            if (g.rows, g.cols) != (self.mask.rows, self.mask.cols):
                raise ValueError(
                    f"coil grid {g.rows}x{g.cols} does not match mask "
                    f"{self.mask.rows}x{self.mask.cols}"
                )
        if not self.dc_scale > 0:
            raise ValueError("dc_scale must be positive")
        unmasked = ~self.mask.kept
        for c, g in enumerate(grids):
            if np.any(g.values[unmasked] != 0):
                raise ValueError(f"coil {c} has nonzero values outside the mask")
        object.__setattr__(self, "grids", grids)

    @property
    def coils(self) -> int:
        return len(self.grids)

    @property
    def rows(self) -> int:
        return self.mask.rows

    @property
    def cols(self) -> int:
        return self.mask.cols

    def stack(self) -> np.ndarray:
        """All coil grids as one (coils, rows, cols) complex128 array."""
        return np.stack([g.values for g in self.grids])

    @classmethod
    def from_stack(cls, arr, mask: SamplingMask, dc_scale: float = 1.0) -> "MultiCoilKSpace":
        arr = np.asarray(arr, dtype=np.complex128)
        grids = tuple(ComplexGrid(arr[c], "kspace") for c in range(arr.shape[0]))
        return cls(grids, mask, dc_scale)


def _mask_to_rle(kept: np.ndarray) -> list:
    """Run lengths of the row-major flattened mask, first run counting False."""
    flat = kept.ravel()
    boundaries = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    edges = np.concatenate(([0], boundaries, [flat.size]))
    runs = []
    if flat[0]:  # leading zero-length False run keeps the alternation aligned
        runs.append(0)
    runs.extend(int(n) for n in np.diff(edges))
    return runs


def _rle_to_mask(runs, rows: int, cols: int) -> np.ndarray:
    total = rows * cols
    flat = np.empty(total, dtype=bool)
    pos = 0
    value = False
    for n in runs:
        if n < 0 or pos + n > total:
            raise CxtHeaderError("mask run-length encoding does not fit the grid")
        flat[pos : pos + n] = value
        pos += n
        value = not value
    if pos != total:
        raise CxtHeaderError(f"mask run-length encoding covers {pos} of {total} entries")
    return flat.reshape(rows, cols)


def _encode_payload(arrs) -> bytes:
    return b"".join(np.ascontiguousarray(a, dtype=np.complex128).astype(_PAYLOAD_DTYPE).tobytes() for a in arrs)


def save_tensor(obj, path) -> None:
    """Write a grid container to ``path`` in the .cxt format."""
    # local import keeps grids free of a hard dependency on the model module
    from .model import SensitivityMaps

    if isinstance(obj, ComplexGrid):
        header = {"kind": "grid", "rows": obj.rows, "cols": obj.cols, "domain": obj.domain}
        payload = _encode_payload([obj.values])
    elif isinstance(obj, MultiCoilKSpace):
        header = {
            "kind": "multicoil",
            "rows": obj.rows,
            "cols": obj.cols,
            "coils": obj.coils,
            "domain": "kspace",
            "dc_scale": obj.dc_scale,
            "mask_rle": _mask_to_rle(obj.mask.kept),
            "mask_fraction": obj.mask.fraction,
        }
        payload = _encode_payload([g.values for g in obj.grids])
    elif isinstance(obj, SamplingMask):
        header = {
            "kind": "mask",
            "rows": obj.rows,
            "cols": obj.cols,
            "mask_rle": _mask_to_rle(obj.kept),
            "mask_fraction": obj.fraction,
        }
        payload = b""
    elif isinstance(obj, SensitivityMaps):
        header = {
            "kind": "stack",
            "rows": obj.rows,
            "cols": obj.cols,
            "coils": obj.coils,
            "domain": "image",
        }
        payload = _encode_payload([m.values for m in obj.maps])
    else:
        raise TypeError(f"cannot save object of type {type(obj).__name__}")

    line = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    try:
        Path(path).write_bytes(line + b"\n" + payload)
    except OSError as exc:
        raise CxtError(f"cannot write {path}: {exc}") from exc


def _require(header: dict, key: str, types) -> object:
    if key not in header:
        raise CxtHeaderError(f"header missing key {key!r}")
    value = header[key]
    if not isinstance(value, types):
        raise CxtHeaderError(f"header key {key!r} has wrong type {type(value).__name__}")
    return value


def load_tensor(path):
    """Read a .cxt file back into the container object it encodes."""
    from .model import SensitivityMaps

    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise CxtError(f"cannot read {path}: {exc}") from exc

    nl = raw.find(b"\n")
    if nl < 0:
        raise CxtHeaderError(f"{path}: no header line found")
    try:
        header = json.loads(raw[:nl].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CxtHeaderError(f"{path}: header is not valid JSON: {exc}") from exc
    if not isinstance(header, dict):
        raise CxtHeaderError(f"{path}: header must be a JSON object")

    payload = raw[nl + 1 :]
    if len(payload) % _PAYLOAD_DTYPE.itemsize:
        raise CxtPayloadError(f"{path}: payload length {len(payload)} is not a whole number of values")
    values = np.frombuffer(payload, dtype=_PAYLOAD_DTYPE).astype(np.complex128)

    kind = _require(header, "kind", str)
    rows = _require(header, "rows", int)
    cols = _require(header, "cols", int)

    def expect_count(n):
        if values.size != n:
            raise CxtPayloadError(f"{path}: expected {n} values, payload holds {values.size}")

    try:
        if kind == "grid":
            domain = _require(header, "domain", str)
            expect_count(rows * cols)
            return ComplexGrid(values.reshape(rows, cols), domain)
        if kind == "multicoil":
            coils = _require(header, "coils", int)
            dc_scale = float(_require(header, "dc_scale", (int, float)))
            runs = _require(header, "mask_rle", list)
            mask = SamplingMask(_rle_to_mask(runs, rows, cols))
            expect_count(coils * rows * cols)
            return MultiCoilKSpace.from_stack(values.reshape(coils, rows, cols), mask, dc_scale)
        if kind == "mask":
            runs = _require(header, "mask_rle", list)
            expect_count(0)
            return SamplingMask(_rle_to_mask(runs, rows, cols))
        if kind == "stack":
            coils = _require(header, "coils", int)
            expect_count(coils * rows * cols)
            return SensitivityMaps.from_stack(values.reshape(coils, rows, cols))
    except (ValueError, TypeError) as exc:
        raise CxtInvariantError(f"{path}: {exc}") from exc
    raise CxtHeaderError(f"{path}: unknown container kind {kind!r}")
