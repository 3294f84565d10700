"""Command-line front end: simulate, mask, reconstruct, evaluate, export-png.

Every command is driven by a strict JSON config (unknown keys rejected) and
writes a manifest sufficient to reproduce the run bit for bit. Exit codes:
0 success, 2 config error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .grids import ComplexGrid, CxtError, MultiCoilKSpace, SamplingMask, load_tensor, save_tensor
from .model import NoiseCovariance, SensitivityMaps, cholesky_whitener, sos_combine
from .recon import (
    ReconConfig,
    init_sensitivity,
    mccs_reconstruct,
    sparse_sense_reconstruct,
    zero_filled_sos,
)
from .simulate import (
    CoilGeometry,
    MaskSpec,
    biot_savart_maps,
    couple_maps_rank,
    laplacian_mask,
    shepp_logan_phantom,
    synthesize_kspace,
)

METHODS = ("zf-sos", "sparsesense", "mccs")


class ConfigError(Exception):
    """Configuration rejected before any computation started."""


_SIMULATE_DEFAULTS = {
    "rows": 64,
    "cols": 64,
    "coils": 8,
    "fov": 0.22,
    "ring_diameter": 0.5,
    "loop_radius": 0.12,
    "segments": 64,
    "plane_offset": 0.0,
    "coupling_rank": 5,
    "fraction": 0.25,
    "mask_std": 0.3,
    "snr": 30.0,
    "noise_cov": None,
    "seed": 0,
}

_MASK_DEFAULTS = {
    "rows": 64,
    "cols": 64,
    "fraction": 0.25,
    "mask_std": 0.3,
    "seed": 0,
}

_RECON_DEFAULTS = {
    "kspace": None,
    "maps": None,
    "reference": None,
    "noise_cov": None,
    "lambda_x": None,
    "lambda_s": None,
    "lambda_s_tilde": None,
    "k_c": 0.15,
    "outer_iters": 50,
    "pdhg_iters": 90,
    "fista_iters": 30,
    "sparse_iters": None,
    "wavelet_levels": None,
    "lpf_sigma": 0.05,
    "seed": 0,
}

_NUMBER = (int, float)
_SCHEMAS = {
    "simulate": {
        "rows": int,
        "cols": int,
        "coils": int,
        "fov": _NUMBER,
        "ring_diameter": _NUMBER,
        "loop_radius": _NUMBER,
        "segments": int,
        "plane_offset": _NUMBER,
        "coupling_rank": int,
        "fraction": _NUMBER,
        "mask_std": _NUMBER,
        "snr": (*_NUMBER, type(None)),
        "noise_cov": (dict, type(None)),
        "seed": int,
    },
    "mask": {
        "rows": int,
        "cols": int,
        "fraction": _NUMBER,
        "mask_std": _NUMBER,
        "seed": int,
    },
    "reconstruct": {
        "kspace": str,
        "maps": (str, type(None)),
        "reference": (str, type(None)),
        "noise_cov": (dict, type(None)),
        "lambda_x": (*_NUMBER, type(None)),
        "lambda_s": (*_NUMBER, type(None)),
        "lambda_s_tilde": (*_NUMBER, type(None)),
        "k_c": _NUMBER,
        "outer_iters": int,
        "pdhg_iters": int,
        "fista_iters": int,
        "sparse_iters": (int, type(None)),
        "wavelet_levels": (int, type(None)),
        "lpf_sigma": _NUMBER,
        "seed": int,
    },
}


def _load_config(path, command: str, defaults: dict) -> dict:
    if path is None:
        cfg = {}
    else:
        try:
            cfg = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(cfg, dict):
            raise ConfigError(f"config {path} must be a JSON object")
    schema = _SCHEMAS[command]
    for key, value in cfg.items():
        if key not in schema:
            raise ConfigError(f"config key {key!r} is not recognized for {command!r}")
        if not isinstance(value, schema[key]) or isinstance(value, bool):
            raise ConfigError(f"config key {key!r} has wrong type {type(value).__name__}")
    merged = dict(defaults)
    merged.update(cfg)
    for key, value in merged.items():
        if value is None and command == "reconstruct" and key == "kspace":
            raise ConfigError("config key 'kspace' is required for reconstruct")
    return merged


def _noise_cov_from_config(entry, coils: int) -> NoiseCovariance:
    if entry is None:
        return NoiseCovariance.identity(coils)
    if set(entry) != {"re", "im"}:
        raise ConfigError("noise_cov must be an object with 're' and 'im' matrices")
    matrix = np.asarray(entry["re"], dtype=float) + 1j * np.asarray(entry["im"], dtype=float)
    if matrix.shape != (coils, coils):
        raise ConfigError(f"noise_cov must be {coils}x{coils}")
    return cholesky_whitener(matrix)


def _noise_cov_to_json(ncov: NoiseCovariance) -> dict:
    return {
        "re": ncov.matrix.real.tolist(),
        "im": ncov.matrix.imag.tolist(),
    }


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _cmd_simulate(args) -> int:
    cfg = _load_config(args.config, "simulate", _SIMULATE_DEFAULTS)
    if args.seed is not None:
        cfg["seed"] = args.seed
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    geom = CoilGeometry(
        coils=cfg["coils"],
        ring_diameter=cfg["ring_diameter"],
        loop_radius=cfg["loop_radius"],
        segments=cfg["segments"],
        plane_offset=cfg["plane_offset"],
    )
    ncov = _noise_cov_from_config(cfg["noise_cov"], cfg["coils"])
    phantom = shepp_logan_phantom(cfg["rows"], cfg["cols"])
    maps = biot_savart_maps(geom, cfg["rows"], cfg["cols"], cfg["fov"])
    maps = couple_maps_rank(maps, cfg["coupling_rank"])
    mask = laplacian_mask(
        MaskSpec(cfg["rows"], cfg["cols"], cfg["fraction"], cfg["mask_std"], cfg["seed"])
    )
    snr = np.inf if cfg["snr"] is None else float(cfg["snr"])
    kspace = synthesize_kspace(phantom, maps, mask, ncov, snr, cfg["seed"])

    save_tensor(phantom, out / "phantom.cxt")
    save_tensor(maps, out / "maps.cxt")
    save_tensor(mask, out / "mask.cxt")
    save_tensor(kspace, out / "kspace.cxt")
    manifest = {
        "command": "simulate",
        "config": {k: v for k, v in cfg.items() if k != "noise_cov"},
        "noise_cov": _noise_cov_to_json(ncov),
        "seed": cfg["seed"],
        "dc_scale": kspace.dc_scale,
        "realized_fraction": mask.fraction,
        "outputs": ["phantom.cxt", "maps.cxt", "mask.cxt", "kspace.cxt"],
    }
    _write_json(out / "manifest.json", manifest)
    return 0


def _cmd_mask(args) -> int:
    cfg = _load_config(args.config, "mask", _MASK_DEFAULTS)
    if args.seed is not None:
        cfg["seed"] = args.seed
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    mask = laplacian_mask(
        MaskSpec(cfg["rows"], cfg["cols"], cfg["fraction"], cfg["mask_std"], cfg["seed"])
    )
    save_tensor(mask, out / "mask.cxt")
    _write_json(
        out / "manifest.json",
        {
            "command": "mask",
            "config": cfg,
            "seed": cfg["seed"],
            "realized_fraction": mask.fraction,
            "outputs": ["mask.cxt"],
        },
    )
    return 0


def _fit_scale(recon: np.ndarray, reference: np.ndarray) -> complex:
    denom = np.vdot(recon, recon)
    if denom == 0:
        return 1.0 + 0j
    return complex(np.vdot(recon, reference) / denom)


def evaluate_images(recon: np.ndarray, reference: np.ndarray) -> dict:
    """MSE between magnitude images, raw and after a complex scalar fit."""
    if recon.shape != reference.shape:
        raise ValueError(f"shape mismatch: {recon.shape} vs {reference.shape}")
    alpha = _fit_scale(recon, reference)
    mse_fitted = float(np.mean((np.abs(alpha * recon) - np.abs(reference)) ** 2))
    mse_raw = float(np.mean((np.abs(recon) - np.abs(reference)) ** 2))
    peak = float(np.abs(reference).max())
    psr = float(10.0 * np.log10(peak**2 / mse_fitted)) if mse_fitted > 0 else np.inf
    return {
        "alpha": [alpha.real, alpha.imag],
        "mse_fitted": mse_fitted,
        "mse_raw": mse_raw,
        "peak_signal_ratio_db": psr,
    }


def _cmd_reconstruct(args) -> int:
    cfg = _load_config(args.config, "reconstruct", _RECON_DEFAULTS)
    if args.seed is not None:
        cfg["seed"] = args.seed
    method = args.method
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}, expected one of {METHODS}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    b = load_tensor(cfg["kspace"])
    if not isinstance(b, MultiCoilKSpace):
        raise ConfigError(f"{cfg['kspace']} does not hold multi-coil k-space")
    ncov = _noise_cov_from_config(cfg["noise_cov"], b.coils)

    overrides = dict(
        k_c=cfg["k_c"],
        outer_iters=cfg["outer_iters"],
        pdhg_iters=cfg["pdhg_iters"],
        fista_iters=cfg["fista_iters"],
        wavelet_levels=cfg["wavelet_levels"],
        lpf_sigma=cfg["lpf_sigma"],
        seed=cfg["seed"],
    )
    for key in ("lambda_x", "lambda_s", "lambda_s_tilde"):
        if cfg[key] is not None:
            overrides[key] = float(cfg[key])
    rcfg = ReconConfig.from_data(b, ncov, **overrides)

    start = time.perf_counter()
    trace = []
    iterations = {"outer": 0, "pdhg": 0, "fista": 0}
    if method == "zf-sos":
        image = zero_filled_sos(b)
    elif method == "sparsesense":
        if cfg["maps"] is not None:
            maps = load_tensor(cfg["maps"])
            if not isinstance(maps, SensitivityMaps):
                raise ConfigError(f"{cfg['maps']} does not hold sensitivity maps")
        else:
            maps = init_sensitivity(b, rcfg.lpf_sigma)
        iters = cfg["sparse_iters"] if cfg["sparse_iters"] is not None else rcfg.fista_iters
        image = sparse_sense_reconstruct(b, maps, ncov, rcfg, iters=iters)
        iterations["fista"] = iters
    else:
        result = mccs_reconstruct(b, ncov, rcfg)
        image = result.image
        trace = result.objective_trace
        iterations = {
            "outer": rcfg.outer_iters,
            "pdhg": rcfg.pdhg_iters,
            "fista": rcfg.fista_iters,
        }
        save_tensor(result.maps, out / "maps_estimate.cxt")
    wall = time.perf_counter() - start

    save_tensor(image, out / "recon.cxt")
    metrics = {}
    if cfg["reference"] is not None:
        ref = load_tensor(cfg["reference"])
        if not isinstance(ref, ComplexGrid):
            raise ConfigError(f"{cfg['reference']} does not hold an image grid")
        metrics = evaluate_images(image.values, ref.values)
    report = {
        "command": "reconstruct",
        "method": method,
        "config": cfg,
        "resolved_lambdas": {
            "lambda_x": rcfg.lambda_x,
            "lambda_s": rcfg.lambda_s,
            "lambda_s_tilde": rcfg.lambda_s_tilde,
        },
        "trace": trace,
        "iterations": iterations,
        "metrics": metrics,
        "wall_time_s": wall,
    }
    _write_json(out / "report.json", report)
    return 0


def _load_image_values(path) -> np.ndarray:
    obj = load_tensor(path)
    if not isinstance(obj, ComplexGrid):
        raise ConfigError(f"{path} does not hold a 2-D grid")
    return obj.values


def _cmd_evaluate(args) -> int:
    metrics = evaluate_images(_load_image_values(args.recon), _load_image_values(args.reference))
    text = json.dumps(metrics, indent=2, sort_keys=True)
    print(text)
    if args.out is not None:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "metrics.json").write_text(text + "\n")
    return 0


def _cmd_export_png(args) -> int:
    from PIL import Image

    lo, hi = args.window
    if hi <= lo:
        raise ConfigError(f"window upper bound {hi} must exceed lower bound {lo}")
    values = np.abs(_load_image_values(args.grid))
    scaled = np.clip((values - lo) / (hi - lo), 0.0, 1.0)
    img8 = np.round(scaled * 255.0).astype(np.uint8)
    Image.fromarray(img8, mode="L").save(args.png)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mccs",
        description="Multi-coil compressed-sensing reconstruction toolbox",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="generate phantom, coil maps, mask, and k-space")
    p_sim.add_argument("--config", help="JSON config path")
    p_sim.add_argument("--seed", type=int, help="override the config seed")
    p_sim.add_argument("--out", default=".", help="output directory")
    p_sim.set_defaults(func=_cmd_simulate)

    p_mask = sub.add_parser("mask", help="generate a sampling mask only")
    p_mask.add_argument("--config", help="JSON config path")
    p_mask.add_argument("--seed", type=int, help="override the config seed")
    p_mask.add_argument("--out", default=".", help="output directory")
    p_mask.set_defaults(func=_cmd_mask)

    p_rec = sub.add_parser("reconstruct", help="reconstruct an image from k-space")
    p_rec.add_argument("--config", required=True, help="JSON config path")
    p_rec.add_argument("--method", required=True, choices=METHODS)
    p_rec.add_argument("--seed", type=int, help="override the config seed")
    p_rec.add_argument("--out", default=".", help="output directory")
    p_rec.set_defaults(func=_cmd_reconstruct)

    p_eval = sub.add_parser("evaluate", help="compare a reconstruction against a reference")
    p_eval.add_argument("recon", help=".cxt grid to evaluate")
    p_eval.add_argument("reference", help=".cxt reference grid")
    p_eval.add_argument("--out", help="directory for metrics.json")
    p_eval.set_defaults(func=_cmd_evaluate)

    p_png = sub.add_parser("export-png", help="write a windowed 8-bit magnitude image")
    p_png.add_argument("grid", help=".cxt grid to render")
    p_png.add_argument("png", help="output PNG path")
    p_png.add_argument(
        "--window", nargs=2, type=float, required=True, metavar=("LO", "HI"),
        help="linear display window",
    )
    p_png.set_defaults(func=_cmd_export_png)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (CxtError, ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
