"""Command line front end.

Every subcommand reads an optional JSON config; flags override config keys.
Relative paths inside a config file are resolved against the file's folder.
Results go to ``--out-dir``; a one-line JSON summary is printed on stdout and
failures print a JSON error object on stderr.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from . import simkit
from .blind import (
    RunReport,
    SolverConfig,
    adaptive_sigma,
    build_problem,
    estimate_mu,
    iterative_rho,
    warm_start_sweep,
)
from .grid import DiskGeometry, FilterEstimate, delta_filter, disk_mask, set_fft_workers
from .io import read_array, write_array, write_pgm
from .nonblind import (
    compute_isnr,
    compute_rsnr,
    deconvolve,
    deconvolve_adaptive,
    disk_intensity_ratio,
    export_profile,
)
from .solvers import NumericalError
from .wavelet import estimate_sigma_rme

log = logging.getLogger("transitpsf")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

MODES = ("simulate", "blind", "deconv", "validate", "longrange-check")

# keys holding file paths, resolved relative to the config file
PATH_KEYS = ("observations", "filter", "prefilter", "report", "trace", "out_dir", "image")
# values of path keys that name built-ins rather than files
BUILTIN_NAMES = ("gaussian", "x", "delta", "bundled")
GT_PATH_KEYS = ("x", "h")

COMMON_DEFAULTS: Dict[str, Any] = {
    "out_dir": "out",
    "seed": 0,
    "threads": None,
    "emit_pgm": False,
    "trace": None,
}

MODE_DEFAULTS: Dict[str, Dict[str, Any]] = {
    "simulate": {
        "filter": "gaussian",
        "n": 256,
        "b": 16,
        "patches": 3,
        "radius": 48.0,
        "disk_center": [128.0, 128.0],
        "bsnr_db": 30.0,
        "blur": True,
        "holdout": True,
    },
    "blind": {
        "observations": None,
        "geometry": None,
        "b": 16,
        "levels": 3,
        "sigma": "rme",
        "mu": "fixed:0",
        "prefilter": None,
        "p_sweep": False,
        "solver": {},
        "ground_truth": None,
    },
    "deconv": {
        "observations": None,
        "filter": None,
        "rho": None,
        "levels": 3,
        "mu": "fixed:0",
        "prefilter": None,
        "solver": {},
    },
    "validate": {
        "observations": None,
        "geometry": None,
        "filter": None,
        "report": None,
        "rho_blind": None,
        "rho_factors": [1.0, 0.5, 0.25],
        "rho_scale": 0.5,
        "levels": 3,
        "mu": "fixed:0",
        "prefilter": None,
        "profile_row": None,
        "ground_truth": None,
        "solver": {},
    },
    "longrange-check": {
        "b": 64,
        "radius": 10.0,
        "image": "bundled",
        "psf": {"half_size": 256, "core_sigma": 1.5, "tail_fraction": 0.1, "exponent": 2.5, "r0": 3.0},
    },
}


class ConfigError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------


def _resolve(value, base: Path):
    if value is None or not isinstance(value, str) or value in BUILTIN_NAMES:
        return value
    p = Path(value)
    return str(p if p.is_absolute() else base / p)


def load_config(path: Optional[str]) -> Dict[str, Any]:
    if path is None:
        return {}
    p = Path(path)
    try:
        cfg = json.loads(p.read_text())
    except FileNotFoundError:
        raise ConfigError("config_missing", f"config file {p} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("config_invalid", f"{p}: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config_invalid", f"{p}: top level must be an object")
    base = p.resolve().parent
    for key in PATH_KEYS:
        if key in cfg:
            cfg[key] = _resolve(cfg[key], base)
    if isinstance(cfg.get("ground_truth"), dict):
        cfg["ground_truth"] = {k: _resolve(v, base) if k in GT_PATH_KEYS else v for k, v in cfg["ground_truth"].items()}
    if isinstance(cfg.get("validation"), dict):
        val = dict(cfg["validation"])
        for key in PATH_KEYS:
            if key in val:
                val[key] = _resolve(val[key], base)
        if isinstance(val.get("ground_truth"), dict):
            val["ground_truth"] = {k: _resolve(v, base) if k in GT_PATH_KEYS else v for k, v in val["ground_truth"].items()}
        cfg["validation"] = val
    return cfg


def effective_config(mode: str, file_cfg: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    cfg: Dict[str, Any] = dict(COMMON_DEFAULTS)
    cfg.update(json.loads(json.dumps(MODE_DEFAULTS[mode])))
    file_cfg = dict(file_cfg)
    # a simulation manifest carries a "validation" block for the held-out patch
    if mode == "validate" and isinstance(file_cfg.get("validation"), dict):
        file_cfg.update(file_cfg.pop("validation"))
    cfg.update(file_cfg)
    cfg.update({k: v for k, v in overrides.items() if v is not None})
    cfg["mode"] = mode
    if cfg.get("threads") is None:
        cfg["threads"] = os.cpu_count() or 1
    return cfg


def parse_sigma(spec) -> tuple:
    """``fixed:<v>`` | ``rme`` | ``adaptive:<m1>,<m2>,...`` (or a bare number)."""
    if isinstance(spec, (int, float)):
        return ("fixed", float(spec))
    s = str(spec).strip()
    try:
        if s == "rme":
            return ("rme", None)
        if s.startswith("fixed:"):
            v = float(s.split(":", 1)[1])
            if v < 0:
                raise ValueError
            return ("fixed", v)
        if s.startswith("adaptive:"):
            mults = tuple(float(t) for t in s.split(":", 1)[1].split(",") if t.strip())
            if not mults or min(mults) <= 0:
                raise ValueError
            return ("adaptive", mults)
        return ("fixed", float(s))
    except ValueError:
        raise ConfigError("bad_sigma", f"cannot parse sigma specification {spec!r}") from None


def parse_mu(spec) -> tuple:
    """``fixed:<v>`` | ``estimate`` (or a bare number)."""
    if isinstance(spec, (int, float)):
        return ("fixed", float(spec))
    s = str(spec).strip()
    if s == "estimate":
        return ("estimate", None)
    try:
        return ("fixed", float(s.split(":", 1)[1] if s.startswith("fixed:") else s))
    except ValueError:
        raise ConfigError("bad_mu", f"cannot parse mu specification {spec!r}") from None


def _geometries(cfg: Dict[str, Any], count: int) -> List[DiskGeometry]:
    geo = cfg.get("geometry")
    if geo is None:
        raise ConfigError("geometry_missing", "no disk geometry given for the observations")
    if isinstance(geo, dict):
        geo = [geo] * count
    if len(geo) != count:
        raise ConfigError("geometry_missing", f"{len(geo)} disk geometries for {count} observation patches")
    try:
        return [DiskGeometry.from_dict(g) for g in geo]
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError("geometry_invalid", str(exc)) from None


def _load(path, what: str) -> np.ndarray:
    if path is None:
        raise ConfigError(f"{what}_missing", f"no {what} file given")
    try:
        return read_array(path)
    except FileNotFoundError as exc:
        raise ConfigError(f"{what}_missing", str(exc)) from None


def _stack(a: np.ndarray) -> np.ndarray:
    if a.ndim == 2:
        return a[None]
    if a.ndim != 3:
        raise ConfigError("observations_invalid", f"expected a patch or a stack of patches, got shape {a.shape}")
    return a


def _load_filter(path) -> FilterEstimate:
    data = _load(path, "filter")
    try:
        return FilterEstimate(data)
    except ValueError as exc:
        raise ConfigError("filter_invalid", str(exc)) from None


def _solver_config(cfg: Dict[str, Any], **fields) -> SolverConfig:
    try:
        return SolverConfig.from_dict({**cfg.get("solver", {}), **fields})
    except (TypeError, ValueError) as exc:
        raise ConfigError("solver_invalid", str(exc)) from None


def _trace_writer(cfg: Dict[str, Any]):
    if not cfg.get("trace"):
        return None, None
    path = Path(cfg["trace"])
    path.parent.mkdir(parents=True, exist_ok=True)
    fh = path.open("w")

    def trace(record: dict) -> None:
        fh.write(json.dumps(record, default=float) + "\n")

    return trace, fh


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.generic):
        return _json_safe(obj.item())
    return obj


def _write_json(path: Path, obj) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_json_safe(obj), indent=2))
    return path


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def _make_filter(spec, b: int) -> FilterEstimate:
    if spec == "gaussian":
        return simkit.make_gaussian_filter(b)
    if spec == "x":
        return simkit.make_x_filter(b)
    if spec == "delta":
        return delta_filter(b)
    return _load_filter(spec)


def run_simulate(cfg: Dict[str, Any]) -> Dict[str, Any]:
    out = Path(cfg["out_dir"])
    p = int(cfg["patches"])
    centers = cfg.get("centers")
    if centers is None:
        available = simkit.DEFAULT_CUTOUT_CENTERS
        need = p + (1 if cfg["holdout"] else 0)
        if need > len(available):
            raise ConfigError("too_many_patches", f"the bundled texture offers {len(available)} cutouts")
        centers = list(available[:p]) + ([available[-1]] if cfg["holdout"] else [])
    else:
        centers = [tuple(c) for c in centers]
    h = _make_filter(cfg["filter"], int(cfg["b"]))
    scenario = simkit.SyntheticScenario(
        h=h,
        n=int(cfg["n"]),
        centers=centers,
        disk_center=tuple(cfg["disk_center"]),
        radius=float(cfg["radius"]),
        bsnr_db=cfg["bsnr_db"],
        seed=int(cfg["seed"]),
        blur=bool(cfg["blur"]),
    )
    try:
        sim = simkit.simulate_observations(scenario)
    except ValueError as exc:
        raise ConfigError("scenario_invalid", str(exc)) from None

    n_fit = p if cfg["holdout"] else len(centers)
    write_array(out / "Y.f64", sim.y[:n_fit])
    write_array(out / "X_GT.f64", sim.x_gt[:n_fit])
    write_array(out / "h_GT.f64", h.data)
    geom = scenario.geometry().to_dict()
    manifest: Dict[str, Any] = {
        "observations": "Y.f64",
        "geometry": [geom] * n_fit,
        "b": scenario.b,
        "sigma": f"fixed:{sim.sigma!r}",
        "mu": "fixed:0",
        "seed": scenario.seed,
        "ground_truth": {"x": "X_GT.f64", "h": "h_GT.f64"},
        "scenario": {**scenario.manifest(), "filter": cfg["filter"], "sigma": sim.sigma},
    }
    if cfg["holdout"]:
        write_array(out / "Y_val.f64", sim.y[n_fit])
        write_array(out / "X_val_GT.f64", sim.x_gt[n_fit])
        manifest["validation"] = {
            "observations": "Y_val.f64",
            "geometry": geom,
            "ground_truth": {"x": "X_val_GT.f64", "h": "h_GT.f64"},
        }
    if cfg["emit_pgm"]:
        for j in range(n_fit):
            write_pgm(out / f"Y_{j}.pgm", sim.y[j])
        write_pgm(out / "h_GT.pgm", h.data, log=True)
    _write_json(out / "manifest.json", manifest)
    return {"status": "ok", "manifest": str(out / "manifest.json"), "sigma": sim.sigma, "patches": n_fit}


def _metrics_against_truth(gt: Optional[dict], y: np.ndarray, x: np.ndarray, h: FilterEstimate) -> Dict[str, float]:
    if not gt:
        return {}
    metrics = {}
    if gt.get("h"):
        h_gt = _load(gt["h"], "ground_truth")
        if h_gt.shape == h.data.shape:
            metrics["rsnr"] = compute_rsnr(h_gt, h)
    if gt.get("x"):
        x_gt = _load(gt["x"], "ground_truth")
        x_gt = x_gt.reshape(x.shape) if x_gt.size == x.size else x_gt[: x.shape[0]]
        if x_gt.shape == x.shape:
            metrics["isnr"] = compute_isnr(y, x, x_gt)
    return metrics


def _write_blind_outputs(out: Path, y: np.ndarray, rep: RunReport, domain, cfg, extra=None) -> Dict[str, Any]:
    x = domain.crop(rep.x)
    write_array(out / "h.f64", rep.h.data)
    for j in range(x.shape[0]):
        write_array(out / f"X_{j}.f64", x[j])
    if cfg["emit_pgm"]:
        write_pgm(out / "h.pgm", rep.h.data, log=True)
        for j in range(x.shape[0]):
            write_pgm(out / f"X_{j}.pgm", x[j])
    metrics = _metrics_against_truth(cfg.get("ground_truth"), y, x, rep.h)
    payload = rep.to_dict()
    payload["metrics"] = metrics
    payload.update(extra or {})
    _write_json(out / "report.json", payload)
    return {"rho": rep.rho, "sigma": rep.sigma, "whiteness": rep.whiteness, **metrics}


def run_blind(cfg: Dict[str, Any]) -> Dict[str, Any]:
    out = Path(cfg["out_dir"])
    y = _stack(_load(cfg.get("observations"), "observations"))
    geoms = _geometries(cfg, y.shape[0])
    b = int(cfg["b"])
    prefilter = _load(cfg["prefilter"], "prefilter") if cfg.get("prefilter") else None
    mu_kind, mu_val = parse_mu(cfg["mu"])
    mu = estimate_mu(list(y), geoms) if mu_kind == "estimate" else mu_val
    sigma_kind, sigma_val = parse_sigma(cfg["sigma"])
    if sigma_kind == "adaptive" and cfg["p_sweep"]:
        raise ConfigError("config_conflict", "adaptive sigma cannot be combined with the P sweep")
    sigma = estimate_sigma_rme(y[0] - mu) if sigma_kind == "rme" else sigma_val

    base = _solver_config(cfg, mu=mu, sigma=sigma or 0.0, seed=int(cfg["seed"]), levels=int(cfg["levels"]))
    trace, fh = _trace_writer(cfg)
    try:
        if cfg["p_sweep"]:
            summaries = []

            def save(p, problem, rep):
                sub = _write_blind_outputs(out / f"P{p}", problem.z + mu, rep, problem.domain, cfg, {"P": p})
                summaries.append({"P": p, **sub})

            warm_start_sweep(y, geoms, b, base, prefilter, trace=trace, callback=save)
            return {"status": "ok", "sweep": summaries}

        problem = build_problem(y, geoms, b, mu, base.levels, prefilter, base.theta_draws, base.seed)
        if sigma_kind == "adaptive":
            _, rep, _ = adaptive_sigma(problem, base, sigma_val, threads=int(cfg["threads"]))
        else:
            _, _, rep = iterative_rho(problem, base, trace=trace)
        summary = _write_blind_outputs(out, y, rep, problem.domain, cfg)
        return {"status": "ok", **summary}
    finally:
        if fh is not None:
            fh.close()


def run_deconv(cfg: Dict[str, Any]) -> Dict[str, Any]:
    out = Path(cfg["out_dir"])
    y = _stack(_load(cfg.get("observations"), "observations"))
    h = _load_filter(cfg.get("filter"))
    if cfg.get("rho") is None:
        raise ConfigError("rho_missing", "deconv needs an explicit rho")
    rho = float(cfg["rho"])
    mu_kind, mu_val = parse_mu(cfg["mu"])
    if mu_kind == "estimate":
        mu = estimate_mu(list(y), _geometries(cfg, y.shape[0]))
    else:
        mu = mu_val
    prefilter = _load(cfg["prefilter"], "prefilter") if cfg.get("prefilter") else None
    solver = _solver_config(cfg)
    results = []
    for j, patch in enumerate(y):
        res = deconvolve(
            patch - mu, h, rho, tol=solver.inner_tol, max_inner=solver.cp_max_inner,
            levels=int(cfg["levels"]), prefilter=prefilter, whiteness_window=solver.whiteness_window,
        )
        write_array(out / f"X_{j}.f64", res.x)
        if cfg["emit_pgm"]:
            write_pgm(out / f"X_{j}.pgm", res.x)
        results.append({"patch": j, "rho": res.rho, "whiteness": res.whiteness})
    _write_json(out / "deconv.json", {"mu": mu, "patches": results})
    return {"status": "ok", "patches": results}


def _rho_from_report(cfg: Dict[str, Any]) -> float:
    if cfg.get("rho_blind") is not None:
        return float(cfg["rho_blind"])
    report = cfg.get("report") or str(Path(cfg["out_dir"]) / "report.json")
    try:
        rho = json.loads(Path(report).read_text())["rho"]
    except (FileNotFoundError, KeyError, json.JSONDecodeError):
        raise ConfigError("rho_missing", f"no rho_blind given and no usable blind report at {report}") from None
    return float(rho)


def run_validate(cfg: Dict[str, Any]) -> Dict[str, Any]:
    out = Path(cfg["out_dir"])
    y = _load(cfg.get("observations"), "observations")
    if y.ndim == 3 and y.shape[0] == 1:
        y = y[0]
    if y.ndim != 2:
        raise ConfigError("observations_invalid", "validation expects one held-out patch")
    geom = _geometries(cfg, 1)[0]
    h = _load_filter(cfg.get("filter") or str(out / "h.f64"))
    rho_blind = _rho_from_report(cfg)
    mu_kind, mu_val = parse_mu(cfg["mu"])
    mu = estimate_mu([y], [geom]) if mu_kind == "estimate" else mu_val
    prefilter = _load(cfg["prefilter"], "prefilter") if cfg.get("prefilter") else None
    solver = _solver_config(cfg)
    res = deconvolve_adaptive(
        y - mu, h, rho_blind,
        factors=tuple(cfg["rho_factors"]), scale=float(cfg["rho_scale"]),
        tol=solver.inner_tol, max_inner=solver.cp_max_inner, levels=int(cfg["levels"]),
        prefilter=prefilter, whiteness_window=solver.whiteness_window,
    )
    omega = disk_mask(y.shape, geom.center, geom.inner_radius)
    metrics = {"disk_intensity_ratio": disk_intensity_ratio(y, res.x, omega)}
    metrics.update(_metrics_against_truth(cfg.get("ground_truth"), y[None], res.x[None], h))
    write_array(out / "X_val.f64", res.x)
    if cfg["emit_pgm"]:
        write_pgm(out / "X_val.pgm", res.x)
    if cfg.get("profile_row") is not None:
        export_profile(out / "profile.csv", y, res.x, int(cfg["profile_row"]))
    payload = {
        "metrics": metrics,
        "rho": res.rho,
        "whiteness": res.whiteness,
        "candidates": [{"rho": r, "whiteness": m} for r, m in res.candidates],
    }
    _write_json(out / "metrics.json", payload)
    return {"status": "ok", **payload}


def run_longrange(cfg: Dict[str, Any]) -> Dict[str, Any]:
    out = Path(cfg["out_dir"])
    psf_cfg = cfg["psf"]
    if isinstance(psf_cfg, str):
        psf = _load(psf_cfg, "psf")
    else:
        try:
            psf = simkit.make_power_law_psf(**psf_cfg)
        except TypeError as exc:
            raise ConfigError("psf_invalid", str(exc)) from None
    image = simkit.solar_texture() if cfg["image"] == "bundled" else _load(cfg["image"], "image")
    try:
        check = simkit.longrange_constant_check(psf, image, b=int(cfg["b"]), center=cfg.get("center"), radius=float(cfg["radius"]))
    except ValueError as exc:
        raise ConfigError("longrange_invalid", str(exc)) from None
    payload = {"spread": check.spread, "mean": check.mean, "relative_spread": check.relative_spread}
    _write_json(out / "longrange.json", payload)
    return {"status": "ok", **payload}


RUNNERS: Dict[str, Callable[[Dict[str, Any]], Dict[str, Any]]] = {
    "simulate": run_simulate,
    "blind": run_blind,
    "deconv": run_deconv,
    "validate": run_validate,
    "longrange-check": run_longrange,
}


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config; flags override its keys")
    common.add_argument("--out-dir", dest="out_dir")
    common.add_argument("--sigma", help="fixed:<v> | rme | adaptive:1,2,3")
    common.add_argument("--mu", help="fixed:<v> | estimate")
    common.add_argument("--prefilter", help="parametric PSF array applied before the estimated core")
    common.add_argument("--b", type=int, help="half-width of the estimated filter window")
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int, help="worker cap (default: all cores)")
    common.add_argument("--emit-pgm", dest="emit_pgm", action="store_const", const=True)
    common.add_argument("--trace", help="write per-iteration solver records as JSON lines")
    common.add_argument("--print-effective-config", action="store_true")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="transitpsf", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="mode", required=True)
    p = sub.add_parser("simulate", parents=[common], help="write a synthetic transit scenario")
    p.add_argument("--filter", help="gaussian | x | delta | <array path>")
    p.add_argument("--patches", type=int)
    p.add_argument("--bsnr", dest="bsnr_db", type=float)
    p = sub.add_parser("blind", parents=[common], help="estimate the PSF core and the images")
    p.add_argument("--observations")
    p.add_argument("--p-sweep", dest="p_sweep", action="store_const", const=True, help="warm-started runs for P = 1..P")
    p = sub.add_parser("deconv", parents=[common], help="restore patches with a known filter")
    p.add_argument("--observations")
    p.add_argument("--filter")
    p.add_argument("--rho", type=float)
    p = sub.add_parser("validate", parents=[common], help="non-blind check on a held-out patch")
    p.add_argument("--observations")
    p.add_argument("--filter")
    p.add_argument("--report", help="blind report providing rho")
    p.add_argument("--rho-blind", dest="rho_blind", type=float)
    p.add_argument("--profile-row", dest="profile_row", type=int)
    p = sub.add_parser("longrange-check", parents=[common], help="constant long-range contribution check")
    p.add_argument("--radius", type=float)
    return parser


_NOT_CONFIG = {"config", "print_effective_config", "verbose", "mode"}


def _fail(code: int, kind: str, message: str) -> int:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(asctime)s %(name)s %(message)s")
    overrides = {k: v for k, v in vars(args).items() if k not in _NOT_CONFIG}
    try:
        cfg = effective_config(args.mode, load_config(args.config), overrides)
        if args.print_effective_config:
            print(json.dumps(cfg, indent=2))
            return EXIT_OK
        set_fft_workers(int(cfg["threads"]))
        summary = RUNNERS[args.mode](cfg)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, exc.code, str(exc))
    except NumericalError as exc:
        if getattr(exc, "dump", None):
            _write_json(Path(cfg["out_dir"]) / "failure.json", exc.dump)
        return _fail(EXIT_NUMERIC, "numerical_failure", str(exc))
    except FloatingPointError as exc:
        return _fail(EXIT_NUMERIC, "numerical_failure", str(exc))
    except ValueError as exc:
        return _fail(EXIT_CONFIG, "invalid_input", str(exc))
    print(json.dumps(_json_safe(summary)))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
