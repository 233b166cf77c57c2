"""
Experiment orchestration: config validation, per-grid runs and report files.
"""

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from jinja2 import Environment, FileSystemLoader, select_autoescape
from pydantic import ValidationError

from bounds import (
    BoundsReport,
    bounds_summary,
    evaluate_bounds,
    full_matrix_bilinear,
    gani_gap_summary,
    iteration_counts,
    voigt_reuss,
)
from errors import ConfigError
from grid import GridSpec
from material import (
    Inclusion,
    InclusionSpec,
    Material,
    PixelGridMaterial,
    RectTopology,
    load_bitmap,
    sample_material,
    smooth_pixels,
    synthetic_bitmap,
)
from models import (
    BitmapMaterialConfig,
    ExperimentConfig,
    InclusionMaterialConfig,
    Settings,
    SyntheticBitmapConfig,
    get_settings,
)
from solver import (
    Formulation,
    SolveSettings,
    divergence_residual,
    gani_homogenized,
    reconstruct_dual,
    solve_all_directions,
)

logger = logging.getLogger(__name__)

TEMPLATE_DIR = Path(__file__).parent / "templates"
FORMATS = {"json": ["json"], "csv": ["csv"], "html": ["html"], "both": ["json", "csv"], "all": ["json", "csv", "html"]}
CSV_MATRICES = ("A_gani", "B_gani_inv", "A_upper", "B_lower_inv", "mean", "D", "voigt", "reuss")
CSV_TRAILER = ("gap_min_eigenvalue", "duality_defect", "iterations_primal", "iterations_dual", "config_hash", "error")


def expand_formats(fmt: Union[str, Sequence[str]]) -> List[str]:
    names = [fmt] if isinstance(fmt, str) else list(fmt)
    out: List[str] = []
    for name in names:
        if name not in FORMATS:
            raise ValueError(f"unknown output format {name!r}; choose from {sorted(FORMATS)}")
        out.extend(f for f in FORMATS[name] if f not in out)
    return out


# --- configuration -------------------------------------------------------


def _matrix_errors(value, d: int, where: str) -> Tuple[Optional[np.ndarray], List[str]]:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return float(arr) * np.eye(d), []
    if arr.shape != (d, d):
        return None, [f"{where}: expected a scalar or a {d}x{d} matrix, got shape {arr.shape}"]
    if not np.allclose(arr, arr.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(arr).max())):
        return None, [f"{where}: matrix is not symmetric"]
    return arr, []


def _spd(matrix: np.ndarray) -> bool:
    return bool(np.linalg.eigvalsh(matrix).min() > 0.0)


def _inclusion_errors(cfg: ExperimentConfig, material: InclusionMaterialConfig) -> List[str]:
    d = len(cfg.cell)
    errors = []
    A0, errs = _matrix_errors(material.A0, d, "material.A0")
    errors += errs
    if A0 is not None and not _spd(A0):
        errors.append("material.A0: matrix phase is not positive definite")
    for j, inc in enumerate(material.inclusions):
        where = f"material.inclusions.{j}"
        if len(inc.h) != d:
            errors.append(f"{where}.h: expected {d} side lengths, got {len(inc.h)}")
        else:
            for a, (h, y) in enumerate(zip(inc.h, cfg.cell)):
                if not (0 < h <= y):
                    errors.append(f"{where}.h: side {h} along axis {a} exceeds the cell (0 < h <= {y})")
        if inc.center is not None and len(inc.center) != d:
            errors.append(f"{where}.center: expected {d} coordinates, got {len(inc.center)}")
        increment, errs = _matrix_errors(inc.increment, d, f"{where}.increment")
        errors += errs
        if A0 is not None and increment is not None and not _spd(A0 + increment):
            errors.append(f"{where}.increment: phase A0 + A_j is not positive definite")
    return errors


def semantic_errors(cfg: ExperimentConfig, base_dir: Optional[Path] = None) -> List[str]:
    """Every rule the models cannot express on their own, all at once."""
    d = len(cfg.cell)
    errors = []
    if any(y <= 0 for y in cfg.cell):
        errors.append(f"cell: side lengths must be positive, got {cfg.cell}")
    needs_odd = "bounds" in cfg.formulations or cfg.dual_source == "reconstruct"
    for i, N in enumerate(cfg.grids):
        if len(N) != d:
            errors.append(f"grids.{i}: grid {N} has {len(N)} axes but the cell is {d}-d")
            continue
        if any(n < 1 for n in N):
            errors.append(f"grids.{i}: points per axis must be >= 1, got {N}")
        elif needs_odd and any(n % 2 == 0 for n in N):
            rule = "bounds" if "bounds" in cfg.formulations else "dual reconstruction"
            errors.append(f"grids.{i}: {rule} require odd grids (odd-grid rule), got {N}")
    material = cfg.material
    if isinstance(material, InclusionMaterialConfig):
        errors += _inclusion_errors(cfg, material)
    else:
        if d != 2:
            errors.append(f"material: bitmaps describe 2-d cells, the cell is {d}-d")
        if isinstance(material, BitmapMaterialConfig):
            path = _resolve(material.path, base_dir)
            if not path.exists():
                errors.append(f"material.path: bitmap not found: {path}")
    return errors


def _resolve(path: str, base_dir: Optional[Path]) -> Path:
    p = Path(path)
    return p if p.is_absolute() or base_dir is None else base_dir / p


def _format_location(loc: Sequence[Any]) -> str:
    return ".".join(str(part) for part in loc) or "<root>"


def validate_config(raw: str, base_dir: Optional[Path] = None) -> ExperimentConfig:
    """Parse and check a JSON experiment description; ConfigError lists all violations."""
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"line {exc.lineno}, column {exc.colno}: {exc.msg}"]) from exc
    try:
        cfg = ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError([f"{_format_location(e['loc'])}: {e['msg']}" for e in exc.errors()]) from exc
    errors = semantic_errors(cfg, base_dir)
    if errors:
        raise ConfigError(errors)
    if isinstance(cfg.material, BitmapMaterialConfig) and base_dir is not None:
        resolved = str(_resolve(cfg.material.path, base_dir))
        cfg = cfg.model_copy(update={"material": cfg.material.model_copy(update={"path": resolved})})
    return cfg


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError([f"{path}: {exc.strerror or exc}"]) from exc
    return validate_config(raw, base_dir=path.parent)


def config_digest(cfg: ExperimentConfig) -> str:
    canonical = json.dumps(cfg.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def build_material(cfg: ExperimentConfig) -> Material:
    material = cfg.material
    d = len(cfg.cell)
    if isinstance(material, InclusionMaterialConfig):
        inclusions = tuple(
            Inclusion(
                increment=inc.increment,
                topology=RectTopology(tuple(inc.h), strict=inc.strict),
                center=tuple(inc.center) if inc.center is not None else (0.0,) * d,
            )
            for inc in material.inclusions
        )
        return InclusionSpec(tuple(cfg.cell), material.A0, inclusions)
    if isinstance(material, SyntheticBitmapConfig):
        indicator = synthetic_bitmap(material.shape, material.fraction, cfg.seed)
    else:
        indicator = load_bitmap(material.path)
    pixels = PixelGridMaterial(indicator, material.a_matrix, material.a_inclusion, tuple(cfg.cell))
    return smooth_pixels(pixels) if material.smooth else pixels


# --- running -------------------------------------------------------------


def _solve_grid(
    cfg: ExperimentConfig, material: Material, g: GridSpec, settings: Settings, report: BoundsReport
):
    wanted = set(cfg.formulations)
    solve = SolveSettings(tol=cfg.solver.tol, max_iter=cfg.solver.max_iter, record_history=False)
    diagnostics = report.diagnostics
    m = sample_material(material, g)

    need_dual = bool(wanted & {"dual", "bounds"})
    need_primal = bool(wanted & {"primal", "bounds"}) or (need_dual and cfg.dual_source == "reconstruct")
    primal = dual = None
    if need_primal:
        primal = solve_all_directions(m, Formulation.PRIMAL, solve, settings.threads, strict=False)
        A = gani_homogenized(m, primal, Formulation.PRIMAL)
        report.A_gani = A.matrix
        diagnostics["primal_asymmetry"] = A.asymmetry
        diagnostics["iterations_primal"] = iteration_counts(primal)
        diagnostics["divergence_residual_primal"] = [divergence_residual(m, s) for s in primal]
    if need_dual:
        if cfg.dual_source == "reconstruct":
            dual = reconstruct_dual(primal, m, report.A_gani)
            diagnostics["dual_nonconformity"] = [s.nonconformity for s in dual]
        else:
            dual = solve_all_directions(m, Formulation.DUAL, solve, settings.threads, strict=False)
        B = gani_homogenized(m, dual, Formulation.DUAL)
        report.B_gani_inv = np.linalg.inv(B.matrix)
        diagnostics["dual_asymmetry"] = B.asymmetry
        diagnostics["iterations_dual"] = iteration_counts(dual)
        diagnostics["divergence_residual_dual"] = [divergence_residual(m, s) for s in dual]
        if report.A_gani is not None:
            diagnostics.update(gani_gap_summary(report.A_gani, report.B_gani_inv))
            diagnostics["duality_defect"] = float(np.linalg.norm(report.A_gani @ B.matrix - np.eye(g.d), 2))

    if "bounds" in wanted:
        pair = evaluate_bounds(material, primal, dual)
        report.apply_summary(bounds_summary(pair.A_upper, pair.B_bar))
        diagnostics["double_grid_spd_violations"] = pair.spd_violations
        if g.size <= settings.dense_oracle_max_points:
            first = min(primal, key=lambda s: s.direction).total_field()
            dense = full_matrix_bilinear(material, first, first, settings.dense_oracle_max_points)
            diagnostics["quadrature_oracle_defect"] = abs(dense - float(pair.A_upper[0, 0]))
        checks = report.sandwich_checks()
        diagnostics["sandwich"] = checks
        broken = [name for name, ok in checks.items() if not ok]
        if broken:
            logger.warning("N=%s: Loewner order violated for %s", g.N, ", ".join(broken))

    sols = (primal or []) + (dual or [])
    converged = all(s.converged for s in sols)
    diagnostics["converged"] = converged
    if not converged:
        report.status = "not_converged"


def run_grid(
    cfg: ExperimentConfig,
    material: Material,
    g: GridSpec,
    settings: Settings,
    config_hash: str = "",
    means: Tuple[Optional[np.ndarray], Optional[np.ndarray]] = (None, None),
) -> BoundsReport:
    """One grid of a sweep; failures are recorded in the report, never raised."""
    report = BoundsReport(name=cfg.name, grid=g.to_dict(), config_hash=config_hash)
    report.voigt, report.reuss = means
    logger.info("%s: grid N=%s (%s)", cfg.name, g.N, g.parity)
    try:
        _solve_grid(cfg, material, g, settings, report)
    except Exception as exc:
        logger.error("%s: grid N=%s failed: %s", cfg.name, g.N, exc)
        report.status = "failed"
        report.error = f"{type(exc).__name__}: {exc}"
    return report


def run_experiment(
    cfg: ExperimentConfig, settings: Optional[Settings] = None, jobs: int = 1
) -> List[BoundsReport]:
    """Sample, solve and bound on every grid; reports come back in grid order."""
    settings = settings or get_settings()
    material = build_material(cfg)
    config_hash = config_digest(cfg)
    means = voigt_reuss(material)
    grids = [GridSpec(tuple(cfg.cell), tuple(N)) for N in cfg.grids]

    def run(g: GridSpec) -> BoundsReport:
        return run_grid(cfg, material, g, settings, config_hash, means)

    workers = max(1, min(int(jobs), settings.threads, len(grids)))
    if workers < min(int(jobs), len(grids)):
        logger.info("%s: --jobs %d capped to %d by HOMOBOUND_THREADS", cfg.name, jobs, workers)
    if workers == 1:
        return [run(g) for g in grids]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, grids))


# --- reports -------------------------------------------------------------


def _grid_label(report: BoundsReport) -> str:
    return "x".join(str(n) for n in report.grid["N"])


def csv_columns(d: int) -> List[str]:
    columns = ["name", "N", "parity", "status"]
    for prefix in CSV_MATRICES:
        columns += [f"{prefix}_{a + 1}{b + 1}" for a in range(d) for b in range(d)]
    return columns + list(CSV_TRAILER)


def report_row(report: BoundsReport) -> Dict[str, Any]:
    d = len(report.grid["N"])
    row: Dict[str, Any] = {
        "name": report.name,
        "N": _grid_label(report),
        "parity": report.grid["parity"],
        "status": report.status,
    }
    for prefix in CSV_MATRICES:
        matrix = getattr(report, prefix)
        for a in range(d):
            for b in range(d):
                row[f"{prefix}_{a + 1}{b + 1}"] = np.nan if matrix is None else float(matrix[a, b])
    diag = report.diagnostics
    row["gap_min_eigenvalue"] = diag.get("gap_min_eigenvalue", np.nan)
    row["duality_defect"] = diag.get("duality_defect", np.nan)
    row["iterations_primal"] = sum(diag["iterations_primal"]) if "iterations_primal" in diag else np.nan
    row["iterations_dual"] = sum(diag["iterations_dual"]) if "iterations_dual" in diag else np.nan
    row["config_hash"] = report.config_hash
    row["error"] = report.error or ""
    return row


def reports_frame(reports: Sequence[BoundsReport]) -> pd.DataFrame:
    d = len(reports[0].grid["N"])
    frame = pd.DataFrame([report_row(r) for r in reports], columns=csv_columns(d))
    return frame


def _html(reports: Sequence[BoundsReport], title: str) -> str:
    env = Environment(loader=FileSystemLoader(str(TEMPLATE_DIR)), autoescape=select_autoescape(["html", "j2"]))
    env.filters["num"] = lambda x: "" if x is None else f"{x:.10g}"
    template = env.get_template("report.html.j2")
    return template.render(title=title, reports=[r.to_dict() for r in reports])


def emit_report(
    reports: Union[BoundsReport, Sequence[BoundsReport]],
    fmt: str,
    out_dir: Union[str, Path],
    stem: Optional[str] = None,
) -> Path:
    """Write a sweep as <stem>.json, <stem>.csv or <stem>.html and return the path."""
    if isinstance(reports, BoundsReport):
        reports = [reports]
    if not reports:
        raise ValueError("no reports to write")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = stem or reports[0].name
    path = out_dir / f"{stem}.{fmt}"
    if fmt == "json":
        with open(path, "w", encoding="utf-8") as f:
            json.dump({"reports": [r.to_dict() for r in reports]}, f, indent=2)
    elif fmt == "csv":
        reports_frame(reports).to_csv(path, index=False, float_format="%.17g")
    elif fmt == "html":
        path.write_text(_html(reports, stem), encoding="utf-8")
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    logger.info("wrote %s", path)
    return path


def emit_reports(
    reports: Sequence[BoundsReport], formats: Sequence[str], out_dir: Union[str, Path], stem: Optional[str] = None
) -> List[Path]:
    return [emit_report(reports, fmt, out_dir, stem) for fmt in expand_formats(list(formats))]


def load_reports(path: Union[str, Path]) -> List[BoundsReport]:
    with open(path, "r", encoding="utf-8") as f:
        data = json.load(f)
    return [BoundsReport.from_dict(item) for item in data["reports"]]
