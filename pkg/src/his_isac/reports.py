"""CSV and JSON artifacts of a solved scenario or sweep.

sweep.csv has one row per grid point with the columns listed by
sweep_columns(); every SINR appears in dB. summary.json repeats the results
with linear values, the full per-point configs, the convergence traces (without
wall times) and the package versions. Beampattern cuts go to one
(psi_deg, power_db) CSV each.
"""

import json
import logging
import math
from collections.abc import Iterable
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import Any

import pandas as pd

from his_isac.errors import ReportError
from his_isac.sweep import PointResult, ReportBundle, RunSummary
from his_isac.utils import linear_to_db

logger = logging.getLogger(__name__)

SWEEP_CSV = "sweep.csv"
SUMMARY_JSON = "summary.json"
SUMMARY_SCHEMA_VERSION = 1

REPORTED_PACKAGES = ["his-isac", "numpy", "scipy", "cvxopt", "pandas", "PyYAML"]

SUPPORTED_FORMATS = ("csv", "json")


def _counts(bundle: ReportBundle) -> tuple[int, int]:
    configs = [bundle.config] + [p.config for p in bundle.points]
    return max(len(c.users) for c in configs), max(len(c.targets) for c in configs)


def _array_columns(prefix: str, K: int, M: int) -> list[str]:
    return (
        [
            f"{prefix}_status",
            f"{prefix}_dimension",
            f"{prefix}_min_sense_sinr_db",
        ]
        + [f"{prefix}_sense_sinr_db_target{l + 1}" for l in range(M)]
        + [f"{prefix}_comm_sinr_db_user{k + 1}" for k in range(K)]
        + [f"{prefix}_iterations", f"{prefix}_sdp_calls"]
    )


def sweep_columns(K: int, M: int, include_baseline: bool) -> list[str]:
    """Header of sweep.csv for K users and M targets."""
    columns = ["index", "variable", "value", "error"] + _array_columns("his", K, M)
    if include_baseline:
        columns += _array_columns("discrete", K, M)
        columns += (
            ["gain_min_sense_sinr_db"]
            + [f"gain_comm_sinr_db_user{k + 1}" for k in range(K)]
            + ["gain_tx_peak_db"]
            + [f"gain_rx_peak_db_target{l + 1}" for l in range(M)]
        )
    return columns


def _db_values(prefix: str, values: Iterable[float]) -> dict[str, float]:
    return {f"{prefix}{i + 1}": linear_to_db(v) for i, v in enumerate(values)}


def _array_row(prefix: str, summary: RunSummary | None) -> dict[str, Any]:
    if summary is None:
        return {}
    row = {
        f"{prefix}_status": summary.status.value,
        f"{prefix}_dimension": summary.dimension,
        f"{prefix}_min_sense_sinr_db": linear_to_db(summary.min_sense_sinr),
        f"{prefix}_iterations": len(summary.trace),
        f"{prefix}_sdp_calls": summary.sdp_calls,
    }
    row.update(_db_values(f"{prefix}_sense_sinr_db_target", summary.sense_sinrs))
    row.update(_db_values(f"{prefix}_comm_sinr_db_user", summary.comm_sinrs))
    return row


def _row(bundle: ReportBundle, point: PointResult) -> dict[str, Any]:
    row: dict[str, Any] = {
        "index": point.index,
        "variable": bundle.sweep.variable.value if bundle.sweep else "",
        "value": point.value,
        "error": point.error or "",
    }
    row.update(_array_row("his", point.his))
    row.update(_array_row("discrete", point.discrete))
    if point.gains is not None:
        row["gain_min_sense_sinr_db"] = point.gains.min_sense_sinr_db
        row["gain_tx_peak_db"] = point.gains.tx_peak_db
        for k, gain in enumerate(point.gains.comm_sinr_db):
            row[f"gain_comm_sinr_db_user{k + 1}"] = gain
        for l, gain in enumerate(point.gains.rx_peak_db):
            row[f"gain_rx_peak_db_target{l + 1}"] = gain
    return row


def sweep_table(bundle: ReportBundle) -> pd.DataFrame:
    K, M = _counts(bundle)
    columns = sweep_columns(K, M, bundle.include_baseline)
    return pd.DataFrame([_row(bundle, p) for p in bundle.points], columns=columns)


def _finite(value: float) -> float | None:
    return value if math.isfinite(value) else None


def _summary_json(summary: RunSummary | None) -> dict[str, Any] | None:
    if summary is None:
        return None
    return {
        "array": summary.array.value,
        "dimension": summary.dimension,
        "status": summary.status.value,
        "gamma_r_star": summary.gamma_r_star,
        "sense_sinrs": list(summary.sense_sinrs),
        "comm_sinrs": list(summary.comm_sinrs),
        "trace": [
            {
                "iteration": r.iteration,
                "gamma_r_star": r.gamma_r_star,
                "sdp_calls": r.sdp_calls,
                "abs_calls": r.abs_calls,
                "bisection_calls": r.bisection_calls,
                "min_comm_sinr": r.min_comm_sinr,
            }
            for r in summary.trace
        ],
    }


def _point_json(point: PointResult) -> dict[str, Any]:
    gains = None
    if point.gains is not None:
        gains = {
            "min_sense_sinr_db": _finite(point.gains.min_sense_sinr_db),
            "comm_sinr_db": [_finite(g) for g in point.gains.comm_sinr_db],
            "tx_peak_db": _finite(point.gains.tx_peak_db),
            "rx_peak_db": [_finite(g) for g in point.gains.rx_peak_db],
        }
    return {
        "index": point.index,
        "value": point.value,
        "error": point.error,
        "config": point.config.to_dict(),
        "his": _summary_json(point.his),
        "discrete": _summary_json(point.discrete),
        "gains": gains,
    }


def package_versions() -> dict[str, str]:
    versions = {}
    for package in REPORTED_PACKAGES:
        try:
            versions[package] = version(package)
        except PackageNotFoundError:
            versions[package] = "not available"
    return versions


def summary_document(bundle: ReportBundle) -> dict[str, Any]:
    solver = bundle.config.solver
    sweep = None
    if bundle.sweep is not None:
        sweep = {
            "variable": bundle.sweep.variable.value,
            "grid": list(bundle.sweep.grid),
            "overrides": [dict(o) for o in bundle.sweep.overrides],
        }
    K, M = _counts(bundle)
    return {
        "schema_version": SUMMARY_SCHEMA_VERSION,
        "versions": package_versions(),
        "seed": bundle.config.seed,
        "tolerances": {
            "eps1": solver.eps1,
            "eps2": solver.eps2,
            "sdp_tol": solver.tol,
            "sdp_max_iter": solver.max_iter,
            "max_iters": solver.max_iters,
            "gallop_after": solver.gallop_after,
        },
        "config": bundle.config.to_dict(),
        "sweep": sweep,
        "include_baseline": bundle.include_baseline,
        "columns": sweep_columns(K, M, bundle.include_baseline),
        "points": [_point_json(p) for p in bundle.points],
        "beampatterns": sorted(bundle.cuts),
        "failed_points": [p.index for p in bundle.failed],
    }


def _write(path: Path, write) -> Path:
    try:
        write(path)
    except OSError as e:
        raise ReportError(str(path), e.strerror or str(e)) from e
    logger.debug(f"Wrote {path}")
    return path


def _ensure_dir(out_dir: str | Path) -> Path:
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ReportError(str(out_dir), e.strerror or str(e)) from e
    return out_dir


def write_cuts(bundle: ReportBundle, out_dir: str | Path) -> list[Path]:
    """Writes one (psi_deg, power_db) CSV per beampattern cut, sorted by name."""
    out_dir = _ensure_dir(out_dir)
    written = []
    for name in sorted(bundle.cuts):
        cut = pd.DataFrame(list(bundle.cuts[name]), columns=["psi_deg", "power_db"])
        written.append(
            _write(out_dir / f"{name}.csv", lambda p, df=cut: df.to_csv(p, index=False))
        )
    return written


def emit_reports(
    bundle: ReportBundle,
    out_dir: str | Path,
    formats: Iterable[str] = SUPPORTED_FORMATS,
) -> list[Path]:
    """
    Writes the bundle's artifacts into out_dir (created if missing).

    Args:
        bundle: Solved scenario or sweep.
        out_dir: Target directory.
        formats: Any of "csv" (sweep.csv and the beampattern cuts) and "json"
            (summary.json).

    Returns:
        The written paths in a fixed order.

    Raises:
        ReportError: If a file cannot be written.
    """
    formats = list(formats)
    for fmt in formats:
        if fmt not in SUPPORTED_FORMATS:
            raise ValueError(f"format {fmt!r} not in {list(SUPPORTED_FORMATS)}")
    out_dir = _ensure_dir(out_dir)

    written = []
    if "csv" in formats:
        table = sweep_table(bundle)
        written.append(_write(out_dir / SWEEP_CSV, lambda p: table.to_csv(p, index=False)))
        written += write_cuts(bundle, out_dir)
    if "json" in formats:
        text = json.dumps(summary_document(bundle), indent=2) + "\n"
        written.append(
            _write(out_dir / SUMMARY_JSON, lambda p: p.write_text(text, encoding="utf-8"))
        )
    logger.info(f"Wrote {len(written)} report file(s) to {out_dir}")
    return written
