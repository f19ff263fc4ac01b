"""Audit report assembly and serialization.

A report carries everything needed to interpret a score and to re-run
the audit bit-identically on the same platform: resolved configuration,
dataset fingerprint, per-repetition scores, aggregates, and flags.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np

from . import __version__
from .tabular import Table

FORMAT_VERSION = 1
TOOL_NAME = "synthaudit"


def file_fingerprint(path) -> str:
    """64-bit content hash of a file with line endings canonicalized, so
    the same table produced on another OS fingerprints identically."""
    with open(path, "rb") as fh:
        data = fh.read()
    return hashlib.blake2b(data.replace(b"\r\n", b"\n"), digest_size=8).hexdigest()


def dataset_block(path, table: Table) -> dict:
    return {
        "path": str(path),
        "rows": table.n_rows,
        "columns": len(table.schema.columns),
        "content_hash": file_fingerprint(path),
    }


def build_report(*, metric: str, generator: dict, dataset: dict, config: dict,
                 scores, p_value=None, significant=None, records_used=None,
                 seeds=(), flags=None, wall_seconds: float = 0.0,
                 details=None) -> dict:
    scores = [float(s) for s in scores]
    return {
        "format_version": FORMAT_VERSION,
        "tool": {"name": TOOL_NAME, "version": __version__},
        "metric": metric,
        "generator": generator,
        "dataset": dataset,
        "config": config,
        "scores": scores,
        "mean": float(np.mean(scores)),
        "std": float(np.std(scores)),
        "p_value": None if p_value is None else float(p_value),
        "significant": significant,
        "records_used": records_used,
        "seeds": [int(s) for s in seeds],
        "flags": flags or {},
        "wall_seconds": float(wall_seconds),
        "details": details or {},
    }


def write_report(report: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_report(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        report = json.load(fh)
    if not isinstance(report, dict) or "format_version" not in report:
        raise ValueError(f"{path} is not an audit report")
    if report["format_version"] != FORMAT_VERSION:
        raise ValueError(
            f"{path} has format_version {report['format_version']}, "
            f"expected {FORMAT_VERSION}")
    return report


def summary_line(report: dict) -> str:
    parts = [f"{report['metric']} mean={report['mean']:.4f} std={report['std']:.4f}"]
    if report["p_value"] is not None:
        parts.append(f"p={report['p_value']:.3g}")
        parts.append(f"significant={report['significant']}")
    if report["records_used"] is not None:
        parts.append(f"records_used={report['records_used']}")
    return " ".join(parts)
