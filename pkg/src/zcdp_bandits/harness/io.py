"""CSV and manifest persistence with exact float round trips."""

from __future__ import annotations

import csv
import hashlib
import io
import json
from pathlib import Path

import numpy as np

from .. import __version__
from ..core import COMPONENTS, RegretTrace
from .config import ExperimentConfig
from .runner import Summary, private_algos

__all__ = [
    "SUMMARY_HEADER",
    "TRACE_HEADER",
    "config_hash",
    "format_float",
    "read_summary",
    "read_traces",
    "summary_filename",
    "write_outputs",
]

TRACE_HEADER = ["setting", "algo", "rho", "run", "t", "regret"]
SUMMARY_HEADER = ["setting", "rho", "t", "mean_priv", "std_priv", "mean_nonpriv", "std_nonpriv", "gap", "pop"]


def format_float(x: float) -> str:
    return format(float(x), ".17g")


def config_hash(config: ExperimentConfig) -> str:
    return hashlib.sha256(config.canonical_json().encode()).hexdigest()


def summary_filename(algo: str, primary: bool) -> str:
    """``summary.csv`` for the first private variant, ``summary-<algo>.csv`` for others."""
    return "summary.csv" if primary else f"summary-{algo}.csv"


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _write(path: Path, text: str) -> str:
    path.write_text(text, encoding="utf-8")
    return hashlib.sha256(text.encode()).hexdigest()


def _summary_rows(s: Summary):
    for i in range(len(s)):
        yield [s.setting, format_float(s.rho[i]), str(int(s.t[i])), *(format_float(getattr(s, f)[i])
                                                                     for f in Summary.FIELDS[2:])]


def write_outputs(traces: list, summary: Summary, directory, config: ExperimentConfig = None,
                  setting: str = None) -> dict:
    """Write ``traces.csv``, the summary CSV(s) and ``manifest.json``; returns the manifest.

    Files are overwritten. Output bytes depend only on the inputs (no
    timestamps), so identical runs give identical files.
    """
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    setting = setting or (config.setting if config is not None else summary.setting)
    trace_rows = ([setting, tr.algo, format_float(tr.rho), str(tr.run_seed), str(int(t)), format_float(r)]
                  for tr in traces for t, r in zip(tr.t, tr.regret))
    files = {"traces.csv": _write(out / "traces.csv", _csv_text(TRACE_HEADER, trace_rows))}

    algos = private_algos(config) if config is not None else []
    for a in summary.algo:
        if a not in algos:
            algos.append(a)
    if not algos:
        algos = [None]
    for k, algo in enumerate(algos):
        part = summary.select(algo) if algo is not None else summary
        name = summary_filename(algo, k == 0)
        files[name] = _write(out / name, _csv_text(SUMMARY_HEADER, _summary_rows(part)))

    manifest = {
        "package_version": __version__,
        "setting": setting,
        "config": config.to_dict() if config is not None else None,
        "config_hash": config_hash(config) if config is not None else None,
        "base_seed": config.base_seed if config is not None else None,
        "seeds": {
            "scheme": "numpy Philox, SeedSequence(base_seed, spawn_key=(run, component))",
            "components": dict(COMPONENTS),
            "runs": sorted({int(tr.run_seed) for tr in traces}),
        },
        "summaries": {a if a is not None else "": summary_filename(a, k == 0) for k, a in enumerate(algos)},
        "files": files,
    }
    text = json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    (out / "manifest.json").write_text(text, encoding="utf-8")
    return manifest


def read_traces(path) -> list:
    """Parse ``traces.csv`` back into one RegretTrace per (algo, rho, run)."""
    groups = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != TRACE_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        for setting, algo, rho, run, t, r in reader:
            key = (algo, float(rho), int(run))
            groups.setdefault(key, ([], []))
            groups[key][0].append(int(t))
            groups[key][1].append(float(r))
    return [RegretTrace(np.array(t), np.array(r), run_seed=run, algo=algo, rho=rho)
            for (algo, rho, run), (t, r) in groups.items()]


def read_summary(path, algo: str = "") -> Summary:
    """Parse a summary CSV; ``algo`` labels its rows (the file has no algo column)."""
    cols = {f: [] for f in Summary.FIELDS}
    setting = ""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != SUMMARY_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        for row in reader:
            setting = row[0]
            for f, v in zip(Summary.FIELDS, row[1:]):
                cols[f].append(float(v))
    arrays = {f: np.asarray(v, dtype=float) for f, v in cols.items()}
    arrays["t"] = arrays["t"].astype(np.int64)
    n = arrays["t"].size
    return Summary(setting, [algo] * n, **arrays)
