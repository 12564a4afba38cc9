"""Monte Carlo experiments: convergence traces, sum-rate sweeps and plot data.

Every CSV starts with ``#`` manifest lines (tool version, config digest,
seed and the full config as JSON), so ``load_config`` on a result file
recovers the exact run. Rows are sorted before writing; sequential and
process-parallel runs give identical files. Wall times go to a separate
JSON sidecar because they can never be reproduced.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .bcd import alphabets_for, run_bcd
from .channel import draw_channels, trial_rng
from .config import BenchmarkScheme, SystemConfig

__all__ = [
    "ExperimentRecord",
    "HarnessError",
    "run_trial",
    "run_convergence_experiment",
    "run_sumrate_sweep",
    "emit_plot_data",
    "read_result_csv",
]

log = logging.getLogger(__name__)

CONVERGENCE_COLUMNS = ["row", "trial", "iteration", "sum_mse", "sum_rate", "converged"]
SWEEP_COLUMNS = ["P_dbm", "scheme", "trials", "mean_sum_rate", "stderr_sum_rate", "mean_sum_mse",
                 "mean_iterations", "converged_fraction", "exhausted_fraction"]
TRIAL_COLUMNS = ["P_dbm", "scheme", "trial", "iterations", "converged", "sum_mse", "sum_rate",
                 "sesd_solves", "sesd_exhausted", "anomalies"]
FIG2_COLUMNS = ["series", "x", "y"]
FIG3_COLUMNS = ["series", "x", "y", "yerr"]


class HarnessError(RuntimeError):
    pass


@dataclass
class ExperimentRecord:
    trial: int
    scheme: str
    P_dbm: float
    iterations: int
    converged: bool
    sum_mse: float
    sum_rate: float
    sesd_solves: int
    sesd_exhausted: int
    anomalies: int
    wall_time: float
    state: dict | None = None


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _manifest(config: SystemConfig, kind: str, extra: dict | None = None) -> list[str]:
    lines = [
        f"# rismse {__version__}",
        f"# kind: {kind}",
        f"# config_hash: {config.digest()}",
        f"# seed: {config.seed}",
    ]
    for k, v in (extra or {}).items():
        lines.append(f"# {k}: {v}")
    lines.append(f"# config: {config.canonical_json()}")
    return lines


def _write_csv(path: Path, manifest: list[str], columns: list[str], rows) -> None:
    buf = io.StringIO()
    for line in manifest:
        buf.write(line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(buf.getvalue(), encoding="utf-8", newline="")
    except OSError as exc:
        raise HarnessError(f"cannot write {path}: {exc}") from exc


def _sesd_counts(state) -> tuple[int, int]:
    solves = exhausted = 0
    for rec in state.trace[1:]:
        for key, used in (("precoding_exhausted", BenchmarkScheme(state.scheme).sesd_precoding),
                          ("ris_exhausted", BenchmarkScheme(state.scheme).sesd_ris)):
            if used:
                solves += 1
                exhausted += bool(rec[key])
    return solves, exhausted


def run_trial(config: SystemConfig, trial: int, schemes, powers_dbm, keep_state: bool = False):
    """Run every (power, scheme) pair on one channel drop.

    The trial stream draws the channel first and the initial RIS
    configuration second, so every scheme and power level starts from the
    same point.
    """
    rng = trial_rng(config.seed, trial)
    channels = draw_channels(config, rng)
    _, pa = alphabets_for(config)
    theta0 = pa.coefficients[rng.integers(0, pa.size, size=channels.N)]
    out = []
    for p in powers_dbm:
        cfg = config.replace(P_dbm=float(p))
        alph = alphabets_for(cfg)
        for s in schemes:
            t0 = time.perf_counter()
            st = run_bcd(cfg, channels, s, theta0=theta0, alphabets=alph)
            solves, exh = _sesd_counts(st)
            out.append(ExperimentRecord(
                trial=trial, scheme=st.scheme, P_dbm=float(p), iterations=st.iteration,
                converged=st.converged, sum_mse=st.sum_mse, sum_rate=st.sum_rate,
                sesd_solves=solves, sesd_exhausted=exh, anomalies=len(st.anomalies),
                wall_time=time.perf_counter() - t0, state=st.to_dict() if keep_state else None,
            ))
    return out


def _trial_job(args):
    cfg_json, trial, schemes, powers, keep_state = args
    cfg = SystemConfig.from_dict(json.loads(cfg_json))
    return run_trial(cfg, trial, schemes, powers, keep_state)


def _run_all(config, schemes, powers, threads, keep_state):
    jobs = [(config.canonical_json(), t, [s.value for s in schemes], list(powers), keep_state)
            for t in range(config.trials)]
    if threads and threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            chunks = list(ex.map(_trial_job, jobs))
    else:
        chunks = [_trial_job(j) for j in jobs]
    records = [r for c in chunks for r in c]
    order = {s: i for i, s in enumerate(BenchmarkScheme)}
    records.sort(key=lambda r: (r.P_dbm, order[BenchmarkScheme(r.scheme)], r.trial))
    return records


def _write_timing(path: Path, records) -> None:
    data = [{"trial": r.trial, "scheme": r.scheme, "P_dbm": r.P_dbm, "wall_time": r.wall_time} for r in records]
    path.write_text(json.dumps(data, indent=1) + "\n", encoding="utf-8")


def run_convergence_experiment(config: SystemConfig, out_dir, scheme=BenchmarkScheme.SesdBoth,
                               threads: int = 1) -> Path:
    """Per-iteration sum-MSE traces at ``config.P_dbm``.

    Writes ``convergence.csv`` with a ``trace`` row per completed iteration
    and a ``summary`` row per trial (iterations run, final values, converged
    flag), ``convergence_states.jsonl`` with the full solver states, and
    ``convergence_timing.json``.
    """
    out_dir = Path(out_dir)
    scheme = BenchmarkScheme.parse(scheme) if isinstance(scheme, str) else scheme
    records = _run_all(config, [scheme], [config.P_dbm], threads, keep_state=True)
    rows = []
    for r in records:
        for rec in r.state["trace"][1:]:
            rows.append(["trace", r.trial, rec["iteration"], rec["sum_mse"], rec["sum_rate"], ""])
        rows.append(["summary", r.trial, r.iterations, r.sum_mse, r.sum_rate, r.converged])
    path = out_dir / "convergence.csv"
    _write_csv(path, _manifest(config, "convergence", {"scheme": scheme.value}), CONVERGENCE_COLUMNS, rows)
    with open(out_dir / "convergence_states.jsonl", "w", encoding="utf-8", newline="\n") as fh:
        for r in records:
            fh.write(json.dumps({"trial": r.trial, **r.state}, sort_keys=True) + "\n")
    _write_timing(out_dir / "convergence_timing.json", records)
    return path


def _stderr(values) -> float:
    if len(values) < 2:
        return 0.0
    return statistics.stdev(values) / np.sqrt(len(values))


def run_sumrate_sweep(config: SystemConfig, out_dir, threads: int = 1) -> Path:
    """Mean sum rate per (power, scheme) over ``config.trials`` drops.

    Writes the aggregate ``sweep.csv``, the per-run ``sweep_trials.csv`` and
    ``sweep_timing.json``. ``exhausted_fraction`` is the share of SESD block
    solves that finished within the node budget (empty for ``NoSesd``).
    """
    if not config.power_sweep_dbm:
        raise HarnessError("power sweep is empty")
    out_dir = Path(out_dir)
    records = _run_all(config, config.schemes, config.power_sweep_dbm, threads, keep_state=False)
    groups: dict[tuple, list[ExperimentRecord]] = {}
    for r in records:
        groups.setdefault((r.P_dbm, r.scheme), []).append(r)
    rows = []
    for (p, s), rs in groups.items():
        rates = [r.sum_rate for r in rs]
        solves = sum(r.sesd_solves for r in rs)
        rows.append([
            p, s, len(rs), float(np.mean(rates)), float(_stderr(rates)),
            float(np.mean([r.sum_mse for r in rs])), float(np.mean([r.iterations for r in rs])),
            float(np.mean([r.converged for r in rs])),
            float(sum(r.sesd_exhausted for r in rs) / solves) if solves else "",
        ])
    man = _manifest(config, "sweep")
    path = out_dir / "sweep.csv"
    _write_csv(path, man, SWEEP_COLUMNS, rows)
    _write_csv(out_dir / "sweep_trials.csv", _manifest(config, "sweep_trials"), TRIAL_COLUMNS, [
        [r.P_dbm, r.scheme, r.trial, r.iterations, r.converged, r.sum_mse, r.sum_rate,
         r.sesd_solves, r.sesd_exhausted, r.anomalies] for r in records
    ])
    _write_timing(out_dir / "sweep_timing.json", records)
    return path


def read_result_csv(path) -> tuple[list[str], list[dict]]:
    """Split a result file into its manifest lines and data rows."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise HarnessError(f"cannot read {path}: {exc}") from exc
    lines = text.splitlines()
    manifest = []
    while lines and lines[0].startswith("#"):
        manifest.append(lines.pop(0))
    if not lines:
        raise HarnessError(f"{path}: missing header row")
    reader = csv.DictReader(lines)
    rows = list(reader)
    for i, row in enumerate(rows):
        if None in row or any(v is None for v in row.values()):
            raise HarnessError(f"{path}: row {i + 1} does not match the header")
    return manifest, rows


def _kind(manifest, header) -> str:
    for line in manifest:
        if line.startswith("# kind: "):
            return line[len("# kind: "):].strip()
    if set(CONVERGENCE_COLUMNS) <= set(header):
        return "convergence"
    if {"P_dbm", "scheme", "mean_sum_rate"} <= set(header):
        return "sweep"
    raise HarnessError("cannot tell which experiment produced this file")


def _fig2_rows(rows):
    traces: dict[int, list[tuple[int, float]]] = {}
    for r in rows:
        if r["row"] == "trace":
            traces.setdefault(int(r["trial"]), []).append((int(r["iteration"]), float(r["sum_mse"])))
    out = []
    for t in sorted(traces):
        for it, v in sorted(traces[t]):
            out.append([f"trial_{t}", it, v])
    if traces:
        # trials that stopped early hold their final value
        last = max(it for tr in traces.values() for it, _ in tr)
        series = {t: dict(tr) for t, tr in traces.items()}
        held = {t: None for t in series}
        for it in range(1, last + 1):
            vals = []
            for t, s in series.items():
                if it in s:
                    held[t] = s[it]
                if held[t] is not None:
                    vals.append(held[t])
            out.append(["median", it, float(np.median(vals))])
    return out


def _fig3_rows(rows):
    order = {s.value: i for i, s in enumerate(BenchmarkScheme)}
    recs = sorted(rows, key=lambda r: (order.get(r["scheme"], len(order)), r["scheme"], float(r["P_dbm"])))
    return [[r["scheme"], float(r["P_dbm"]), float(r["mean_sum_rate"]), float(r["stderr_sum_rate"])] for r in recs]


def emit_plot_data(results_csv, out_dir=None) -> list[Path]:
    """Turn a result CSV into ``series,x,y`` files ready for any plotting tool.

    Convergence results give ``fig2.csv`` (one series per trial plus the
    per-iteration median); sweep results give ``fig3.csv`` (one series per
    scheme, power ascending, with standard errors).
    """
    results_csv = Path(results_csv)
    out_dir = results_csv.parent if out_dir is None else Path(out_dir)
    manifest, rows = read_result_csv(results_csv)
    with open(results_csv, encoding="utf-8") as fh:
        header = next(csv.reader(line for line in fh if not line.startswith("#")), [])
    kind = _kind(manifest, header)
    man = [m for m in manifest if not m.startswith("# kind: ")] + [f"# source: {results_csv.name}"]
    try:
        if kind == "convergence":
            path = out_dir / "fig2.csv"
            _write_csv(path, man + ["# kind: fig2"], FIG2_COLUMNS, _fig2_rows(rows))
        elif kind == "sweep":
            path = out_dir / "fig3.csv"
            _write_csv(path, man + ["# kind: fig3"], FIG3_COLUMNS, _fig3_rows(rows))
        else:
            raise HarnessError(f"no plot data defined for {kind!r} results")
    except (KeyError, ValueError) as exc:
        raise HarnessError(f"malformed results in {results_csv}: {exc}") from exc
    return [path]

