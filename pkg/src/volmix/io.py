"""Return-series ingestion and run-artifact export."""
from __future__ import annotations

import csv
import json
import math
import os
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .diagnostics import SUMMARY_HEADER, SummaryRow, modal_k, summarize, gelman_rubin, DiagnosticsError

TRANSFORMS = ("none", "logret")
DENSITY_BINS = 30


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class ReturnSeries:
    values: np.ndarray
    source: str = ""
    transform: str = "none"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 10:
            raise DataError(f"a return series needs at least 10 values, got {v.size}")
        if not np.all(np.isfinite(v)):
            raise DataError("return series contains non-finite values")
        if np.ptp(v) == 0:
            raise DataError("return series is constant")
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.values.size


def log_returns_percent(prices) -> np.ndarray:
    """100 * log(p_t / p_{t-1})."""
    p = np.asarray(prices, dtype=float)
    if np.any(p <= 0):
        raise DataError("log returns need strictly positive prices")
    return 100.0 * np.diff(np.log(p))


def load_returns(path, column: str, transform: str = "logret") -> ReturnSeries:
    """Read ``column`` from a headed CSV and apply ``transform`` (``none`` or ``logret``)."""
    if transform not in TRANSFORMS:
        raise DataError(f"transform must be one of {TRANSFORMS}, got {transform!r}")
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or column not in reader.fieldnames:
            raise DataError(f"column {column!r} not found in {path} (have {reader.fieldnames})")
        raw = [row[column] for row in reader]
    values, bad = [], []
    for i, cell in enumerate(raw, start=2):  # line numbers, header is line 1
        try:
            v = float(cell)
        except (TypeError, ValueError):
            bad.append(f"line {i}: unparseable value {cell!r}")
            continue
        if not math.isfinite(v):
            bad.append(f"line {i}: non-finite value {cell!r}")
            continue
        values.append(v)
    if bad:
        raise DataError(f"{path}: {len(bad)} bad row(s):\n  " + "\n  ".join(bad))
    if transform == "logret":
        values = log_returns_percent(values)
    values = np.asarray(values, dtype=float)
    if values.size < 10:
        raise DataError(f"{path}: only {values.size} usable values, need at least 10")
    if np.ptp(values) == 0:
        raise DataError(f"{path}: series is constant")
    return ReturnSeries(values, str(path), "log-return-percent" if transform == "logret" else "none")


# ---------------------------------------------------------------- writing

def fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "NA"
    return repr(x)


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def trace_rows(result):
    """(chain, iteration, parameter, value) for every retained draw, summary order."""
    cfg = result.config
    iterations = list(cfg.retained())
    scalar_order = [n for n in ("k", "c", "phi", "sigma_eta", "deviance") if n in result.chains[0].scalars]
    for ch in result.chains:
        for j, it in enumerate(iterations):
            w, mu, s = ch.components[j]
            for name in scalar_order:
                yield ch.chain, it, name, ch.scalars[name][j]
            for i in range(w.size):
                yield ch.chain, it, f"mu[{i + 1}]", mu[i]
            for i in range(w.size):
                yield ch.chain, it, f"pi[{i + 1}]", w[i]
            for i in range(w.size):
                yield ch.chain, it, f"prec[{i + 1}]", s[i]


def density_rows(name: str, values, bins: int = DENSITY_BINS):
    values = np.asarray(values, dtype=float)
    dens, edges = np.histogram(values, bins=bins, density=True)
    for d, lo, hi in zip(dens, edges[:-1], edges[1:]):
        yield name, lo, hi, d


def pooled_values(result, name: str) -> np.ndarray:
    from .pipeline import component_chains
    comp = component_chains(result.chains, result.k_report)
    if name in comp:
        return np.concatenate(comp[name])
    return np.concatenate([c.scalars[name] for c in result.chains])


def export(result, out_dir) -> list[Path]:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create output directory {out}: {exc}") from exc
    if not os.access(out, os.W_OK):
        raise DataError(f"output directory {out} is not writable")
    written = []

    p = out / "summary.csv"
    write_csv(p, SUMMARY_HEADER, (r.as_list() for r in result.rows))
    written.append(p)

    p = out / "kposterior.csv"
    write_csv(p, ["k", "count", "probability"], result.kposterior)
    written.append(p)

    p = out / "trace.csv"
    write_csv(p, ["chain", "iteration", "parameter", "value"], trace_rows(result))
    written.append(p)

    p = out / "density.csv"
    rows = []
    for r in result.rows:
        rows.extend(density_rows(r.parameter, pooled_values(result, r.parameter)))
    write_csv(p, ["parameter", "bin_left", "bin_right", "density"], rows)
    written.append(p)

    if result.h_summary is not None:
        p = out / "hsummary.csv"
        write_csv(p, ["t", "mean", "q2.5", "q50", "q97.5"],
                  ([t, *row] for t, row in enumerate(result.h_summary)))
        written.append(p)

    p = out / "runlog.txt"
    p.write_text(runlog_text(result), encoding="utf-8")
    written.append(p)
    return written


def runlog_text(result) -> str:
    cfg = result.config
    lines = ["# configuration", *cfg.echo(), "", "# data", f"observations = {result.n_obs}", ""]
    if result.stage1_modal_k is not None:
        lines += ["# stage 1 (birth-death initialisation)", f"modal k = {result.stage1_modal_k}"]
        for ch in result.chains:
            counts = defaultdict(int)
            for k in ch.stage1_k[cfg.burnin:]:
                counts[k] += 1
            freq = ", ".join(f"{k}:{counts[k]}" for k in sorted(counts))
            lines.append(f"chain {ch.chain}: k frequencies {freq}")
        lines.append("")
    lines.append("# birth-death activity")
    for ch in result.chains:
        log = ch.bd_log
        lines.append(f"chain {ch.chain}: births={log.births} deaths={log.deaths} "
                     f"jumps={log.jumps} truncated={log.truncated}")
    lines += ["", "# Metropolis acceptance rates"]
    for ch in result.chains:
        st = ch.stats
        lines.append(f"chain {ch.chain}: h={fmt(st.h_rate)} phi={fmt(st.phi_rate)} "
                     f"level={fmt(st.level_rate)} phi_skipped={st.phi_skipped}")
    lines += ["", "# warnings", *(result.warnings or ["none"]), ""]
    return "\n".join(lines)


# --------------------------------------------------------- trace reading

def read_trace(path) -> dict:
    """Parse a long-format trace.csv into {chain: {iteration: {parameter: value}}}."""
    out: dict = defaultdict(lambda: defaultdict(dict))
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        need = {"chain", "iteration", "parameter", "value"}
        if reader.fieldnames is None or not need <= set(reader.fieldnames):
            raise DataError(f"{path}: expected columns {sorted(need)}")
        for row in reader:
            out[int(row["chain"])][int(row["iteration"])][row["parameter"]] = float(row["value"])
    return out


def summarize_trace(path, split: bool = False) -> list[SummaryRow]:
    """Recompute the summary table from a trace.csv written by :func:`export`."""
    from .pipeline import parameter_order

    trace = read_trace(path)
    chains = [trace[c] for c in sorted(trace)]
    any_draw = next(iter(chains[0].values()))
    model = "sv" if "c" in any_draw else "mixture"
    all_k = [int(d["k"]) for ch in chains for d in ch.values()]
    k = modal_k(all_k)
    rows = []
    for name in parameter_order(model, k):
        per_chain = []
        for ch in chains:
            per_chain.append(np.array([d[name] for it, d in sorted(ch.items())
                                       if int(d["k"]) == k and name in d]))
        pooled = np.concatenate(per_chain)
        if pooled.size == 0:
            continue
        rhat = float("nan")
        n = min(len(c) for c in per_chain)
        if len(per_chain) >= 2 and n >= 2:
            try:
                rhat = gelman_rubin(np.array([c[:n] for c in per_chain]), split=split)
            except DiagnosticsError:
                pass
        rows.append(summarize(pooled, rhat, name))
    return rows


def write_simulation(out_dir, y, h=None, eps=None, meta: dict | None = None) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cols = {"y": y}
    if h is not None:
        cols["h"] = h
    if eps is not None:
        cols["eps"] = eps
    p = out / "data.csv"
    n = len(y)
    write_csv(p, ["t", *cols], ([t + 1, *(cols[c][t] for c in cols)] for t in range(n)))
    m = out / "data.meta.json"
    m.write_text(json.dumps(meta or {}, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return [p, m]
