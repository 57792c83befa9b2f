"""Command line entry point: ``volmix fit | simulate | summarize``."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from .diagnostics import SUMMARY_HEADER
from .io import DataError, export, fmt, load_returns, summarize_trace, write_csv, write_simulation
from .kernels import RngStream
from .mixture import MixtureState
from .pipeline import ConfigError, RunConfig, fit
from .sv import sample_mixture, simulate_sv

log = logging.getLogger("volmix")

# flag name -> (RunConfig field, parser)
_FIT_KEYS = {
    "chains": ("chains", int),
    "iters": ("iterations", int),
    "burnin": ("burnin", int),
    "thin": ("thin", int),
    "seed": ("seed", int),
    "kmax": ("kmax", int),
    "lambda": ("lam", float),
    "lambda_b": ("lambda_b", float),
    "virtual_time": ("virtual_time", float),
    "mode": ("mode", str),
    "fixed_k": ("fixed_k", int),
    "k_init": ("k_init", int),
    "model": ("model", str),
    "h_sweeps": ("h_sweeps", int),
    "workers": ("workers", int),
    "max_jumps": ("max_jumps", int),
    "init_weights": ("init_weights", None),
    "init_means": ("init_means", None),
    "init_variances": ("init_variances", None),
}
_FIT_FLAGS = ("standard_innovations", "save_h", "split_rhat", "level_shift")
_DATA_KEYS = ("data", "column", "transform", "out")


def _floats(text: str) -> tuple:
    return tuple(float(v) for v in str(text).split(",") if v.strip())


def _bool(text: str) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def read_config_file(path) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment; keys may use - or _."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _coerce(key: str, value):
    if key in _FIT_KEYS:
        _, conv = _FIT_KEYS[key]
        if conv is None:
            return value if isinstance(value, tuple) else _floats(value)
        return conv(value)
    if key in _FIT_FLAGS:
        return value if isinstance(value, bool) else _bool(value)
    if key in _DATA_KEYS:
        return str(value)
    raise ConfigError(f"unknown configuration key {key!r}")


def build_fit_settings(args: argparse.Namespace) -> tuple[RunConfig, dict]:
    settings = {}
    if args.config:
        for key, value in read_config_file(args.config).items():
            settings[key] = _coerce(key, value)
    for key in (*_FIT_KEYS, *_FIT_FLAGS, *_DATA_KEYS):
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = _coerce(key, value)
    kwargs = {}
    for key, value in settings.items():
        if key in _FIT_KEYS:
            kwargs[_FIT_KEYS[key][0]] = value
        elif key in _FIT_FLAGS:
            kwargs[key] = value
    data = {k: settings.get(k) for k in _DATA_KEYS}
    return RunConfig(**kwargs), data


def _add_fit_parser(sub):
    p = sub.add_parser("fit", help="fit the mixture stochastic volatility model")
    p.add_argument("--config", help="flat key = value file; flags override it")
    p.add_argument("--data", help="CSV file with a header row")
    p.add_argument("--column", help="column holding prices or returns")
    p.add_argument("--transform", choices=("none", "logret"),
                   help="logret: 100 * log price ratio (default); none: column already holds returns")
    p.add_argument("--chains", type=int)
    p.add_argument("--iters", type=int)
    p.add_argument("--burnin", type=int)
    p.add_argument("--thin", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--kmax", type=int)
    p.add_argument("--lambda", dest="lambda", type=float, help="truncated Poisson rate")
    p.add_argument("--lambda-b", dest="lambda_b", type=float, help="birth rate")
    p.add_argument("--virtual-time", dest="virtual_time", type=float)
    p.add_argument("--mode", choices=("bd-init", "full-bd"))
    p.add_argument("--fixed-k", dest="fixed_k", type=int)
    p.add_argument("--k-init", dest="k_init", type=int)
    p.add_argument("--model", choices=("sv", "mixture"))
    p.add_argument("--h-sweeps", dest="h_sweeps", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--max-jumps", dest="max_jumps", type=int)
    p.add_argument("--init-weights", dest="init_weights")
    p.add_argument("--init-means", dest="init_means")
    p.add_argument("--init-variances", dest="init_variances")
    p.add_argument("--standard-innovations", dest="standard_innovations", action="store_const", const=True)
    p.add_argument("--save-h", dest="save_h", action="store_const", const=True)
    p.add_argument("--split-rhat", dest="split_rhat", action="store_const", const=True)
    p.add_argument("--no-level-shift", dest="level_shift", action="store_const", const=False,
                   help="disable the joint (c, h) level move")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_fit)


def cmd_fit(args) -> int:
    cfg, data = build_fit_settings(args)
    if not data["data"] or not data["column"] or not data["out"]:
        raise ConfigError("fit needs --data, --column and --out (flags or config file)")
    series = load_returns(data["data"], data["column"], data["transform"] or "logret")
    result = fit(cfg, series)
    for path in export(result, data["out"]):
        print(path)
    return 0


def _add_simulate_parser(sub):
    p = sub.add_parser("simulate", help="write synthetic returns")
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--c", type=float, default=-0.2)
    p.add_argument("--phi", type=float, default=0.95)
    p.add_argument("--sigma-eta", dest="sigma_eta", type=float, default=0.15)
    p.add_argument("--weights", default="1", help="comma-separated mixture weights")
    p.add_argument("--means", default="0")
    p.add_argument("--variances", default="1")
    p.add_argument("--mixture-only", action="store_true", help="iid mixture draws, no volatility process")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)


def cmd_simulate(args) -> int:
    w = np.asarray(_floats(args.weights))
    mix = MixtureState(w / w.sum(), _floats(args.means), 1.0 / np.asarray(_floats(args.variances)))
    rng = RngStream(args.seed, 0)
    meta = {
        "n": args.n, "seed": args.seed, "weights": mix.weights.tolist(),
        "means": mix.means.tolist(), "variances": mix.variances.tolist(),
        "mixture_only": bool(args.mixture_only),
    }
    if args.mixture_only:
        y = sample_mixture(mix, args.n, rng)
        paths = write_simulation(args.out, y, meta=meta)
    else:
        y, h, eps = simulate_sv(args.c, args.phi, args.sigma_eta ** 2, mix, args.n, rng)
        meta.update(c=args.c, phi=args.phi, sigma_eta=args.sigma_eta, h0=float(h[0]))
        paths = write_simulation(args.out, y, h[1:], eps, meta)
    for path in paths:
        print(path)
    return 0


def _add_summarize_parser(sub):
    p = sub.add_parser("summarize", help="rebuild the summary table from a trace.csv")
    p.add_argument("--traces", required=True)
    p.add_argument("--split-rhat", action="store_true")
    p.add_argument("--out", help="write CSV here instead of stdout")
    p.set_defaults(func=cmd_summarize)


def cmd_summarize(args) -> int:
    rows = summarize_trace(args.traces, split=args.split_rhat)
    if args.out:
        write_csv(args.out, SUMMARY_HEADER, (r.as_list() for r in rows))
    else:
        print(",".join(SUMMARY_HEADER))
        for r in rows:
            print(",".join(fmt(v) for v in r.as_list()))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="volmix", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_fit_parser(sub)
    _add_simulate_parser(sub)
    _add_summarize_parser(sub)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, DataError, ValueError) as exc:
        print(f"volmix: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
