"""Command-line interface: ``qedmodel <subcommand> [flags]``.

Scalar reports are printed as JSON, series as CSV.  Settings are resolved as
defaults < JSON config file (``--config`` or ``$QED_CONFIG``) < flags.
Exit codes: 0 success, 1 data or model error, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import calibrate as cal
from . import dataio, dynamics, fpe, instanton, potentials, rates
from .errors import ConfigError, QedError
from .params import ModelParams, classify_regime

DEFAULTS = {
    "theta": None, "sigma": None, "kappa": 0.0, "g": 0.0, "nu": 2,
    "dt": None, "seed": 0, "paths": 1000, "t_end": None,
    "lambda1": 0.0, "lambda2": 1e5, "recovery": 0.4,
    "grid_n": None, "grid_lo": None, "grid_hi": None, "out": None,
    "x0": 1.0, "gbm": False, "space": "x", "record_every": 1,
    "methods": "kramers,susy,spectral", "T": 40.0, "kind": "instanton",
    "prices": None, "cds": None, "symbol": None, "workers": None, "max_iters": 2000,
    "restarts": 5, "table": False,
}

_PARAM_HELP = {
    "theta": "linear growth rate theta (1/year)",
    "sigma": "volatility sigma (1/sqrt(year))",
    "kappa": "quadratic coefficient kappa (1/year, rescaled price units)",
    "g": "cubic coefficient g >= 0 (1/year, rescaled price units)",
    "nu": "calculus selector: 2 = Ito (default), 1 = Stratonovich-type",
}


def _add_params(sp):
    for name in ("theta", "sigma", "kappa", "g"):
        sp.add_argument(f"--{name}", type=float, default=argparse.SUPPRESS, help=_PARAM_HELP[name])
    sp.add_argument("--nu", type=int, choices=(1, 2), default=argparse.SUPPRESS, help=_PARAM_HELP["nu"])


def _add_common(sp):
    sp.add_argument("--config", default=argparse.SUPPRESS,
                    help="JSON config file (keys as flag names with '_'); falls back to $QED_CONFIG")
    sp.add_argument("--out", default=argparse.SUPPRESS, help="output file path (default: stdout)")


def _add_grid(sp, what: str):
    sp.add_argument("--grid-n", type=int, default=argparse.SUPPRESS, help=f"number of {what} grid points")
    sp.add_argument("--grid-lo", type=float, default=argparse.SUPPRESS, help=f"lower {what} grid bound")
    sp.add_argument("--grid-hi", type=float, default=argparse.SUPPRESS, help=f"upper {what} grid bound")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qedmodel", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS

    sp = sub.add_parser("potential", help="regime, extrema and barrier report (JSON) or potential table (CSV)")
    _add_params(sp)
    _add_grid(sp, "log-price y")
    sp.add_argument("--table", action="store_true", default=S,
                    help="emit y, V, V', U-, U+ on the grid as CSV instead of the report")
    _add_common(sp)

    sp = sub.add_parser("simulate", help="Euler-Maruyama paths (CSV: t, path_0, ...)")
    _add_params(sp)
    sp.add_argument("--gbm", action="store_true", default=S, help="force kappa = g = 0")
    sp.add_argument("--x0", type=float, default=S, help="initial rescaled price (dimensionless)")
    sp.add_argument("--t-end", type=float, default=S, help="horizon (years)")
    sp.add_argument("--dt", type=float, default=S, help="time step (years, default 1/252)")
    sp.add_argument("--paths", type=int, default=S, help="number of paths")
    sp.add_argument("--seed", type=int, default=S, help="RNG seed")
    sp.add_argument("--space", choices=("x", "y"), default=S, help="simulate price x or log-price y")
    sp.add_argument("--record-every", type=int, default=S, help="record every k-th step")
    _add_common(sp)

    sp = sub.add_parser("escape", help="Monte Carlo first-passage escape rate (JSON)")
    _add_params(sp)
    sp.add_argument("--dt", type=float, default=S, help="time step (years, default 1e-3)")
    sp.add_argument("--paths", type=int, default=S, help="number of paths")
    sp.add_argument("--seed", type=int, default=S, help="RNG seed")
    sp.add_argument("--t-end", type=float, default=S,
                    help="censoring horizon (years, default ten Kramers lifetimes)")
    sp.add_argument("--recovery", type=float, default=S, help="recovery rate R in [0, 1)")
    _add_common(sp)

    sp = sub.add_parser("rates", help="escape rates and CDS spreads (JSON)")
    _add_params(sp)
    sp.add_argument("--recovery", type=float, default=S, help="recovery rate R in [0, 1)")
    sp.add_argument("--methods", default=S,
                    help="comma list from kramers, susy, spectral (default all)")
    _add_grid(sp, "spectral log-price")
    _add_common(sp)

    sp = sub.add_parser("instanton", help="instanton, anti-instanton or bounce trajectory (CSV: t, y, x)")
    _add_params(sp)
    sp.add_argument("--T", type=float, default=S, help="half-width of the time window (years)")
    sp.add_argument("--kind", choices=("instanton", "anti-instanton", "bounce"), default=S,
                    help="trajectory type")
    sp.add_argument("--grid-n", type=int, default=S, help="number of time points")
    _add_common(sp)

    sp = sub.add_parser("density", help="steady-state price density (CSV: x, density)")
    _add_params(sp)
    _add_grid(sp, "price x")
    _add_common(sp)

    for name, text in (("calibrate", "per-year calibration (calibration.csv schema)"),
                       ("compare", "per-year GBM vs QED log-likelihood table (CSV)")):
        sp = sub.add_parser(name, help=text)
        sp.add_argument("--prices", default=S, help="price CSV with header symbol,date,price")
        sp.add_argument("--cds", default=S, help="CDS CSV with header symbol,date,spread_bps")
        sp.add_argument("--symbol", default=S, help="restrict to one symbol (default: all)")
        sp.add_argument("--lambda1", type=float, default=S,
                        help="CDS penalty weight (per bps^2); compare uses 0.1, 1, 10")
        sp.add_argument("--lambda2", type=float, default=S, help="barrier-region penalty weight")
        sp.add_argument("--recovery", type=float, default=S, help="recovery rate R in [0, 1)")
        sp.add_argument("--dt", type=float, default=S, help="time step (years, default 1/252)")
        sp.add_argument("--nu", type=int, choices=(1, 2), default=S, help=_PARAM_HELP["nu"])
        sp.add_argument("--seed", type=int, default=S, help="optimizer restart seed")
        sp.add_argument("--max-iters", type=int, default=S, help="optimizer iterations per run")
        sp.add_argument("--restarts", type=int, default=S, help="random optimizer restarts")
        sp.add_argument("--workers", type=int, default=S,
                        help="worker processes (default: available CPUs)")
        _add_common(sp)
    return parser


def resolve(ns: argparse.Namespace) -> dict:
    """Merge defaults, config file and explicit flags."""
    cfg = dict(DEFAULTS)
    flags = vars(ns)
    path = flags.get("config") or os.environ.get("QED_CONFIG")
    if path:
        try:
            with open(path) as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = set(loaded) - set(DEFAULTS) - {"command"}
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        cfg.update(loaded)
    cfg.update({k: v for k, v in flags.items() if k not in ("config", "command")})
    cfg["command"] = flags["command"]
    return cfg


def _params(cfg: dict) -> ModelParams:
    if cfg["theta"] is None or cfg["sigma"] is None:
        raise ConfigError("--theta and --sigma are required")
    kappa, g = (0.0, 0.0) if cfg.get("gbm") else (cfg["kappa"], cfg["g"])
    try:
        return ModelParams(float(cfg["theta"]), float(kappa), float(g), float(cfg["sigma"]),
                           int(cfg["nu"]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _num(v):
    if v is None or isinstance(v, (bool, str, int)):
        return v
    v = float(v)
    return v if math.isfinite(v) else repr(v)


def _json(obj) -> str:
    def clean(o):
        if isinstance(o, dict):
            return {str(k): clean(v) for k, v in o.items()}
        if isinstance(o, (list, tuple)):
            return [clean(v) for v in o]
        if isinstance(o, np.generic):
            o = o.item()
        return _num(o) if isinstance(o, float) else o
    return json.dumps(clean(obj), sort_keys=True, indent=2) + "\n"


def _csv(columns, rows) -> str:
    buf = io.StringIO()
    dataio.write_table(buf, tuple(columns), rows)
    return buf.getvalue()


# ----------------------------------------------------------- subcommands

def cmd_potential(cfg):
    p = _params(cfg)
    if cfg["table"]:
        lo = -3.0 if cfg["grid_lo"] is None else cfg["grid_lo"]
        hi = 1.0 if cfg["grid_hi"] is None else cfg["grid_hi"]
        y = np.linspace(lo, hi, 401 if cfg["grid_n"] is None else cfg["grid_n"])
        v, d1, _ = potentials.log_potential_all(y, p)
        um, up = potentials.qm_potentials(y, p)
        rows = [{"y": a, "V": b, "dV": c, "U_minus": d, "U_plus": e}
                for a, b, c, d, e in zip(y, v, d1, um, up)]
        return _csv(("y", "V", "dV", "U_minus", "U_plus"), rows)
    reg = classify_regime(p)
    report = {"regime": reg.kind.name.lower(), "discriminant": reg.discriminant,
              "theta_bar": p.theta_bar, "temperature": p.temperature}
    try:
        b = potentials.barrier(p)
        report["barrier"] = {"y_min": b.y_min, "y_max": b.y_max, "x_min": b.x_min,
                             "x_max": b.x_max, "e_b": b.e_b, "e_b_over_t": b.e_b / b.temperature,
                             "v2_min": b.v2_min, "v2_max": b.v2_max}
    except QedError:
        report["barrier"] = None
    return _json(report)


def cmd_simulate(cfg):
    p = _params(cfg)
    dt = 1.0 / 252.0 if cfg["dt"] is None else cfg["dt"]
    t_end = 1.0 if cfg["t_end"] is None else cfg["t_end"]
    ens = dynamics.simulate_sde(cfg["x0"], p, t_end, dt, cfg["paths"], seed=cfg["seed"],
                                space=cfg["space"], record_every=cfg["record_every"])
    cols = ["t"] + [f"path_{i}" for i in range(ens.n_paths)]
    rows = [dict(zip(cols, [t, *ens.values[:, j]])) for j, t in enumerate(ens.times)]
    return _csv(cols, rows)


def cmd_escape(cfg):
    p = _params(cfg)
    dt = 1e-3 if cfg["dt"] is None else cfg["dt"]
    est = dynamics.mc_escape_rate(p, dt=dt, n_paths=cfg["paths"], seed=cfg["seed"],
                                  t_max=cfg["t_end"])
    return _json({"rate": est.rate, "stderr": est.stderr, "n_paths": est.n_paths,
                  "n_absorbed": est.n_absorbed, "t_max": est.t_max,
                  "mean_first_passage": est.mean_first_passage,
                  "spread_bps": rates.hazard_to_spread(est.rate, cfg["recovery"])})


def cmd_rates(cfg):
    p = _params(cfg)
    methods = [m.strip() for m in str(cfg["methods"]).split(",") if m.strip()]
    unknown = set(methods) - {"kramers", "susy", "spectral"}
    if unknown:
        raise ConfigError(f"unknown methods: {', '.join(sorted(unknown))}")
    b = potentials.barrier(p)
    out = {"e_b": b.e_b, "e_b_over_t": b.e_b / b.temperature, "recovery": cfg["recovery"]}
    for m in methods:
        if m == "kramers":
            est = rates.kramers_rate(p, warn=False)
        elif m == "susy":
            est = rates.susy_quadrature_rate(p)
        else:
            d_lo, d_hi, d_n = rates.default_grid(p)
            grid = (d_lo if cfg["grid_lo"] is None else cfg["grid_lo"],
                    d_hi if cfg["grid_hi"] is None else cfg["grid_hi"],
                    d_n if cfg["grid_n"] is None else cfg["grid_n"])
            est = rates.spectral_rate(p, grid=grid)[0]
        out[m] = {"rate": est.rate, "spread_bps": rates.hazard_to_spread(est.rate, cfg["recovery"]),
                  "method": est.method}
    return _json(out)


def cmd_instanton(cfg):
    p = _params(cfg)
    n = 4001 if cfg["grid_n"] is None else cfg["grid_n"]
    traj = instanton.instanton_trajectory(p, cfg["T"], n, kind=cfg["kind"])
    rows = [{"t": t, "y": y, "x": math.exp(y)} for t, y in zip(traj.times, traj.values)]
    return _csv(("t", "y", "x"), rows)


def cmd_density(cfg):
    p = _params(cfg)
    st = fpe.steady_state_x(p)
    if not st.normalizable:
        thr = fpe.normalizability_threshold(p)
        return _json({"normalizable": False, "z_exponent": st.z_exponent,
                      "theta_star": thr.theta_star})
    lo = 1e-3 if cfg["grid_lo"] is None else cfg["grid_lo"]
    hi = 3.0 if cfg["grid_hi"] is None else cfg["grid_hi"]
    x = np.linspace(lo, hi, 401 if cfg["grid_n"] is None else cfg["grid_n"])
    dens = st.density(x)
    return _csv(("x", "density"), [{"x": a, "density": b} for a, b in zip(x, dens)])


def _calib_config(cfg) -> cal.CalibConfig:
    return cal.CalibConfig(lambda1=cfg["lambda1"], lambda2=cfg["lambda2"],
                           dt=1.0 / 252.0 if cfg["dt"] is None else cfg["dt"],
                           recovery=cfg["recovery"], nu=cfg["nu"], max_iters=cfg["max_iters"],
                           restarts=cfg["restarts"], seed=cfg["seed"])


def _load_inputs(cfg):
    if not cfg["prices"]:
        raise ConfigError("--prices is required")
    price_rows = dataio.load_prices(cfg["prices"], cfg["symbol"]) if cfg["symbol"] else None
    symbols = [cfg["symbol"]] if cfg["symbol"] else _symbols(cfg["prices"])
    series = {s: price_rows if s == cfg["symbol"] else dataio.load_prices(cfg["prices"], s)
              for s in symbols}
    cds = {}
    if cfg["cds"]:
        for s in symbols:
            cds[s] = dataio.load_cds(cfg["cds"], s).annual_means
    return series, cds


def _symbols(path) -> list[str]:
    with open(path, newline="") as fh:
        return sorted({row["symbol"].strip() for row in csv.DictReader(fh) if row.get("symbol")})


def _calibrate_task(args):
    symbol, year, y, obs, config = args
    gbm = cal.gbm_mle(y, config.dt)
    res = cal.calibrate(y, obs if config.lambda1 > 0 else None, config)
    p = res.params
    return {"symbol": symbol, "year": year, "theta": p.theta, "sigma": p.sigma, "kappa": p.kappa,
            "g": p.g, "nll_gbm": gbm.nll, "nll_qed": res.nll, "kramers_rate": res.kramers_rate,
            "model_spread_bps": res.model_spread_bps, "observed_mean_spread_bps": obs,
            "converged": res.converged}


def _compare_task(args):
    symbol, year, y, obs, config = args
    row = cal.compare_models({year: y}, {year: obs} if obs is not None else {}, config)[0]
    out = {"symbol": symbol, "year": year, "ll_gbm": row.ll_gbm,
           "ll_qed_unconstrained": row.ll_qed_unconstrained, "observed_spread_bps": obs}
    for lam in (0.1, 1.0, 10.0):
        out[f"ll_qed_lambda_{lam:g}"] = row.ll_qed_constrained.get(lam)
        out[f"model_spread_bps_lambda_{lam:g}"] = row.model_spread_bps.get(lam)
    return out


COMPARE_COLUMNS = ("symbol", "year", "ll_gbm", "ll_qed_unconstrained",
                   "ll_qed_lambda_0.1", "ll_qed_lambda_1", "ll_qed_lambda_10",
                   "model_spread_bps_lambda_0.1", "model_spread_bps_lambda_1",
                   "model_spread_bps_lambda_10", "observed_spread_bps")


def _batch(cfg, task, columns):
    config = _calib_config(cfg)
    series, cds = _load_inputs(cfg)
    jobs = []
    for symbol, s in series.items():
        for year, part in dataio.partition_by_year(s).items():
            if part.too_short:
                print(f"qedmodel: skipping {symbol} {year}: fewer than two prices", file=sys.stderr)
                continue
            jobs.append((symbol, year, part.y, cds.get(symbol, {}).get(year), config))
    workers = cfg["workers"] or os.cpu_count() or 1
    if workers == 1 or len(jobs) <= 1:
        rows = [task(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            rows = list(pool.map(task, jobs))
    return _csv(columns, rows)


def cmd_calibrate(cfg):
    return _batch(cfg, _calibrate_task, dataio.CALIBRATION_COLUMNS)


def cmd_compare(cfg):
    return _batch(cfg, _compare_task, COMPARE_COLUMNS)


COMMANDS = {"potential": cmd_potential, "simulate": cmd_simulate, "escape": cmd_escape,
            "rates": cmd_rates, "instanton": cmd_instanton, "density": cmd_density,
            "calibrate": cmd_calibrate, "compare": cmd_compare}


def run(argv=None) -> int:
    """Run one subcommand; returns the process exit code."""
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = resolve(ns)
        text = COMMANDS[ns.command](cfg)
    except ConfigError as exc:
        print(f"qedmodel {ns.command}: {exc}", file=sys.stderr)
        return 2
    except (QedError, OSError) as exc:
        print(f"qedmodel {ns.command}: {exc}", file=sys.stderr)
        return 1
    if cfg["out"]:
        with open(cfg["out"], "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def main() -> None:
    sys.exit(run())
