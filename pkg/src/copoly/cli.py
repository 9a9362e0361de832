"""Command-line front end: ``copoly {sweep,loctest,meander,critcurve,stretch,limit}``.

Every option can also come from a ``key = value`` config file (``--config``);
options given on the command line win.  JSON reports embed the resolved
config, and a report can itself be passed back as ``--config`` to repeat the
run.  Environments are identified by ``(seed, sample_index)``; the seed falls
back to ``$COPOLY_SEED`` and then to 0.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import statistics
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import analysis, engine, stats
from .disorder import generate
from .engine import DEFAULT_WINDOW, NumericalError, Window
from .model import BERNOULLI, ChargeLaw, PolymerParams, h_m, optimal_q

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


class ConfigError(ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


# --- value parsers (each takes the raw text of a CLI option or config value) ---------

def _size(text: str) -> int:
    """Even system size; accepts forms like 1e6 or 2.5e5."""
    v = float(text)
    if not v.is_integer() or v < 0:
        raise ValueError(f"not a non-negative integer: {text}")
    if int(v) % 2:
        raise ValueError(f"must be even: {text}")
    return int(v)


def _count(text: str) -> int:
    v = float(text)
    if not v.is_integer() or v < 1:
        raise ValueError(f"not a positive integer: {text}")
    return int(v)


def _nonneg_int(text: str) -> int:
    v = float(text)
    if not v.is_integer() or v < 0:
        raise ValueError(f"not a non-negative integer: {text}")
    return int(v)


def _real(text: str) -> float:
    v = float(text)
    if not math.isfinite(v):
        raise ValueError(f"not a finite number: {text}")
    return v


def _law(text: str) -> ChargeLaw:
    return ChargeLaw.parse(text)


def _window(text: str) -> Window | None:
    t = text.strip().lower()
    if t == "none":
        return None
    if t == "default":
        return DEFAULT_WINDOW
    parts = t.split(",")
    if len(parts) != 3:
        raise ValueError("window is 'default', 'none' or 'A,B,N0'")
    return Window(float(parts[0]), float(parts[1]), int(float(parts[2])))


def _lambdas(text: str) -> list[float]:
    """Comma list, or start:stop[:count] (evenly spaced, 20 points by default)."""
    if ":" in text:
        parts = [float(p) for p in text.split(":")]
        if len(parts) not in (2, 3):
            raise ValueError("range is start:stop[:count]")
        count = int(parts[2]) if len(parts) == 3 else 20
        return [float(v) for v in np.linspace(parts[0], parts[1], count)]
    return [_real(p) for p in text.split(",") if p.strip()]


def _grid(text: str) -> str:
    t = text.strip().lower()
    if t in ("none", "log10"):
        return t
    [_size(p) for p in t.split(",")]
    return t


def _choice(*options: str) -> Callable[[str], str]:
    def parse(text: str) -> str:
        t = text.strip().lower()
        if t not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return t
    return parse


def _fmt(value: Any) -> str:
    """Inverse of the parsers above, used to embed the resolved config."""
    if value is None:
        return "none"
    if isinstance(value, ChargeLaw):
        return value.value
    if isinstance(value, Window):
        return f"{value.A!r},{value.B!r},{value.N0}"
    if isinstance(value, list):
        return ",".join(repr(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


# option name -> (parser, default, help); None defaults are optional or required per command
COMMON = {
    "law": (_law, "bernoulli", "charge law: bernoulli or gaussian"),
    "seed": (_nonneg_int, None, "base seed (default $COPOLY_SEED, else 0)"),
    "window": (_window, "default", "height window: default (3,8,1000), none, or A,B,N0"),
    "jobs": (_count, "1", "worker threads over environments"),
    "out": (str, None, "directory for CSV/JSON artifacts"),
    "format": (_choice("text", "json", "csv"), "text", "what to print on stdout"),
}

COMMANDS: dict[str, dict[str, tuple]] = {
    "sweep": {
        "lambda": (_real, None, "disorder strength"),
        "h": (_real, "0", "asymmetry"),
        "N": (_size, None, "system size (monomers, even)"),
        "grid": (_grid, "none", "checkpoints: none, log10 or a comma list of sizes"),
        "points": (_count, "50", "points of the log10 grid"),
        "profile": (_choice("yes", "no"), "no", "write the endpoint profile"),
        "sample_index": (_nonneg_int, "0", "environment index"),
    },
    "loctest": {
        "lambda": (_real, None, "disorder strength"),
        "h": (_real, None, "asymmetry (or give m)"),
        "m": (_real, None, "use h = h^(m)(lambda)"),
        "N": (_size, None, "system size (monomers); the smallest size in scan mode"),
        "n": (_count, "100", "number of environments"),
        "direction": (_choice("upper", "lower"), "upper", "tail tested"),
        "scan": (_choice("yes", "no"), "no", "double N until the sample mean changes sign"),
        "N_max": (_size, None, "largest size in scan mode"),
        "resolution": (_size, "0", "refine the scan bracket by bisection down to this width"),
        "level": (_real, "0.01", "error level reported against in scan mode"),
    },
    "meander": {
        "lambda": (_real, None, "disorder strength"),
        "h": (_real, None, "asymmetry"),
        "N": (_size, None, "system size (monomers)"),
        "n": (_count, "100", "number of environments"),
        "confidence": (_real, "0.95", "median confidence level"),
    },
    "critcurve": {
        "lambdas": (_lambdas, None, "comma list or start:stop[:count]"),
        "N": (_size, None, "system size (monomers)"),
        "n": (_count, "1", "number of environments"),
        "tol": (_real, "1e-6", "bisection tolerance in h"),
        "criterion": (_choice("anchor", "max_ratio"), None, "m fit (default: anchor for bernoulli)"),
        "anchor": (_real, None, "anchor lambda (default: the largest lambda)"),
    },
    "stretch": {
        "lambda": (_real, None, "disorder strength"),
        "h": (_real, None, "asymmetry"),
        "A": (_size, "20", "minimal stretch length"),
        "eps": (_real, "0.3", "epsilon in the stopping rule"),
        "cap": (_size, "1000000", "censoring level for T"),
        "q": (_real, None, "stretch threshold (default: the optimal q)"),
        "extend": (_size, "0", "continue the sweep this far past T"),
        "n": (_count, "1", "number of environments"),
    },
    "limit": {
        "m": (_real, None, "curve parameter"),
        "N": (_size, None, "system size (monomers)"),
        "grid": (_grid, "none", "checkpoints: none, log10 or a comma list"),
        "points": (_count, "50", "points of the log10 grid"),
        "sample_index": (_nonneg_int, "0", "environment index"),
    },
}

REQUIRED = {
    "sweep": ("lambda", "N"),
    "loctest": ("lambda", "N"),
    "meander": ("lambda", "h", "N"),
    "critcurve": ("lambdas", "N"),
    "stretch": ("lambda", "h"),
    "limit": ("m", "N"),
}


def _options(command: str) -> dict[str, tuple]:
    return {**COMMON, **COMMANDS[command]}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="copoly", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="key = value file, or a JSON report to repeat")
        for key, (_, default, help_) in _options(name).items():
            flag = "--" + key.replace("_", "-")
            extra = f" [default: {default}]" if default is not None else ""
            # values stay raw text here; resolve() parses them so config files share the checks
            p.add_argument(flag, dest=key, default=None, metavar=key.upper(), help=help_ + extra)
    return parser


def read_config(path: str) -> dict[str, str]:
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        data = json.loads(text)
        return {k: str(v) for k, v in data.get("config", data).items()}
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}", "expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def resolve(command: str, cli: dict[str, str | None], file_values: dict[str, str]) -> dict[str, Any]:
    """Merge defaults < config file < command line and parse every field."""
    options = _options(command)
    unknown = sorted(set(file_values) - set(options) - {"command"})
    if unknown:
        raise ConfigError(unknown[0], "unknown option")
    if file_values.get("command", command) != command:
        raise ConfigError("command", f"config is for {file_values['command']!r}")
    raw = {k: d for k, (_, d, _) in options.items()}
    raw.update({k: v for k, v in file_values.items() if k != "command"})
    raw.update({k: v for k, v in cli.items() if v is not None and k in options})
    if raw["seed"] is None:
        raw["seed"] = os.environ.get("COPOLY_SEED", "0")
    config = {}
    for key, (parse, _, _) in options.items():
        value = raw[key]
        if value is None or (str(value).strip().lower() == "none" and parse not in (_window, _grid)):
            config[key] = None
            continue
        try:
            config[key] = parse(str(value))
        except ValueError as exc:
            raise ConfigError(key, str(exc)) from None
    for key in REQUIRED[command]:
        if config.get(key) is None:
            raise ConfigError(key, "required")
    if command == "loctest":
        if (config["h"] is None) == (config["m"] is None):
            raise ConfigError("h", "give exactly one of h and m")
        if config["scan"] == "yes" and config["N_max"] is None:
            raise ConfigError("N_max", "required in scan mode")
    if "lambda" in config and config["lambda"] is not None and config["lambda"] < 0:
        raise ConfigError("lambda", "must be >= 0")
    return config


def config_record(command: str, config: dict[str, Any]) -> dict[str, str]:
    return {"command": command, **{k: _fmt(v) for k, v in config.items()}}


# --- output helpers --------------------------------------------------------------

def _g(v: Any) -> str:
    if isinstance(v, float):
        return f"{v:.17g}"
    if v is None:
        return ""
    return str(v)


def csv_text(header: list[str], rows: list[list[Any]]) -> str:
    lines = [",".join(header)] + [",".join(_g(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def _json_ready(obj: Any) -> Any:
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {str(k): _json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_ready(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return _json_ready(obj.item())
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def json_text(obj: Any) -> str:
    return json.dumps(_json_ready(obj), indent=2, sort_keys=True) + "\n"


class Output:
    def __init__(self, config: dict[str, Any]):
        self.dir = Path(config["out"]) if config["out"] else None
        self.format = config["format"]
        if self.dir:
            self.dir.mkdir(parents=True, exist_ok=True)

    def write(self, name: str, text: str) -> None:
        if self.dir:
            (self.dir / name).write_text(text, encoding="utf-8")

    def emit(self, summary: str, report: dict, table: str | None) -> None:
        if self.format == "json":
            sys.stdout.write(json_text(report))
        elif self.format == "csv" and table is not None:
            sys.stdout.write(table)
        else:
            print(summary)


def _map(config: dict[str, Any], fn: Callable, items: list) -> list:
    """Run ``fn`` over independent tasks, results in task order."""
    jobs = config["jobs"]
    if jobs == 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _grid_sizes(config: dict[str, Any], N: int) -> list[int]:
    g = config["grid"]
    if g == "none":
        return []
    if g == "log10":
        return analysis.log_grid(2, N, config["points"])
    return sorted({_size(p) for p in g.split(",") if _size(p) <= N})


# --- commands ---------------------------------------------------------------------

def cmd_sweep(config: dict[str, Any]) -> int:
    law, N = config["law"], config["N"]
    env = generate(law, max(N, 2), config["seed"], config["sample_index"])
    params = PolymerParams(config["lambda"], config["h"], law)
    grid = _grid_sizes(config, N)
    want_profile = config["profile"] == "yes"
    res = engine.sweep(env, params, N, window=config["window"], want_profile=want_profile, checkpoints=grid)
    out = Output(config)
    rows = [[n, v, f] for (n, v), (_, f) in zip(res.trace, res.free_trace)]
    table = csv_text(["N", "logZ0", "logZ"], rows)
    if grid:
        out.write("trace.csv", table)
    if want_profile and out.dir:
        res.profile.to_csv(out.dir / "profile.csv")
    report = {"config": config_record("sweep", config), "pinned_log": res.pinned_log,
              "free_log": res.free_log, "N": res.N, "env_id": list(env.env_id)}
    out.write("result.json", json_text(report))
    out.emit(f"log Z_N(0) = {res.pinned_log:.17g}\nlog Z_N    = {res.free_log:.17g}", report,
             table if grid else None)
    return EXIT_OK


def _sample_logz(config: dict[str, Any], params: PolymerParams, N: int) -> list[float]:
    def one(idx: int) -> float:
        env = generate(params.law, N, config["seed"], idx)
        return engine.sweep(env, params, N, window=config["window"]).pinned_log
    return _map(config, one, list(range(config["n"])))


def _loctest_params(config: dict[str, Any]) -> PolymerParams:
    lam = config["lambda"]
    h = config["h"] if config["h"] is not None else h_m(config["law"], config["m"], lam)
    return PolymerParams(lam, h, config["law"])


def cmd_loctest(config: dict[str, Any]) -> int:
    params = _loctest_params(config)
    out = Output(config)
    if config["scan"] == "yes":
        return _loctest_scan(config, params, out)
    N = config["N"]
    values = _sample_logz(config, params, N)
    sample = stats.Sample(values, {"law": params.law.value, "lambda": params.lam, "h": params.h, "N": N})
    report = stats.localization_test(sample, params.lam, N, config["direction"], params.law)
    table = csv_text(["sample_index", "N", "logZ0"], [[i, N, v] for i, v in enumerate(values)])
    out.write("samples.csv", table)
    doc = {"config": config_record("loctest", config), "report": report.to_dict()}
    out.write("report.json", json_text(doc))
    out.emit(report.summary(), doc, table)
    return EXIT_OK


def _loctest_scan(config: dict[str, Any], params: PolymerParams, out: Output) -> int:
    """Double N until the mean of log Z_N(0) turns positive, then optionally bisect."""
    rows: dict[int, stats.TestReport] = {}

    def test_at(N: int) -> stats.TestReport:
        if N not in rows:
            values = _sample_logz(config, params, N)
            rows[N] = stats.localization_test(values, params.lam, N, "upper", params.law)
        return rows[N]

    N, last_negative, first_positive = config["N"], None, None
    while N <= config["N_max"]:
        if test_at(N).u_hat > 0:
            first_positive = N
            break
        last_negative = N
        N *= 2
    if first_positive is not None and last_negative is not None and config["resolution"] > 0:
        lo, hi = last_negative, first_positive
        while hi - lo > config["resolution"]:
            mid = 2 * ((lo + hi) // 4)
            if mid in (lo, hi):
                break
            if test_at(mid).u_hat > 0:
                hi = mid
            else:
                lo = mid
        last_negative, first_positive = lo, hi
    level = config["level"]

    def lower_p(N: int) -> float:
        r = test_at(N)
        return stats.p_value_bound(r.u_hat, r.n, r.lam, N) if r.u_hat < 0 else 1.0

    summary = {
        "N_minus": last_negative, "N_plus": first_positive,
        "p_minus": lower_p(last_negative) if last_negative is not None else None,
        "p_plus": test_at(first_positive).p_value_bound if first_positive is not None else None,
        "level": level,
    }
    summary["level_met"] = (summary["p_minus"] is not None and summary["p_plus"] is not None
                            and summary["p_minus"] <= level and summary["p_plus"] <= level)
    table = csv_text(["N", "n", "u_hat", "p_upper", "p_lower"],
                     [[N, r.n, r.u_hat, r.p_value_bound, lower_p(N)] for N, r in sorted(rows.items())])
    out.write("scan.csv", table)
    doc = {"config": config_record("loctest", config), "scan": summary, "h": params.h}
    out.write("report.json", json_text(doc))
    if last_negative is None or first_positive is None:
        text = f"no sign change of the mean up to N={max(rows)} (last negative: {last_negative})"
    else:
        text = (f"sign change of the mean between N-={last_negative} and N+={first_positive} "
                f"(p-={summary['p_minus']:.3g}, p+={summary['p_plus']:.3g}, level {level}: "
                f"{'met' if summary['level_met'] else 'not met'})")
    out.emit(text, doc, table)
    return EXIT_OK


def cmd_meander(config: dict[str, Any]) -> int:
    law, N = config["law"], config["N"]
    params = PolymerParams(config["lambda"], config["h"], law)

    def one(idx: int) -> float:
        env = generate(law, N, config["seed"], idx)
        return analysis.meander_distance(env, params, N, window=config["window"]).distance

    dist = _map(config, one, list(range(config["n"])))
    table = csv_text(["seed", "sample_index", "N", "distance"],
                     [[config["seed"], i, N, d] for i, d in enumerate(dist)])
    ci = stats.median_ci(np.array(dist), config["confidence"]) if len(dist) >= 100 else None
    doc = {"config": config_record("meander", config), "median": float(np.median(dist)),
           "median_ci": list(ci) if ci else None, "n": len(dist)}
    out = Output(config)
    out.write("distances.csv", table)
    out.write("report.json", json_text(doc))
    ci_text = f" CI[{ci[0]:.5g}, {ci[1]:.5g}]" if ci else " (no CI below 100 samples)"
    out.emit(f"median distance {doc['median']:.5g} over n={len(dist)}{ci_text}", doc, table)
    return EXIT_OK


def cmd_critcurve(config: dict[str, Any]) -> int:
    law, N = config["law"], config["N"]
    lams = config["lambdas"]
    criterion = config["criterion"] or ("max_ratio" if law is not BERNOULLI else "anchor")
    anchor = config["anchor"] if config["anchor"] is not None else max(lams)
    tasks = [(idx, lam) for idx in range(config["n"]) for lam in lams]
    envs = {idx: generate(law, N, config["seed"], idx) for idx in range(config["n"])}

    def one(task):
        idx, lam = task
        return analysis.estimate_h_hat(envs[idx], lam, N, config["tol"], window=config["window"])

    points = _map(config, one, tasks)
    rows, err_rows, fits = [], [], []
    for idx in range(config["n"]):
        pts = [p for (i, _), p in zip(tasks, points) if i == idx]
        fit = analysis.fit_m(pts, law, criterion, anchor)
        fits.append(fit.m)
        for p, (_, r) in zip(pts, fit.relative_errors):
            rows.append([idx, p.lam, p.h_hat, p.bisection_width, p.saturated, p.h_sat])
            err_rows.append([idx, p.lam, r])
    table = csv_text(["sample_index", "lambda", "h_hat", "width", "saturated", "h_sat"], rows)
    doc = {"config": config_record("critcurve", config), "criterion": criterion, "anchor": anchor,
           "m_hat": fits, "m_hat_median": statistics.median(fits)}
    out = Output(config)
    out.write("curve.csv", table)
    out.write("errors.csv", csv_text(["sample_index", "lambda", "relative_error"], err_rows))
    out.write("report.json", json_text(doc))
    out.emit(f"m_hat = {doc['m_hat_median']:.6g} ({criterion}, N={N}, n={config['n']})", doc, table)
    return EXIT_OK


def cmd_stretch(config: dict[str, Any]) -> int:
    law = config["law"]
    params = PolymerParams(config["lambda"], config["h"], law)
    length = config["cap"] + config["extend"]

    def one(idx: int):
        env = generate(law, length, config["seed"], idx)
        return analysis.stretch_certificate(env, params, config["A"], config["eps"], config["cap"],
                                            q=config["q"], extend=config["extend"], window=config["window"])

    certs = _map(config, one, list(range(config["n"])))
    q = config["q"] if config["q"] is not None else optimal_q(law, params.lam)
    rows = [[i, c.record.ell, c.T, c.record.R_M, c.log_z_T, c.certified] for i, c in enumerate(certs)]
    table = csv_text(["sample_index", "ell", "T", "R", "logZ_T", "certified"], rows)
    ext_rows = [[i, n, v, f] for i, c in enumerate(certs)
                for (n, v), (_, f) in zip(c.extension, c.free_extension)]
    doc = {"config": config_record("stretch", config), "q": q, "exponent": certs[0].exponent,
           "log_bound": certs[0].log_bound, "log_c_prime": analysis.LOG_C_PRIME,
           "certified": sum(c.certified for c in certs), "censored": sum(c.censored for c in certs),
           "n": len(certs)}
    out = Output(config)
    out.write("certificates.csv", table)
    if ext_rows:
        out.write("extension.csv", csv_text(["sample_index", "N", "logZ0", "logZ"], ext_rows))
    out.write("report.json", json_text(doc))
    out.emit(f"{doc['certified']}/{len(certs)} certified (log Z_T(0) > 0), {doc['censored']} censored; "
             f"analytic exponent {doc['exponent']:.6g}", doc, table)
    return EXIT_OK


def cmd_limit(config: dict[str, Any]) -> int:
    N = config["N"]
    env = generate(BERNOULLI, max(N, 2), config["seed"], config["sample_index"])
    if config["law"] is not BERNOULLI:
        raise ConfigError("law", "the limit model is defined for binary charges only")
    grid = _grid_sizes(config, N)
    res = engine.limit_model_sweep(env, config["m"], N, window=config["window"], checkpoints=grid)
    rows = [[n, v, f] for (n, v), (_, f) in zip(res.trace, res.free_trace)]
    table = csv_text(["N", "logZ0", "logZ"], rows)
    report = {"config": config_record("limit", config), "pinned_log": res.pinned_log,
              "free_log": res.free_log, "N": res.N}
    out = Output(config)
    if grid:
        out.write("trace.csv", table)
    out.write("result.json", json_text(report))
    out.emit(f"log Z_N(0) = {res.pinned_log:.17g}\nlog Z_N    = {res.free_log:.17g}", report,
             table if grid else None)
    return EXIT_OK


HANDLERS = {
    "sweep": cmd_sweep, "loctest": cmd_loctest, "meander": cmd_meander,
    "critcurve": cmd_critcurve, "stretch": cmd_stretch, "limit": cmd_limit,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = vars(parser.parse_args(argv))
    except SystemExit as exc:  # argparse exits with 2 on usage errors
        return int(exc.code or 0)
    command = args.pop("command")
    try:
        file_values = read_config(args.pop("config")) if args.get("config") else {}
        args.pop("config", None)
        config = resolve(command, args, file_values)
        return HANDLERS[command](config)
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"copoly {command}: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, analysis.BracketError) as exc:
        print(f"copoly {command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"copoly {command}: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
