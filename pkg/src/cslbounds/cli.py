"""Command-line entry point.

Subcommands: rate, scenario, simulate, medium, scan, replay. Every artifact
embeds the resolved run configuration; ``replay`` re-executes it.

Exit status: 0 on success, 2 for malformed input or invalid parameters,
3 for numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from cslbounds import __version__
from cslbounds.io import (
    ConfigError,
    build_medium,
    check_keys,
    inline_tables,
    load_superposition,
    read_json,
    write_table,
)
from cslbounds.model import InvalidParameterError
from cslbounds.raster import Grid
from cslbounds.rates import (
    DEFAULT_CUTOFF,
    NEGATIVE_TOL,
    NegativeRateError,
    gamma_accelerated,
    gamma_exact,
    gamma_field,
    regime_classify,
)
from cslbounds.scenarios import (
    BoundCriterion,
    PerceptionScenario,
    comparison_table,
    get_scenario,
    lambda_bound,
    scan,
    scenario_rate_sum,
)
from cslbounds.sde import FitError, StabilityError, run_ensemble, simulate_trajectories

log = logging.getLogger("cslbounds")

EXIT_INPUT = 2
EXIT_NUMERIC = 3
BUNDLED_PREFIX = "bundled:"
METHODS = ("exact", "accelerated", "field")


@dataclass
class RunConfig:
    subcommand: str
    input: dict | None
    options: dict = field(default_factory=dict)
    seed: int = 0
    workers: int = 1
    format: str = "json"


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"not serializable: {type(o)}")


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n"


def provenance(rc: RunConfig) -> dict:
    return {"tool": "cslbounds", "version": __version__, "run_config": asdict(rc)}


def provenance_line(rc: RunConfig) -> str:
    return "run_config: " + json.dumps(provenance(rc), sort_keys=True, separators=(",", ":"), default=_jsonable)


def _cell(v):
    if isinstance(v, (np.generic,)):
        v = v.item()
    return repr(v) if isinstance(v, float) else v


def _csv(rows, cols, rc: RunConfig) -> str:
    buf = io.StringIO()
    buf.write("# " + provenance_line(rc) + "\n")
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow({k: _cell(v) for k, v in r.items()})
    return buf.getvalue()


def _criterion(opts) -> BoundCriterion:
    return BoundCriterion(opts["threshold"], opts["perception_time"], opts["slack"])


def load_input(spec: str) -> tuple[dict, Path]:
    if spec.startswith(BUNDLED_PREFIX):
        name = spec[len(BUNDLED_PREFIX):]
        res = resources.files("cslbounds") / "data" / f"{name}.json"
        if not res.is_file():
            avail = sorted(p.name[:-5] for p in (resources.files("cslbounds") / "data").iterdir() if p.name.endswith(".json"))
            raise ConfigError(f"no bundled input {name!r}; available: {', '.join(avail)}")
        with resources.as_file(res) as p:
            return read_json(p), Path(p).parent
    p = Path(spec)
    return read_json(p), p.parent


def _strip_provenance(d: dict) -> dict:
    return {k: v for k, v in d.items() if k not in ("run_config", "tool", "version")}


# --- executors -------------------------------------------------------------


def run_rate(rc: RunConfig):
    sup, params = load_superposition(rc.input)
    opts = rc.options
    grid = Grid(h=opts["h"], padding=opts["padding"])
    results = {}
    for m in opts["methods"]:
        if m == "exact":
            r = gamma_exact(sup, params)
        elif m == "accelerated":
            r = gamma_accelerated(sup, params, opts["cutoff"])
        else:
            r = gamma_field(sup, params, grid)
        results[m] = r
    scale = params.lam * max(sup.comp_a.total_mass, 1.0) ** 2
    ref = results.get("exact")
    rows = []
    for m, r in results.items():
        row = {
            "method": r.method,
            "gamma_rate": r.gamma_rate,
            "gamma_over_lambda": r.gamma_rate / params.lam if params.lam else math.nan,
            "raw": r.raw,
            "clamped": r.clamped,
            "zero_within_tolerance": abs(r.raw) <= NEGATIVE_TOL * scale,
            "error_bound": r.error_bound,
        }
        if ref is not None and m != "exact":
            denom = abs(ref.gamma_rate) or 1.0
            row["rel_diff_vs_exact"] = abs(r.gamma_rate - ref.gamma_rate) / denom
        rows.append(row)
    try:
        rep = regime_classify(sup, params)
        regime = {
            "regime": rep.regime.value,
            "same_index_max_rC": rep.same_index_max,
            "cross_min_rC": rep.cross_min,
            "intra_a_rC": rep.intra_a,
            "intra_b_rC": rep.intra_b,
            "leading_order": rep.leading_order(params),
        }
    except InvalidParameterError as e:
        regime = {"regime": None, "note": str(e)}
    notes = []
    if any(r["clamped"] for r in rows):
        notes.append("tiny negative sum from cancellation clamped to zero")
    if any(r["zero_within_tolerance"] for r in rows):
        notes.append("branches have identical smeared mass density within rounding: no collapse")
    if rc.format == "csv":
        cols = ["method", "gamma_rate", "gamma_over_lambda", "raw", "clamped",
                "zero_within_tolerance", "error_bound", "rel_diff_vs_exact"]
        return [("", _csv(rows, cols, rc))]
    out = provenance(rc)
    out.update({
        "params": {"gamma": params.gamma, "r_C": params.r_C, "lambda": params.lam},
        "n_particles": len(sup.comp_a),
        "rates": rows,
        "regime": regime,
        "notes": notes,
    })
    return [("", dump_json(out))]


def _scenario_from_input(rc: RunConfig) -> PerceptionScenario:
    name = rc.options.get("scenario")
    if rc.input is not None:
        return PerceptionScenario.from_dict(rc.input)
    return get_scenario(name)


def run_scenario(rc: RunConfig):
    opts = rc.options
    sc = _scenario_from_input(rc)
    if opts.get("photons") is not None:
        sc = sc.with_photons(opts["photons"])
    crit = _criterion(opts)
    S = scenario_rate_sum(sc)
    b = lambda_bound(S, crit)
    stages = [dict(asdict(s), contribution=s.contribution) for s in sc.stages]
    if rc.format == "csv":
        rows = stages + [{"name": "total", "contribution": S / sc.photon_count, "S": S,
                          "lambda": b.lam, "lambda_low": b.low, "lambda_high": b.high}]
        cols = ["name", "n", "N", "f", "contribution", "S", "lambda", "lambda_low", "lambda_high"]
        return [("", _csv(rows, cols, rc))]
    out = provenance(rc)
    out.update({
        "scenario": sc.to_dict(),
        "stages": stages,
        "S": S,
        "lambda_bound": asdict(b),
        "criterion": asdict(crit),
    })
    if opts.get("compare"):
        out["comparison"] = comparison_table(crit, sc.photon_count)
    return [("", dump_json(out))]


SIM_KEYS = {"dt", "t_max", "n_traj", "record_every", "grid"}


def run_simulate(rc: RunConfig):
    opts = rc.options
    sup, params = load_superposition(rc.input, extra_keys={"simulation"})
    grid = Grid(h=opts["h"], padding=opts["padding"])
    if opts["n_traj"] < 100:
        times, amps, collapsed, final, prof = simulate_trajectories(
            sup, params, opts["dt"], opts["t_max"], opts["n_traj"], rc.seed, grid,
            opts["record_every"] or 1, rc.workers,
        )
        rows = []
        for i in range(amps.shape[0]):
            for j, t in enumerate(times):
                a, b = amps[i, j]
                rows.append({"trajectory": i, "t": float(t), "re_a": a.real, "im_a": a.imag,
                             "re_b": b.real, "im_b": b.imag})
        cols = ["trajectory", "t", "re_a", "im_a", "re_b", "im_b"]
        return [(".csv", _csv(rows, cols, rc))]
    res = run_ensemble(sup, params, opts["dt"], opts["t_max"], opts["n_traj"], rc.seed, grid,
                       opts["record_every"], rc.workers)
    exact = gamma_exact(sup, params).gamma_rate
    analytic_err = abs(res.analytic_rate - exact)
    rows = [
        {"t": float(t), "re_mean": m.real, "im_mean": m.imag, "stderr": float(s)}
        for t, m, s in zip(res.times, res.mean_coherence, res.coherence_stderr)
    ]
    curve = _csv(rows, ["t", "re_mean", "im_mean", "stderr"], rc)
    summary = provenance(rc)
    summary.update({
        "fitted_rate": res.decay.rate,
        "fitted_stderr": res.decay.stderr,
        "n_fit_points": res.decay.n_fit_points,
        "ensemble_size": res.decay.ensemble_size,
        "analytic_rate": exact,
        "raster_rate": res.analytic_rate,
        "z_score": res.z_score(exact, analytic_err),
        "collapse_counts": res.collapse_counts,
        "collapse_frequencies": res.collapse_frequencies,
        "initial_weights": res.initial_weights,
        "threshold_collapsed": res.threshold_collapsed,
    })
    return [(".csv", curve), (".json", dump_json(summary))]


def run_medium(rc: RunConfig):
    spec, r_C = rc.input, None
    if "medium" in spec:
        check_keys(spec, {"medium", "params"}, "config")
        spec, r_C = spec["medium"], spec.get("params", {}).get("r_C")
    sup = build_medium(spec, seed=rc.seed, r_C=r_C)
    line = provenance_line(rc)
    species = {s.name: s.mass for s in sup.comp_a.species + sup.comp_b.species}
    return [
        (".a.txt", write_table(sup.comp_a, [line])),
        (".b.txt", write_table(sup.comp_b, [line])),
        (".json", dump_json({**provenance(rc), "species": species,
                              "n_particles": len(sup.comp_a)})),
    ]


def _grid_values(v, where):
    if isinstance(v, dict):
        check_keys(v, {"logspace"}, where, required={"logspace"})
        a, b, n = v["logspace"]
        return np.logspace(float(a), float(b), int(n)).tolist()
    if isinstance(v, (int, float)):
        return [float(v)]
    if isinstance(v, list) and v:
        return [float(x) for x in v]
    raise ConfigError(f"{where}: expected a number, a list, or {{'logspace': [a, b, n]}}")


def run_scan(rc: RunConfig):
    d = rc.input or {}
    check_keys(d, {"scenario", "lambda", "r_C"}, "scan")
    sc_spec = d.get("scenario", rc.options.get("scenario") or "most_likely")
    sc = get_scenario(sc_spec) if isinstance(sc_spec, str) else PerceptionScenario.from_dict(sc_spec)
    if rc.options.get("photons") is not None:
        sc = sc.with_photons(rc.options["photons"])
    lams = _grid_values(d.get("lambda", {"logspace": [-10, -6, 41]}), "scan.lambda")
    rcs = _grid_values(d.get("r_C", [1e-5]), "scan.r_C")
    res = scan(lams, rcs, sc, _criterion(rc.options))
    cols = ["lambda", "r_C", "gamma", "S", "collapse_time", "collapses", "fixed_clusters"]
    if rc.format == "json":
        out = provenance(rc)
        out.update({"scenario": sc.to_dict(), "rows": res.rows, "caveat": res.caveat})
        return [("", dump_json(out))]
    text = _csv(res.rows, cols, rc)
    head, rest = text.split("\n", 1)
    return [("", head + "\n# caveat: " + res.caveat + "\n" + rest)]


EXECUTORS = {
    "rate": run_rate,
    "scenario": run_scenario,
    "simulate": run_simulate,
    "medium": run_medium,
    "scan": run_scan,
}


def execute(rc: RunConfig):
    """Run a resolved configuration; returns ``[(suffix, text), ...]``."""
    return EXECUTORS[rc.subcommand](rc)


# --- argument handling -----------------------------------------------------


def _common(p, formats=("json", "csv"), default="json"):
    p.add_argument("--input", "-i", help="input file, or bundled:NAME")
    p.add_argument("--output", "-o", help="output path (prefix for multi-file outputs)")
    p.add_argument("--format", choices=formats, default=default)
    p.add_argument("--seed", type=int, default=None, help="64-bit unsigned seed")
    p.add_argument("--workers", type=int, default=1)


def _criterion_flags(p):
    p.add_argument("--photons", type=int, default=None)
    p.add_argument("--threshold", type=float, default=100.0, help="Gamma t at collapse")
    p.add_argument("--perception-time", type=float, default=0.1, help="seconds")
    p.add_argument("--slack", type=int, default=1, help="decades of slack")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cslbounds", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("rate", help="decay rate of a two-branch superposition")
    _common(p)
    p.add_argument("--methods", default=",".join(METHODS), help="comma list of exact,accelerated,field")
    p.add_argument("--cutoff", type=float, default=DEFAULT_CUTOFF, help="cell-list cutoff, units of r_C")
    p.add_argument("--h", type=float, default=0.25, help="field grid cell, units of r_C")
    p.add_argument("--padding", type=float, default=6.0, help="field grid padding, units of r_C")

    p = sub.add_parser("scenario", help="perception-chain rate sum and lambda bound")
    p.add_argument("name", nargs="?", default=None, help="built-in scenario name")
    _common(p)
    _criterion_flags(p)
    p.add_argument("--compare", action="store_true", help="include the comparison table")

    p = sub.add_parser("simulate", help="stochastic trajectories and decay fit")
    _common(p, formats=("csv",), default="csv")
    p.add_argument("--dt", type=float)
    p.add_argument("--t-max", type=float)
    p.add_argument("--n-traj", type=int)
    p.add_argument("--record-every", type=int)
    p.add_argument("--h", type=float)
    p.add_argument("--padding", type=float)

    p = sub.add_parser("medium", help="generate swap/displacement particle tables")
    _common(p, formats=("txt",), default="txt")

    p = sub.add_parser("scan", help="collapse verdicts over a lambda x r_C grid")
    _common(p, default="csv")
    _criterion_flags(p)
    p.add_argument("--scenario", default=None)

    p = sub.add_parser("replay", help="re-run the configuration embedded in an output file")
    p.add_argument("artifact")
    p.add_argument("--output", "-o")
    return ap


def _resolve(args) -> RunConfig:
    cmd = args.subcommand
    data, base = (None, Path("."))
    if args.input:
        data, base = load_input(args.input)
        data = _strip_provenance(data)
    seed = args.seed
    if seed is not None and not 0 <= seed < 2 ** 64:
        raise ConfigError("--seed must be a 64-bit unsigned integer")
    opts: dict = {}
    if cmd in ("scenario", "scan"):
        opts.update(photons=args.photons, threshold=args.threshold,
                    perception_time=args.perception_time, slack=args.slack)
    if cmd == "rate":
        if data is None:
            raise ConfigError("rate needs --input")
        data = inline_tables(data, base)
        methods = [m.strip() for m in args.methods.split(",") if m.strip()]
        bad = set(methods) - set(METHODS)
        if bad or not methods:
            raise ConfigError(f"--methods: unknown {sorted(bad)}; choose from {', '.join(METHODS)}")
        opts.update(methods=methods, cutoff=args.cutoff, h=args.h, padding=args.padding)
    elif cmd == "scenario":
        if data is None and args.name is None:
            raise ConfigError("scenario needs a built-in name or --input")
        if data is None:
            get_scenario(args.name)
        opts.update(scenario=args.name, compare=args.compare)
    elif cmd == "simulate":
        if data is None:
            raise ConfigError("simulate needs --input")
        data = inline_tables(data, base)
        sim = data.get("simulation", {})
        check_keys(sim, SIM_KEYS, "simulation")
        g = sim.get("grid", {})
        check_keys(g, {"h", "padding"}, "simulation.grid")
        pick = lambda flag, key, default: flag if flag is not None else sim.get(key, default)  # noqa: E731
        opts.update(
            dt=float(pick(args.dt, "dt", 1e-3)),
            t_max=float(pick(args.t_max, "t_max", 3.0)),
            n_traj=int(pick(args.n_traj, "n_traj", 10_000)),
            record_every=pick(args.record_every, "record_every", None),
            h=float(args.h if args.h is not None else g.get("h", 0.25)),
            padding=float(args.padding if args.padding is not None else g.get("padding", 6.0)),
        )
    elif cmd == "medium":
        if data is None:
            raise ConfigError("medium needs --input")
        if seed is None:
            seed = int(data.get("medium", data).get("box", {}).get("seed", 0))
    elif cmd == "scan":
        opts.update(scenario=args.scenario)
    return RunConfig(cmd, data, opts, 0 if seed is None else seed, args.workers, args.format)


def read_run_config(path) -> RunConfig:
    text = Path(path).read_text()
    for line in text.splitlines():
        if line.startswith("# run_config: "):
            blob = json.loads(line[len("# run_config: "):])
            break
    else:
        try:
            blob = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError("no embedded run_config found", path) from e
    if "run_config" not in blob:
        raise ConfigError("no embedded run_config found", path)
    return RunConfig(**blob["run_config"])


def write_outputs(artifacts, output: str | None, stream=None) -> list:
    written = []
    if output is None:
        stream = stream or sys.stdout
        for _, text in artifacts:
            stream.write(text)
        return written
    out = Path(output)
    if len(artifacts) > 1:
        stem = str(out)
        for ext in (".json", ".csv", ".txt"):
            if stem.endswith(ext):
                stem = stem[: -len(ext)]
        for suffix, text in artifacts:
            p = Path(stem + suffix)
            p.write_text(text)
            written.append(p)
    else:
        out.write_text(artifacts[0][1])
        written.append(out)
    return written


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.subcommand == "replay":
            rc = read_run_config(args.artifact)
        else:
            rc = _resolve(args)
        write_outputs(execute(rc), args.output)
    except (StabilityError, FitError, NegativeRateError, FloatingPointError) as e:
        print(f"cslbounds: numerical error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, InvalidParameterError, KeyError, ValueError, TypeError) as e:
        msg = e.args[0] if isinstance(e, KeyError) and e.args else e
        print(f"cslbounds: error: {msg}", file=sys.stderr)
        return EXIT_INPUT
    return 0


if __name__ == "__main__":
    sys.exit(main())
