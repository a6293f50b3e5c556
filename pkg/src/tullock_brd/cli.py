"""Command-line front end: ``tullock-brd {simulate,sweep,dissum,verify,cycle}``.

Exit codes: 0 converged (or all checks passed), 1 check failure or crashed
sweep cell, 2 step budget or schedule exhausted, 3 cycle detected, 64 bad
input.
"""

from __future__ import annotations

import argparse
import itertools
import json
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import config as C
from . import verify as V
from .analysis import (
    NAgentRandom,
    TwoAgent,
    fit_rate,
    gamma_lower_bound_n,
    gamma_two_agent,
)
from .discounted_sum import lower_bound_example, run_dissum
from .dynamics import StoppingRule, run
from .exceptions import FitError
from .export import atomic_write, write_trace

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_BUDGET = 2
EXIT_CYCLE = 3
EXIT_USAGE = 64

_REASON_CODES = {
    "epsilon": EXIT_OK,
    "l1": EXIT_OK,
    "max_steps": EXIT_BUDGET,
    "schedule_end": EXIT_BUDGET,
    "cycle": EXIT_CYCLE,
}
DEFAULT_STOP = {"eps": 1e-9, "max_steps": 1_000_000}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1, allow_nan=True) + "\n"


def _emit(text: str, out: str, stdout) -> None:
    if out == "-":
        stdout.write(text)
    else:
        atomic_write(out, text)


def _load(args) -> dict:
    doc = C.load(args.config)
    return C.apply_overrides(doc, args.set)


def _seed(args, doc):
    if args.seed is not None:
        return args.seed
    seed = doc.get("seed")
    if seed is None and doc.get("seeds"):
        seed = doc["seeds"][0]
    if seed is not None and not isinstance(seed, int):
        raise C.ConfigError(f"seed must be an integer, got {seed!r}")
    return seed


# -- simulate / cycle ----------------------------------------------------------


def _simulation(doc):
    cfg = C.contest_from(C._require(doc, "contest", "config"))
    x0 = C.profile_from(doc.get("x0"), cfg.n)
    policy = C.policy_from(doc.get("policy"), cfg.n)
    stop = C.stop_from(doc.get("stop", DEFAULT_STOP))
    return cfg, x0, policy, stop


def cmd_simulate(args, stdout) -> int:
    doc = _load(args)
    cfg, x0, policy, stop = _simulation(doc)
    trace = run(cfg, x0, policy, stop, seed=_seed(args, doc))
    write_trace(trace, args.out, args.format, stdout)
    return _REASON_CODES[trace.summary.stop_reason]


def cmd_cycle(args, stdout) -> int:
    """Run with cycle detection switched on and report the cycle, if any."""
    doc = _load(args)
    stop = dict(doc.get("stop") or {"max_steps": 10_000})
    stop.setdefault("cycle_tol", 1e-6)
    doc["stop"] = stop
    cfg, x0, policy, rule = _simulation(doc)
    trace = run(cfg, x0, policy, rule, seed=_seed(args, doc))
    s = trace.summary.to_json()
    report = {
        "cycle": s.get("cycle"),
        "stop_reason": s["stop_reason"],
        "steps": s["steps"],
        "final": s["final"],
    }
    _emit(_dumps(report), args.out, stdout)
    return _REASON_CODES[trace.summary.stop_reason]


# -- dissum --------------------------------------------------------------------


def _dissum_inputs(doc, n=None):
    inst = doc.get("instance")
    if inst is not None:
        if not isinstance(inst, dict):
            raise C.ConfigError("instance must be an object")
        try:
            lb = lower_bound_example(
                C._require(inst, "kind", "instance"), n=inst.get("n", n), kappa=inst.get("kappa"), B=inst.get("B")
            )
        except ValueError as exc:
            raise C.ConfigError(f"bad instance: {exc}") from exc
        return lb.z0, lb.B, lb.beta_policy, lb.schedule
    B = float(C._require(doc, "B", "config"))
    if not 0 <= B < 1:
        raise C.ConfigError(f"B must lie in [0, 1), got {B}")
    z0 = doc.get("z0")
    if n is None:
        n = int(doc["n"]) if "n" in doc else (len(z0) if isinstance(z0, list) else None)
    if n is None or n < 1:
        raise C.ConfigError("dissum config needs n or an explicit z0 list")
    if isinstance(z0, dict) and "fill" in z0:
        z = np.full(n, float(z0["fill"]))
    elif z0 is None or (isinstance(z0, dict) and z0.get("kind") == "normal"):
        z = None  # drawn per seed
    else:
        z = np.asarray(z0, dtype=float)
        if z.shape != (n,) or not np.all(np.isfinite(z)):
            raise C.ConfigError(f"z0 must be a finite list of length {n}")
    beta = C.beta_from(doc.get("beta"))
    sel = C.dissum_selection_from(doc.get("selection"), n)
    return z, B, beta, sel


def _draw_z0(n, seed):
    return np.random.default_rng([0 if seed is None else seed, n]).normal(size=n)


def cmd_dissum(args, stdout) -> int:
    doc = _load(args)
    z, B, beta, sel = _dissum_inputs(doc)
    seed = _seed(args, doc)
    if z is None:
        z = _draw_z0(int(doc["n"]), seed)
    eps, max_steps = doc.get("eps", 1e-9), doc.get("max_steps", 1_000_000)
    trace = run_dissum(z, B, beta, sel, eps=eps, max_steps=max_steps, seed=seed)
    write_trace(trace, args.out, args.format, stdout)
    return _REASON_CODES[trace.summary.stop_reason]


# -- sweep ---------------------------------------------------------------------


def _as_list(doc, key, default=None):
    v = doc.get(key, default)
    if v is None:
        raise C.ConfigError(f"sweep: missing axis {key!r}")
    v = v if isinstance(v, list) else [v]
    if not v:
        raise C.ConfigError(f"sweep: axis {key!r} is empty")
    return v


def _sweep_plan(doc, seed_override):
    mode = doc.get("mode", "brd")
    if mode not in ("brd", "dissum"):
        raise C.ConfigError(f"unknown sweep mode {mode!r}")
    seeds = [seed_override] if seed_override is not None else doc.get("seeds")
    if not isinstance(seeds, list) or not seeds:
        raise C.ConfigError("sweep: at least one seed is required")
    if not all(isinstance(s, int) for s in seeds):
        raise C.ConfigError("sweep: seeds must be integers")
    ns = _as_list(doc, "n")
    eps = _as_list(doc, "eps")
    for e in eps:
        if not isinstance(e, (int, float)) or not 0 < e < 1:
            raise C.ConfigError(f"sweep: eps values must lie in (0, 1), got {e!r}")
    for n in ns:
        if not isinstance(n, int) or n < (1 if mode == "dissum" else 2):
            raise C.ConfigError(f"sweep: bad n {n!r}")
    cells = []
    if mode == "brd":
        costs = _as_list(doc, "cost", [{"kind": "linear"}])
        for c in costs:
            C.cost_from(c)
        base = {key: doc[key] for key in ("x0", "policy", "a") if key in doc}
        base["max_steps"] = int(doc.get("max_steps", 1_000_000))
        for n, k, e, s in itertools.product(ns, range(len(costs)), eps, seeds):
            cells.append(dict(base, mode=mode, n=n, cost=costs[k], cost_index=k, eps=float(e), seed=s))
        # fail fast on structural errors before any cell runs
        for n in ns:
            C.contest_from({"n": n, "cost": costs[0], "a": doc.get("a", 1e-3)})
            C.profile_from(doc.get("x0"), n)
            C.policy_from(doc.get("policy"), n)
    else:
        base = {key: doc[key] for key in ("B", "beta", "selection", "z0", "instance") if key in doc}
        base["max_steps"] = int(doc.get("max_steps", 1_000_000))
        for n in ns:
            _dissum_inputs(dict(base), n)
        for n, e, s in itertools.product(ns, eps, seeds):
            cells.append(dict(base, mode=mode, n=n, eps=float(e), seed=s))
    return mode, cells


def _cell_key(cell) -> tuple:
    return (cell["n"], cell.get("cost_index", 0), -cell["eps"], cell["seed"])


def _cell_name(cell) -> str:
    return "n{}_c{}_e{!r}_s{}.json".format(cell["n"], cell.get("cost_index", 0), cell["eps"], cell["seed"])


def run_cell(cell: dict) -> dict:
    """Run one sweep cell; returns its JSON record."""
    n, e, s = cell["n"], cell["eps"], cell["seed"]
    if cell["mode"] == "brd":
        cfg = C.contest_from({"n": n, "cost": cell["cost"], "a": cell.get("a", 1e-3)})
        x0 = C.profile_from(cell.get("x0"), n)
        policy = C.policy_from(cell.get("policy"), n)
        trace = run(cfg, x0, policy, StoppingRule(eps=e, max_steps=cell["max_steps"]), seed=s)
        out = {"cost_index": cell["cost_index"], "cost": cell["cost"]}
    else:
        z, B, beta, sel = _dissum_inputs(cell, n)
        if z is None:
            z = _draw_z0(n, s)
        trace = run_dissum(z, B, beta, sel, eps=e, max_steps=cell["max_steps"], seed=s)
        out = {}
    sm = trace.summary
    out.update(n=n, eps=e, seed=s, steps=sm.steps, converged=sm.converged, stop_reason=sm.stop_reason)
    return out


def _run_and_store(cell, cell_dir):
    rec = run_cell(cell)
    atomic_write(os.path.join(cell_dir, _cell_name(cell)), json.dumps(rec, sort_keys=True) + "\n")
    return rec


def _gamma_for(cfg, x0):
    try:
        if cfg.n == 2:
            return gamma_two_agent(cfg, float(x0[0])).gamma
        return gamma_lower_bound_n(cfg, x0).gamma
    except (ValueError, ArithmeticError):
        return 0.5


def _brd_groups(doc, records):
    groups = []
    keyed = {}
    for r in records:
        keyed.setdefault((r["n"], r["cost_index"]), []).append(r)
    for (n, k), rs in sorted(keyed.items()):
        by_eps = {}
        for r in rs:
            by_eps.setdefault(r["eps"], []).append(r["steps"])
        eps_sorted = sorted(by_eps, reverse=True)
        mean_steps = [float(np.mean(by_eps[e])) for e in eps_sorted]
        g = {
            "n": n,
            "cost": rs[0]["cost"],
            "eps": eps_sorted,
            "mean_steps": mean_steps,
            "all_converged": all(r["converged"] for r in rs),
        }
        cfg = C.contest_from({"n": n, "cost": rs[0]["cost"], "a": doc.get("a", 1e-3)})
        gamma = _gamma_for(cfg, C.profile_from(doc.get("x0"), n))
        if n == 2:
            model, mult = TwoAgent(gamma=gamma), False
        else:
            model, mult = NAgentRandom(n=n, gamma=gamma, K=float(cfg.base_cost.derivative(1.0))), True
        try:
            g["fit"] = fit_rate(list(zip(eps_sorted, mean_steps)), model, multiplicative=mult).to_json()
        except FitError as exc:
            g["fit"] = {"error": str(exc)}
        groups.append(g)
    return groups


def _dissum_groups(records):
    groups = []
    keyed = {}
    for r in records:
        keyed.setdefault((r["n"], r["eps"]), []).append(r)
    for (n, e), rs in sorted(keyed.items(), key=lambda kv: (kv[0][0], -kv[0][1])):
        steps = np.array([r["steps"] for r in rs], dtype=float)
        groups.append(
            {
                "n": n,
                "eps": e,
                "trials": len(rs),
                "mean": float(steps.mean()),
                "quantiles": {f"q{int(q * 100)}": float(np.quantile(steps, q)) for q in (0.1, 0.5, 0.9, 0.95, 0.99)},
                "all_converged": all(r["converged"] for r in rs),
            }
        )
    return groups


def cmd_sweep(args, stdout) -> int:
    doc = _load(args)
    mode, cells = _sweep_plan(doc, args.seed)
    if args.out == "-":
        tmp = tempfile.TemporaryDirectory(prefix="tullock-sweep-")
        cell_dir, partial = tmp.name, "sweep.partial.json"
    else:
        tmp = None
        cell_dir, partial = args.out + ".cells", args.out + ".partial.json"
    os.makedirs(cell_dir, exist_ok=True)
    records, errors = [], []
    try:
        if args.jobs > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                futs = [(c, pool.submit(_run_and_store, c, cell_dir)) for c in cells]
                for c, f in futs:
                    try:
                        records.append(f.result())
                    except Exception as exc:
                        errors.append((c, exc))
        else:
            for c in cells:
                try:
                    records.append(_run_and_store(c, cell_dir))
                except Exception as exc:
                    errors.append((c, exc))
                    break
    finally:
        if tmp is not None:
            tmp.cleanup()
    records.sort(key=_cell_key)
    if errors:
        failed = [
            {"cell": {k: v for k, v in c.items() if k != "mode"}, "error": f"{type(e).__name__}: {e}"}
            for c, e in sorted(errors, key=lambda ce: _cell_key(ce[0]))
        ]
        atomic_write(partial, _dumps({"mode": mode, "complete": False, "cells": records, "failed": failed}))
        for f in failed:
            print(f"sweep cell failed: {f['error']} ({f['cell']})", file=sys.stderr)
        print(f"partial results written to {partial}", file=sys.stderr)
        return EXIT_FAIL
    groups = _brd_groups(doc, records) if mode == "brd" else _dissum_groups(records)
    _emit(_dumps({"mode": mode, "complete": True, "cells": records, "groups": groups}), args.out, stdout)
    return EXIT_OK


# -- verify --------------------------------------------------------------------


def cmd_verify(args, stdout) -> int:
    suite = args.config
    if suite not in V.SUITE_NAMES:
        print(f"unknown suite {suite!r}; choose from {', '.join(V.SUITE_NAMES)}", file=sys.stderr)
        return EXIT_USAGE
    restore = None
    if args.inject:
        restore = V.INJECTIONS[args.inject]()
    try:
        results = V.run_suite(suite)
    finally:
        if restore is not None:
            from . import discounted_sum

            discounted_sum.potential = restore
    checks = [
        {"suite": s, "name": r.name, "passed": bool(r.passed), "checked": int(r.checked), "violations": int(r.violations), "detail": r.detail}
        for s, r in results
    ]
    ok = all(c["passed"] for c in checks)
    report = {"suite": suite, "passed": ok, "failed": [c["name"] for c in checks if not c["passed"]], "checks": checks}
    _emit(_dumps(report), args.out, stdout)
    for c in checks:
        if not c["passed"]:
            print(f"FAILED {c['suite']}.{c['name']}: {c['detail']}", file=sys.stderr)
    return EXIT_OK if ok else EXIT_FAIL


# -- entry point ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tullock-brd", description="Best-response dynamics in Tullock contests.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "simulate": "run one best-response simulation and write its trace",
        "sweep": "run a grid of simulations and write aggregated JSON",
        "dissum": "run the discounted-sum dynamics and write its trace",
        "verify": "run an invariant suite and write a JSON report",
        "cycle": "run with cycle detection and report any cycle found",
    }
    for name, h in helps.items():
        sp = sub.add_parser(name, help=h)
        if name == "verify":
            sp.add_argument("config", metavar="SUITE", help="suite name: " + ", ".join(V.SUITE_NAMES))
            sp.add_argument("--inject", choices=sorted(V.INJECTIONS), help="apply a known bug before running")
        else:
            sp.add_argument("config", help="path to the JSON experiment config")
        sp.add_argument("--seed", type=int, default=None, help="override the config seed(s)")
        sp.add_argument("--jobs", type=int, default=1, help="parallel sweep cells")
        sp.add_argument("--format", choices=("csv", "jsonl"), default="csv", help="trace format")
        sp.add_argument("--out", default="-", help="output path, '-' for stdout")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key (dotted path)")
    return p


COMMANDS = {
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "dissum": cmd_dissum,
    "verify": cmd_verify,
    "cycle": cmd_cycle,
}


def main(argv=None, stdout=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    args = build_parser().parse_args(argv)
    if args.jobs < 1:
        print("--jobs must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args, stdout)
    except C.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, TypeError, KeyError) as exc:
        print(f"invalid input: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ArithmeticError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
