"""Command-line entry point: ``belief-sampler {run,bounds,verify,gen}``.

Exit codes: 0 success, 1 I/O failure, 2 validation failure, 3 acceptance
criteria failure (report still written).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict

from . import acceptance
from .configfile import generate_config, load_config, serialize_config
from .diagnostics import analytic_report, build_bound_report, default_burn_in, detect_learning
from .engine import RULES, RULE_ALIASES, run_ensemble
from .engine import config_hash as effective_hash
from .errors import GenerationBudgetExceeded, ValidationError
from .tracefile import write_trace

log = logging.getLogger("belief_sampler")

EXIT_OK, EXIT_IO, EXIT_INVALID, EXIT_CRITERIA = 0, 1, 2, 3
PARALLELISM_ENV = "BELIEF_SAMPLER_PARALLELISM"
ROUND_ORDER_NOTE = ("neighbour actions enter pooling with a one-round lag: round t pools "
                    "the empirical distributions through round t-1")


def parallelism() -> int:
    raw = os.environ.get(PARALLELISM_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _write_json(path, doc) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, allow_nan=True)
        fh.write("\n")


def _load(args):
    cfg = load_config(args.config)
    return cfg.with_overrides(horizon=getattr(args, "horizon", None),
                              rule=getattr(args, "rule", None),
                              thinning=getattr(args, "thin", None))


def cmd_run(args) -> int:
    base = load_config(args.config)
    cfg = _load(args)
    seeds = [args.seed] if args.seed is not None else list(cfg.seeds)
    threshold = args.threshold if args.threshold is not None else cfg.threshold
    os.makedirs(args.out, exist_ok=True)
    template = cfg.simulation_config(seeds[0])
    log.info("running %d seed(s) of %s for %d rounds", len(seeds), cfg.rule, cfg.horizon)
    traces = run_ensemble(template, seeds, parallelism())
    runs = []
    for tr in traces:
        name = f"trace_seed{tr.seed}.csv"
        write_trace(tr, os.path.join(args.out, name))
        runs.append({
            "seed": tr.seed,
            "effective_config_hash": tr.config_hash,
            "trace_file": name,
            "verdicts": [asdict(v) for v in detect_learning(tr, threshold)],
            "final_beliefs": tr.pooled[-1].tolist(),
        })
    summary = {"base_config_hash": base.base_hash, "rule": cfg.rule,
               "horizon": cfg.horizon, "thinning": cfg.thinning, "threshold": threshold,
               "round_ordering": ROUND_ORDER_NOTE, "runs": runs}
    _write_json(os.path.join(args.out, "summary.json"), summary)
    print(f"wrote {len(runs)} trace(s) and summary.json to {args.out}")
    return EXIT_OK


def cmd_bounds(args) -> int:
    cfg = load_config(args.config)
    report = analytic_report(cfg.simulation_config(), cfg.beta_fraction)
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    doc = report.to_dict()
    doc.pop("empirical")
    text = json.dumps(doc, indent=2)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = _load(args)
    threshold = args.threshold if args.threshold is not None else cfg.threshold
    burn_in = args.burn_in if args.burn_in is not None else cfg.burn_in
    seeds = [cfg.seeds[0] + k for k in range(args.seeds)]
    template = cfg.simulation_config(seeds[0])
    log.info("verifying %d seed(s) of %s for %d rounds", len(seeds), cfg.rule, cfg.horizon)
    traces = run_ensemble(template, seeds, parallelism())
    report = build_bound_report(template, traces, threshold,
                                burn_in if burn_in is not None else default_burn_in(cfg.horizon),
                                cfg.beta_fraction)
    results = acceptance.evaluate(template, traces, threshold)
    os.makedirs(args.out, exist_ok=True)
    doc = {"base_config_hash": load_config(args.config).base_hash,
           "effective_config_hash": effective_hash(template),
           "round_ordering": ROUND_ORDER_NOTE,
           "report": report.to_dict(),
           "criteria": [r.to_dict() for r in results]}
    _write_json(os.path.join(args.out, "report.json"), doc)
    for r in results:
        print(r.line())
    ok = acceptance.all_passed(results)
    print("ALL PASS" if ok else "CRITERIA FAILED")
    return EXIT_OK if ok else EXIT_CRITERIA


def _parse_params(items) -> dict:
    params = {}
    for item in items or []:
        key, _, value = item.partition("=")
        if not _:
            raise ValidationError(f"generator parameter {item!r} is not key=value")
        try:
            params[key] = json.loads(value)
        except json.JSONDecodeError:
            params[key] = value
    return params


def cmd_gen(args) -> int:
    cfg = generate_config(args.kind, args.n, args.m, _parse_params(args.param), args.seed,
                          horizon=args.horizon or 1000)
    text = serialize_config(cfg)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    print(f"wrote {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    rules = list(RULES) + list(RULE_ALIASES)
    p = argparse.ArgumentParser(prog="belief-sampler",
                                description="Sample-based social learning simulator")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate and write trace files")
    r.add_argument("--config", required=True)
    r.add_argument("--seed", type=int)
    r.add_argument("--horizon", type=int)
    r.add_argument("--rule", choices=rules)
    r.add_argument("--thin", type=int)
    r.add_argument("--threshold", type=float)
    r.add_argument("--out", default="out")
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("bounds", help="analytic bound report")
    b.add_argument("--config", required=True)
    b.add_argument("--out")
    b.set_defaults(func=cmd_bounds)

    v = sub.add_parser("verify", help="run an ensemble and check the acceptance criteria")
    v.add_argument("--config", required=True)
    v.add_argument("--seeds", type=int, default=20)
    v.add_argument("--horizon", type=int)
    v.add_argument("--rule", choices=rules)
    v.add_argument("--thin", type=int)
    v.add_argument("--threshold", type=float)
    v.add_argument("--burn-in", dest="burn_in", type=int)
    v.add_argument("--out", default="out")
    v.set_defaults(func=cmd_verify)

    g = sub.add_parser("gen", help="generate a runnable config")
    g.add_argument("--kind", choices=["ring", "star", "random"], required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--m", type=int, default=2)
    g.add_argument("--param", action="append", metavar="KEY=VALUE")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--horizon", type=int)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ValidationError, GenerationBudgetExceeded) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
