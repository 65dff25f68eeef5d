"""Command-line entry point: ``longcycle <subcommand> [flags]``.

Exit codes: 0 success, 2 invariant failure, 3 configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path

from . import cyclebuilder as cb
from . import demode, harness, twogreedy
from .harness import ConfigError, ExperimentConfig

EXIT_OK, EXIT_INVARIANT, EXIT_CONFIG = 0, 2, 3

SUBCOMMANDS = {
    "ode": "ode",
    "greedy": "greedy-trace",
    "kernel": "kernel-stats",
    "longcycle": "longcycle",
    "synthetic": "synthetic",
    "probe": "probe",
    "couple": "couple",
    "bounds": "bounds",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_CONFIG)


def _knob(text: str) -> tuple[str, object]:
    if "=" not in text:
        raise argparse.ArgumentTypeError("knob must look like name=value")
    k, v = text.split("=", 1)
    names = {f.name: f for f in fields(cb.CycleKnobs)}
    if k not in names:
        raise argparse.ArgumentTypeError(f"unknown knob {k!r}")
    try:
        val = json.loads(v)
    except json.JSONDecodeError:
        val = v
    return k, val


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="longcycle", description="Long cycles in sparse random graphs.")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON file with ExperimentConfig fields; flags override it")
    common.add_argument("--seed", type=int)
    common.add_argument("--trials", type=int)
    common.add_argument("--workers", type=int)
    common.add_argument("--n", type=int)
    g = common.add_mutually_exclusive_group()
    g.add_argument("--eps", type=float)
    g.add_argument("--m", type=int)
    g.add_argument("--s", type=float)
    common.add_argument("--out", help="output directory (default: stdout)")
    fmt = common.add_mutually_exclusive_group()
    fmt.add_argument("--json", action="store_true", help="JSON output (default)")
    fmt.add_argument("--csv", action="store_true", help="CSV output")
    common.add_argument("--tol", type=float)
    common.add_argument("--eps1", type=float)
    common.add_argument("--trace-every", type=int)
    common.add_argument("--sigma-prime", type=float)
    common.add_argument("--C", dest="weight_cap", type=float, help="weight truncation cap")
    common.add_argument("--gamma", type=float)
    common.add_argument("--unit-weights", action="store_true", default=None)
    common.add_argument("--knob", action="append", type=_knob, default=[],
                        help="cycle-builder override, e.g. --knob seg_floor=400 (repeatable)")
    helps = {
        "ode": "integrate the fluid-limit system and report alpha",
        "greedy": "2-Greedy on the all-Y model, traced against the ODE",
        "kernel": "kernel statistics of G^M(n, m)",
        "longcycle": "end-to-end long cycle in G^M(n, m)",
        "synthetic": "cycle construction on the all-Y model with Exp<=C weights",
        "probe": "one-step expectation probe on census fixtures",
        "couple": "geometric / truncated-exponential coupling",
        "bounds": "the four theorem lower bounds",
    }
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name, parents=[common], help=helps[name])
        if name == "ode":
            sp.add_argument("--grid", type=int, default=1001)
            sp.add_argument("--trajectory", action="store_true",
                            help="also write trajectory.csv (needs --out)")
        if name == "greedy":
            sp.add_argument("--trace", action="store_true", help="write trace CSV per trial (needs --out)")
    return p


def make_config(args) -> ExperimentConfig:
    base = ExperimentConfig.load(args.config).to_dict() if args.config else {}
    base["mode"] = SUBCOMMANDS[args.cmd]
    if args.config and base.get("mode") != SUBCOMMANDS[args.cmd]:
        base["mode"] = SUBCOMMANDS[args.cmd]
    for k in ("seed", "trials", "workers", "n", "eps", "m", "s", "tol", "eps1", "trace_every",
              "sigma_prime", "weight_cap", "gamma", "unit_weights"):
        v = getattr(args, k, None)
        if v is not None:
            base[k] = v
    if any(getattr(args, k) is not None for k in ("eps", "m", "s")):
        for k in ("eps", "m", "s"):
            if getattr(args, k) is None:
                base[k] = None
    knobs = dict(base.get("knobs") or {})
    knobs.update(dict(args.knob))
    base["knobs"] = knobs
    base["out"] = args.out
    cfg = ExperimentConfig.from_dict(base)
    cfg.validate()
    return cfg


def _emit(text: str, out: str | None, name: str) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    d = Path(out)
    d.mkdir(parents=True, exist_ok=True)
    (d / name).write_text(text)


def _dump(obj) -> str:
    return json.dumps(harness._clean(obj), sort_keys=True, indent=2) + "\n"


def _cmd_ode(cfg: ExperimentConfig, args) -> None:
    traj = demode.integrate(tol=cfg.tol, grid=args.grid)
    s = demode.summary(traj)
    if args.csv:
        _emit("".join(f"{k},{s[k]!r}\n" for k in sorted(s)), cfg.out, "ode_summary.csv")
    else:
        _emit(_dump(s), cfg.out, "ode_summary.json")
    if args.trajectory and cfg.out:
        _emit(traj.to_csv(), cfg.out, "trajectory.csv")


def _cmd_bounds(cfg: ExperimentConfig, args) -> None:
    if cfg.m is not None:
        b = harness.compute_bounds(cfg.n, s=cfg.s_value, alpha=harness.live_alpha(cfg.tol))
    elif cfg.s is not None:
        b = harness.compute_bounds(cfg.n, s=cfg.s, alpha=harness.live_alpha(cfg.tol))
    else:
        b = harness.compute_bounds(cfg.n, eps=cfg.eps, alpha=harness.live_alpha(cfg.tol))
    if args.csv:
        _emit("".join(f"{k},{'' if b[k] is None else repr(b[k])}\n" for k in sorted(b)), cfg.out,
              "bounds.csv")
    else:
        _emit(_dump(b), cfg.out, "bounds.json")


def _cmd_probe(cfg: ExperimentConfig, args) -> None:
    trials = cfg.trials if args.trials is not None else 20000
    res = harness.run_probe(trials, cfg.seed, cfg.cap)
    if args.csv:
        lines = ["fixture,quantity,formula,empirical,stderr,within_3sigma"]
        for fx in sorted(res):
            for q in sorted(res[fx]):
                r = res[fx][q]
                lines.append(f"{fx},{q},{r['formula']!r},{r['empirical']!r},{r['stderr']!r},"
                             f"{int(r['within_3sigma'])}")
        _emit("\n".join(lines) + "\n", cfg.out, "probe.csv")
    else:
        _emit(_dump({"trials": trials, "seed": cfg.seed, "fixtures": res}), cfg.out, "probe.json")


def _cmd_trials(cfg: ExperimentConfig, args) -> None:
    res = harness.run(cfg)
    if args.csv:
        _emit(res.to_csv(), cfg.out, "trials.csv")
    else:
        _emit(res.to_json(), cfg.out, "result.json")
    if getattr(args, "trace", False) and cfg.out:
        for i in range(cfg.trials):
            rec = harness.trial_greedy_trace(cfg, i, keep_trace=True)
            _emit(rec["_trace"].to_csv(), cfg.out, f"trace_{i:04d}.csv")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = make_config(args)
        if args.cmd == "ode":
            _cmd_ode(cfg, args)
        elif args.cmd == "bounds":
            _cmd_bounds(cfg, args)
        elif args.cmd == "probe":
            _cmd_probe(cfg, args)
        else:
            _cmd_trials(cfg, args)
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return EXIT_CONFIG
    except (cb.CycleVerificationError, twogreedy.InvariantError, twogreedy.CensusMismatch,
            AssertionError) as exc:
        sys.stderr.write(f"invariant failure: {exc}\n")
        return EXIT_INVARIANT
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
