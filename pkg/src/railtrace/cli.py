"""Batch entry points: scenario generation, simulation, optimization,
descriptions, both evaluation harnesses, optimizer sweeps, and the service.

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import evalharness as ev
from .explain import HttpChatTransport, LMClient, StubTransport, describe_run, endpoint_from_env, stub_completion
from .optimize import OptimizerConfig, load_opt_run, relative_savings, run_optimization, save_opt_run
from .scenario import decode_scenario, encode_scenario, generate_scenario
from .simulator import check_fixture, load_fixture, simulate, weighted_loss
from .trace import render_trace, trace_to_jsonl


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        sys.exit(1)


def _add_scenario_source(p: argparse.ArgumentParser):
    p.add_argument("--scenario", type=Path, help="scenario JSON file (otherwise generated)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--obstacles", type=int, default=20)
    p.add_argument("--ctrl-points", type=int, default=16)


def _load_scenario(args):
    if args.scenario:
        return decode_scenario(Path(args.scenario).read_bytes())
    return generate_scenario(args.seed, args.obstacles, args.ctrl_points)


def _add_opt_flags(p: argparse.ArgumentParser):
    p.add_argument("--optimizer", default="adam", choices=["adam", "sgd", "rmsprop", "sign_sgd"])
    p.add_argument("--steps", type=int, default=250)
    p.add_argument("--lr", type=float, default=5e-3)
    p.add_argument("--schedule", default="cosine", choices=["cosine", "constant"])
    p.add_argument("--exponent", type=int, default=1, choices=[1, 2, 3])
    p.add_argument("--weights", default="1,1", help="time,cost loss weights, e.g. 4,1")
    p.add_argument("--event-rate", type=int, default=10)
    p.add_argument("--update-rate", type=int, default=5)


def _config_from_args(args) -> OptimizerConfig:
    w_time, w_cost = (float(x) for x in args.weights.split(","))
    return OptimizerConfig(
        kind=args.optimizer, lr0=args.lr, steps=args.steps, schedule=args.schedule,
        exponent=args.exponent, event_rate=args.event_rate, update_rate=args.update_rate,
        seed=args.seed, w_time=w_time, w_cost=w_cost,
    )


def _lm_client(args) -> LMClient:
    endpoint = endpoint_from_env()
    if endpoint is None:
        raise RuntimeError(
            "no LM endpoint configured; set LM_API_BASE, LM_MODEL (and LM_API_KEY)"
        )
    return LMClient(HttpChatTransport(endpoint), max_concurrency=endpoint.max_concurrency)


# -- subcommands -----------------------------------------------------------------


def _cmd_gen(args) -> int:
    scenario = generate_scenario(args.seed, args.obstacles, args.ctrl_points)
    data = encode_scenario(scenario)
    if args.out:
        Path(args.out).write_bytes(data + b"\n")
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(data.decode() + "\n")
    return 0


def _cmd_simulate(args) -> int:
    scenario = _load_scenario(args)
    if args.fixture_check:
        fixture = load_fixture(args.fixture_check)
        rows = check_fixture(fixture)
        bad = [r for r in rows if not r.ok]
        for r in rows:
            status = "ok" if r.ok else "FAIL"
            print(
                f"step {r.step:2d} [{status}] accel {r.accel_computed:.4f}/{r.accel_expected:.4f} "
                f"air {r.air_computed:.4f}/{r.air_expected:.4f} "
                f"vel {r.velocity_computed:.4f}/{r.velocity_expected:.4f}"
            )
        print(f"{len(rows) - len(bad)}/{len(rows)} rows pass")
        return 0 if not bad else 2
    result = simulate(scenario.ctrl_points, scenario).detach()
    obj = {
        "total_time": result.total_time,
        "total_cost": result.total_cost,
        "total_length": result.total_length,
        "loss": weighted_loss(result, 1),
        "steps": [
            {
                "m": r.m, "x": [float(r.x[0]), float(r.x[1])], "v_in": r.v_in,
                "kappa": r.kappa, "a_net": r.a_net, "a_obs": r.a_obs, "s": r.s,
                "t": r.t, "c": r.c, "v_out": r.v_out,
                "influences": sorted(r.influences),
            }
            for r in result.steps
        ],
    }
    if args.out:
        Path(args.out).write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        print(json.dumps({k: obj[k] for k in ("total_time", "total_cost", "total_length")}, indent=2))
    if args.csv:
        with open(args.csv, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "time", "acceleration", "air_resistance", "cost", "curvature", "velocity"])
            cum_t = 0.0
            for r in result.steps:
                cum_t += r.t
                w.writerow([r.m + 1, f"{cum_t:.4f}", f"{r.a_net:.4f}", f"{abs(r.a_air):.4f}",
                            f"{r.c:.4f}", f"{r.kappa:.4f}", f"{r.v_out:.4f}"])
        print(f"wrote {args.csv}")
    return 0


def _cmd_optimize(args) -> int:
    scenario = _load_scenario(args)
    config = _config_from_args(args)
    run = run_optimization(scenario, config)
    out = Path(args.out)
    save_opt_run(run, out)
    (out / "trace.jsonl").write_bytes(trace_to_jsonl(render_trace(run)))
    savings = relative_savings(run)
    first, last = run.signals.rewards[0], run.signals.rewards[-1]
    print(f"run saved to {out}")
    print(f"time {first.time:.4f} -> {last.time:.4f} ({savings['time']:+.3%})")
    print(f"cost {first.cost:.4f} -> {last.cost:.4f} ({savings['cost']:+.3%})")
    return 0


def _cmd_describe(args) -> int:
    run = load_opt_run(args.run)
    lm = _lm_client(args)
    text = describe_run(run, lm, args.type)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        print(text)
    return 0


def _batch_cell(cell):
    seed, kind, exponent, base = cell
    scenario = generate_scenario(seed, base["obstacles"], base["ctrl_points"])
    config = OptimizerConfig(
        kind=kind, lr0=base["lr"], steps=base["steps"], schedule=base["schedule"],
        exponent=exponent, seed=seed,
    )
    run = run_optimization(scenario, config)
    savings = relative_savings(run)
    first, last = run.signals.rewards[0], run.signals.rewards[-1]
    return {
        "seed": seed, "optimizer": kind, "exponent": exponent,
        "initial_time": first.time, "final_time": last.time,
        "initial_cost": first.cost, "final_cost": last.cost,
        "time_savings": savings["time"], "cost_savings": savings["cost"],
        "initial_loss": first.total, "final_loss": last.total,
    }


def _cmd_batch(args) -> int:
    kinds = args.optimizers.split(",")
    exponents = [int(x) for x in args.objectives.split(",")]
    base = {
        "obstacles": args.obstacles, "ctrl_points": args.ctrl_points,
        "lr": args.lr, "steps": args.steps, "schedule": args.schedule,
    }
    cells = [
        (seed, kind, exponent, base)
        for seed in range(args.seeds)
        for kind in kinds
        for exponent in exponents
    ]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_batch_cell, cells))
    else:
        rows = [_batch_cell(c) for c in cells]
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        w.writeheader()
        w.writerows(rows)
    improved = sum(r["final_loss"] < r["initial_loss"] for r in rows)
    print(f"wrote {out} ({len(rows)} cells; loss improved in {improved})")
    print(f"mean time savings {np.mean([r['time_savings'] for r in rows]):+.3%}")
    print(f"mean cost savings {np.mean([r['cost_savings'] for r in rows]):+.3%}")
    return 0


def _qa_description(scenario, run, lm, desc_type: str) -> str:
    if desc_type == "update":
        return describe_run(run, lm, "updates")
    if desc_type == "step_level":
        return describe_run(run, lm, "steps")
    return describe_run(run, lm, "full")


def _cmd_eval_qa(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config = OptimizerConfig(steps=args.steps, event_rate=args.event_rate, update_rate=args.update_rate)
    lm = None if args.stub else _lm_client(args)
    tasks = []
    for i in range(args.instances):
        scenario = generate_scenario(1000 + i, args.obstacles, args.ctrl_points)
        options = [o.nickname for o in scenario.obstacles]
        events_text = ev.initial_events_text(scenario, config.event_rate)
        if args.stub:
            description = "(stubbed description)"
        else:
            run = run_optimization(scenario, config)
            description = _qa_description(scenario, run, lm, args.desc_type)
        for phase in ("initial", "optimized"):
            for metric in ("time", "cost"):
                truth = ev.qa_ground_truth(scenario, (phase, metric), config)
                tasks.append(ev.QATask(
                    scenario=scenario, question_kind=(phase, metric), options=options,
                    ground_truth=truth, description_type=args.desc_type,
                    description_text=description, initial_events_text=events_text,
                    task_id=f"inst{i}-{phase}-{metric}",
                ))
    if args.stub == "echo":
        answers = iter([t.ground_truth for t in tasks])
        lm = LMClient(StubTransport(fn=lambda messages: stub_completion(
            reasoning="echo", answer=next(answers))), max_concurrency=1)
    elif args.stub == "random":
        rng = np.random.Generator(np.random.Philox(key=np.array([7, 7], dtype=np.uint64)))
        answers = iter([str(rng.choice(t.options)) for t in tasks])
        lm = LMClient(StubTransport(fn=lambda messages: stub_completion(
            reasoning="random", answer=next(answers))), max_concurrency=1)
    report = ev.run_qa(tasks, lm)
    ev.write_report_csv(report, out / "qa_report.csv")
    ev.write_report_summary(report, out / "qa_summary.json")
    ev.qa_plot_svg(report, out / "qa_accuracy.svg")
    print(f"QA accuracy {report.accuracy:.3f} (chance {report.chance:.3f}); reports in {out}")
    return 0


def _cmd_eval_discrim(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sigmas = [float(s) for s in args.sigmas.split(",")]
    config = OptimizerConfig(steps=args.steps)
    tasks = []
    for i in range(args.instances):
        scenario = generate_scenario(2000 + i, args.obstacles, args.ctrl_points)
        run = run_optimization(scenario, config)
        target = run.theta_history[-1]
        if args.mode == "numerical" or args.stub:
            description = ""
        else:
            lm = _lm_client(args)
            description = _qa_description(scenario, run, lm, args.desc_type)
        tasks.extend(
            ev.discrimination_suite(
                scenario, target, sigmas=sigmas,
                distractor_seeds=tuple(range(args.distractor_seeds)),
                order_seeds=tuple(range(args.order_seeds)),
                description_type=args.desc_type, description_text=description,
                mode=args.mode, instance_id=f"inst{i}",
            )
        )
    if args.stub == "oracle":
        report = ev.run_discrimination(tasks, chooser=ev.numerical_oracle)
    elif args.stub == "random":
        report = ev.run_discrimination(tasks, chooser=ev.random_chooser(seed=7))
    else:
        report = ev.run_discrimination(tasks, _lm_client(args))
    ev.write_report_csv(report, out / "discrimination_report.csv")
    ev.write_report_summary(report, out / "discrimination_summary.json")
    ev.discrimination_plot_svg(report, out / "discrimination_success.svg")
    print(f"discrimination success {report.accuracy:.3f}; reports in {out}")
    return 0


def _cmd_serve(args) -> int:
    from .service import serve

    serve(host=args.host, port=args.port, store_dir=args.store_dir)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="railtrace", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a scenario file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--obstacles", type=int, default=20)
    p.add_argument("--ctrl-points", type=int, default=16)
    p.add_argument("--out", type=Path)
    p.set_defaults(fn=_cmd_gen)

    p = sub.add_parser("simulate", help="run one forward simulation")
    _add_scenario_source(p)
    p.add_argument("--out", type=Path, help="write full SimResult JSON here")
    p.add_argument("--csv", type=Path, help="write a step table CSV here")
    p.add_argument("--fixture-check", type=Path, help="verify physics laws against a fixture CSV")
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("optimize", help="run one instrumented optimization")
    _add_scenario_source(p)
    _add_opt_flags(p)
    p.add_argument("--out", type=Path, required=True, help="output run directory")
    p.set_defaults(fn=_cmd_optimize)

    p = sub.add_parser("describe", help="LM descriptions for a saved run")
    p.add_argument("--run", type=Path, required=True)
    p.add_argument("--type", default="full", choices=["full", "steps", "updates"])
    p.add_argument("--out", type=Path)
    p.set_defaults(fn=_cmd_describe)

    p = sub.add_parser("batch", help="optimizer x objective x seed sweep")
    p.add_argument("--seeds", type=int, default=20, help="number of seeds (0..n-1)")
    p.add_argument("--optimizers", default="adam,sgd,rmsprop,sign_sgd")
    p.add_argument("--objectives", default="1,2,3")
    p.add_argument("--obstacles", type=int, default=20)
    p.add_argument("--ctrl-points", type=int, default=16)
    p.add_argument("--lr", type=float, default=5e-3)
    p.add_argument("--steps", type=int, default=250)
    p.add_argument("--schedule", default="cosine", choices=["cosine", "constant"])
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", type=Path, required=True, help="output CSV path")
    p.set_defaults(fn=_cmd_batch)

    p = sub.add_parser("eval-qa", help="obstacle-removal question answering")
    p.add_argument("--instances", type=int, default=5)
    p.add_argument("--obstacles", type=int, default=12)
    p.add_argument("--ctrl-points", type=int, default=12)
    p.add_argument("--steps", type=int, default=60)
    p.add_argument("--event-rate", type=int, default=10)
    p.add_argument("--update-rate", type=int, default=5)
    p.add_argument("--desc-type", default="full", choices=list(ev.DESCRIPTION_TYPES))
    p.add_argument("--stub", choices=["echo", "random"], help="run without an LM endpoint")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(fn=_cmd_eval_qa)

    p = sub.add_parser("eval-discrim", help="target/distractor discrimination game")
    p.add_argument("--instances", type=int, default=10)
    p.add_argument("--obstacles", type=int, default=12)
    p.add_argument("--ctrl-points", type=int, default=12)
    p.add_argument("--steps", type=int, default=60)
    p.add_argument("--sigmas", default="0.02,0.06,0.1,0.15,0.2")
    p.add_argument("--distractor-seeds", type=int, default=2)
    p.add_argument("--order-seeds", type=int, default=2)
    p.add_argument("--desc-type", default="full", choices=list(ev.DESCRIPTION_TYPES))
    p.add_argument("--mode", default="numerical", choices=["explanation", "numerical"])
    p.add_argument("--stub", choices=["oracle", "random"], help="run without an LM endpoint")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(fn=_cmd_eval_discrim)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--store-dir", type=Path, help="persist finished runs under this directory")
    p.set_defaults(fn=_cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except KeyboardInterrupt:
        return 2
    except Exception as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
