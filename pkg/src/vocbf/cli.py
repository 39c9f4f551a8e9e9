"""Command-line entry point (``vocbf``)."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .controller import Method
from .decision import DEFAULT_WEIGHTS, load_dataset, load_weights, save_dataset, save_weights, train
from .sim import (
    FAST_OBSTACLE_SPEED,
    SLOW_OBSTACLE_SPEED,
    ConfigError,
    circle_config,
    compare_methods,
    format_comparison,
    format_metrics,
    load_config,
    run_batch,
    run_scenario,
    save_config,
    static_dynamic_scene,
    two_obstacle_scene,
    write_outputs,
)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2

SCENES = {
    "two-static": lambda: two_obstacle_scene(dynamic=False),
    "two-dynamic": lambda: two_obstacle_scene(dynamic=True),
    "slow-obstacle": lambda: static_dynamic_scene(SLOW_OBSTACLE_SPEED),
    "fast-obstacle": lambda: static_dynamic_scene(FAST_OBSTACLE_SPEED),
}


def _method(text: str) -> Method:
    try:
        return Method.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _methods(text: str) -> list[Method]:
    return [_method(t.strip()) for t in text.split(",") if t.strip()]


def _net(args):
    if getattr(args, "weights", None):
        return load_weights(args.weights)
    return None


def cmd_simulate(args) -> int:
    cfg = load_config(args.scenario)
    if args.method is not None:
        cfg = cfg.with_method(args.method)
    log, outcome = run_scenario(cfg, net=_net(args))
    if args.out:
        write_outputs(args.out, log, outcome, cfg)
    print(json.dumps({"name": cfg.name, "method": cfg.method.value, **outcome.to_dict()}, indent=2))
    return EXIT_OK


def cmd_batch(args) -> int:
    res = run_batch(args.n, args.seed, args.method, net=_net(args), out_dir=args.out)
    sys.stdout.write(format_metrics([res]))
    return EXIT_OK


def cmd_circle(args) -> int:
    cfg = circle_config(args.robots, args.radius, (args.cx, args.cy), args.method)
    log, outcome = run_scenario(cfg, net=_net(args))
    if args.out:
        write_outputs(args.out, log, outcome, cfg)
    print(json.dumps({"name": cfg.name, "method": cfg.method.value, **outcome.to_dict()}, indent=2))
    return EXIT_OK if outcome.completed else EXIT_FAILED


def cmd_compare(args) -> int:
    cfg = load_config(args.scenario)
    rows = compare_methods(cfg, args.methods, net=_net(args))
    print(format_comparison(rows))
    return EXIT_OK


def cmd_scene(args) -> int:
    cfg = SCENES[args.name]()
    if args.method is not None:
        cfg = cfg.with_method(args.method)
    save_config(cfg, args.out)
    return EXIT_OK


def cmd_gen_dataset(args) -> int:
    from .dataset import gen_dataset

    samples = gen_dataset(args.n, args.seed, label_every=args.label_every)
    save_dataset(samples, args.out)
    print(f"wrote {len(samples)} samples from {args.n} scenarios to {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    samples = load_dataset(args.data)

    def log(epoch, loss):
        if args.verbose and (epoch % 10 == 0 or epoch == args.epochs - 1):
            print(f"epoch {epoch:4d} loss {loss:.5f}")

    net, hist = train(samples, epochs=args.epochs, lr=args.lr, seed=args.seed, log=log)
    net.meta["dataset"] = Path(args.data).name
    save_weights(net, args.out)
    print(f"trained on {len(samples)} samples: loss {hist.losses[0]:.4f} -> {hist.losses[-1]:.4f}; wrote {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vocbf", description="CLF-VOCBF navigation simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    choices = "|".join(m.value for m in Method)

    p = sub.add_parser("simulate", help="run one scenario file")
    p.add_argument("--scenario", required=True)
    p.add_argument("--method", type=_method, default=None, help=f"override the file's method ({choices})")
    p.add_argument("--out", default=None, help="directory for trajectory.csv, obstacles.csv, summary.json")
    p.add_argument("--weights", default=None, help="decision-network weights (default: shipped)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("batch", help="seeded random-scenario evaluation")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--method", type=_method, default=Method.SUB_QPS)
    p.add_argument("--out", default=None, help="directory for per-scenario outcomes")
    p.add_argument("--weights", default=None)
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("circle", help="antipodal multi-robot circle scene")
    p.add_argument("--robots", type=int, required=True)
    p.add_argument("--radius", type=float, default=5.0)
    p.add_argument("--cx", type=float, default=7.0)
    p.add_argument("--cy", type=float, default=7.0)
    p.add_argument("--method", type=_method, default=Method.DECNET)
    p.add_argument("--out", default=None)
    p.add_argument("--weights", default=None)
    p.set_defaults(func=cmd_circle)

    p = sub.add_parser("compare", help="run several methods on one scenario")
    p.add_argument("--scenario", required=True)
    p.add_argument("--methods", type=_methods, required=True, help="comma-separated list")
    p.add_argument("--weights", default=None)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("scene", help="write a scripted scene as a scenario file")
    p.add_argument("--name", choices=sorted(SCENES), required=True)
    p.add_argument("--method", type=_method, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_scene)

    p = sub.add_parser("gen-dataset", help="oracle-labeled decision-network data")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--label-every", type=int, default=5)
    p.set_defaults(func=cmd_gen_dataset)

    p = sub.add_parser("train-decnet", help="train the decision network")
    p.add_argument("--data", required=True)
    p.add_argument("--out", default=str(DEFAULT_WEIGHTS))
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_train)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
