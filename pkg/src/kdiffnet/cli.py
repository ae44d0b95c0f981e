"""Command-line front end: dataset generation, fitting, sweeps, the
sample-size experiment, benchmarking, and scoring of saved results.

Every command is deterministic given its manifest and seed (timings
excepted). A config file supplies ``key = value`` defaults; explicit flags
win over file values.
"""

import argparse
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .evaluate import (
    DEFAULT_EPS_GRID,
    METHODS,
    lambda_grid,
    prepare_backward,
    rate_experiment,
    score_edges,
    sweep,
    time_harness,
)
from .knowledge import NodeGroupSet, expand_node_groups
from .matio import (
    load_groups,
    load_keyvalues,
    load_matrix,
    save_keyvalues,
    save_matrix_text,
)
from .simulate import (
    SimulationError,
    SimulationSpec,
    gen_dataset,
    load_dataset,
    save_dataset,
    true_support,
)
from .solvers import (
    SolverConfig,
    solve_diffee,
    solve_kdiffnet_e,
    solve_kdiffnet_eg,
    solve_kdiffnet_g,
    solve_kdiffnet_multi,
)

ALL_METHODS = METHODS + ("kdiffnet-multi",)


@dataclass
class RunManifest:
    """What a command ran on: inputs, configuration, seed, tool version."""

    command: str
    inputs: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    seed: int = 0
    tool_version: str = __version__

    def save(self, path):
        flat = {"command": self.command, "seed": self.seed, "tool_version": self.tool_version}
        for key, value in self.inputs.items():
            flat[f"input.{key}"] = value
        for key, value in self.config.items():
            flat[f"config.{key}"] = value
        save_keyvalues(path, flat)

    @classmethod
    def load(cls, path):
        flat = load_keyvalues(path)
        manifest = cls(
            command=flat.pop("command"),
            seed=int(flat.pop("seed")),
            tool_version=flat.pop("tool_version"),
        )
        for key, value in flat.items():
            kind, _, name = key.partition(".")
            if kind == "input":
                manifest.inputs[name] = value
            elif kind == "config":
                manifest.config[name] = value
        return manifest


def _merge_config(args, parser_defaults, aliases):
    """Apply config-file values where the command line kept the default.

    Config keys use the flag spelling (e.g. ``lambda``); ``aliases`` maps
    them to argparse destinations.
    """
    if not getattr(args, "config", None):
        return args
    file_values = load_keyvalues(args.config)
    for key, text in file_values.items():
        attr = aliases.get(key.replace("-", "_"), key.replace("-", "_"))
        if not hasattr(args, attr):
            continue
        if getattr(args, attr) != parser_defaults.get(attr):
            continue  # explicit flag wins
        default = parser_defaults.get(attr)
        if isinstance(default, bool):
            value = text.lower() in ("1", "true", "yes")
        elif isinstance(default, int) and not isinstance(default, bool):
            value = int(text)
        elif isinstance(default, float):
            value = float(text)
        else:
            value = text
        setattr(args, attr, value)
    return args


def _parse_float_list(text):
    return [float(tok) for tok in text.replace(",", " ").split()]


def _parse_int_list(text):
    return [int(tok) for tok in text.replace(",", " ").split()]


def _v_policy(text):
    return "auto" if text == "auto" else float(text)


def cmd_simulate(args):
    try:
        spec = SimulationSpec(
            p=args.p, n_c=args.n_c, n_d=args.n_d, setting=args.setting,
            sparsity=args.sparsity, group_size=args.group_size,
            num_groups=args.num_groups, background_prob=args.background_prob,
            edge_value=args.edge_value, seed=args.seed,
        )
        distance = load_matrix(args.distance) if args.distance else None
        ds = gen_dataset(spec, distance=distance)
    except (SimulationError, ValueError) as exc:
        print(f"error: invalid simulation spec: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out)
    save_dataset(ds, out)
    manifest = RunManifest(
        command="simulate", seed=args.seed,
        inputs={"distance": args.distance or ""},
        config={
            "p": spec.p, "n_c": spec.n_c, "n_d": spec.n_d, "setting": spec.setting,
            "sparsity": spec.sparsity, "group_size": spec.group_size,
            "num_groups": spec.num_groups, "edge_value": spec.edge_value,
            "background_prob": spec.background_prob,
        },
    )
    manifest.save(out / "manifest.txt")
    print(out)
    return 0


def _load_fit_inputs(args):
    ds = load_dataset(args.data)
    w = ds.w_e
    eg = expand_node_groups(ds.node_groups) if ds.node_groups is not None else None
    method = args.method
    if method in ("kdiffnet-e", "kdiffnet-eg", "kdiffnet-multi") and w is None:
        raise ValueError(f"method {method} requires an edge-weight matrix (w_e.txt) in the bundle")
    if method in ("kdiffnet-g", "kdiffnet-eg", "kdiffnet-multi") and eg is None:
        raise ValueError(f"method {method} requires a node-group file (groups.txt) in the bundle")
    return ds, w, eg


def cmd_fit(args):
    try:
        ds, w, eg = _load_fit_inputs(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    t0 = time.perf_counter()
    backward = prepare_backward(ds, v=args.v)
    backward_seconds = time.perf_counter() - t0
    cfg = SolverConfig(
        lambda_n=args.lambda_n, eps=args.eps, v=backward.v_used, gamma=args.gamma,
        rho=args.rho, max_iter=args.max_iter, tol=args.tol,
    )
    t0 = time.perf_counter()
    if args.method == "diffee":
        net = solve_diffee(backward, args.lambda_n, off_diagonal_only=args.off_diagonal_only)
    elif args.method == "kdiffnet-e":
        net = solve_kdiffnet_e(backward, w, args.lambda_n)
    elif args.method == "kdiffnet-g":
        net = solve_kdiffnet_g(backward, eg, args.lambda_n)
    elif args.method == "kdiffnet-eg":
        net = solve_kdiffnet_eg(backward, w, eg, cfg)
    elif args.method == "kdiffnet-multi":
        if not args.w2 or not args.groups2:
            print("error: kdiffnet-multi requires --w2 and --groups2", file=sys.stderr)
            return 2
        w2 = load_matrix(args.w2)
        eg2 = expand_node_groups(NodeGroupSet(load_groups(args.groups2), ds.p))
        net = solve_kdiffnet_multi(
            backward, w, w2, eg, eg2, args.eps_e, args.eps_1, args.eps_2, cfg,
        )
    else:
        print(f"error: unknown method {args.method}", file=sys.stderr)
        return 2
    fit_seconds = time.perf_counter() - t0
    if not net.converged:
        print(f"warning: did not converge within {cfg.max_iter} iterations", file=sys.stderr)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_matrix_text(out / "delta.txt", net.delta)
    if net.delta_e is not None:
        save_matrix_text(out / "delta_e.txt", net.delta_e)
    if net.delta_g is not None:
        save_matrix_text(out / "delta_g.txt", net.delta_g)
    if ds.true_delta is not None:
        save_matrix_text(out / "true_delta.txt", ds.true_delta)
    save_keyvalues(out / "result.txt", {
        "kind": "result",
        "method": args.method,
        "lambda_n": args.lambda_n,
        "eps": args.eps,
        "v_used": backward.v_used,
        "iterations_run": net.iterations_run,
        "converged": net.converged,
        "objective": net.objective,
        "backward_seconds": backward_seconds,
        "fit_seconds": fit_seconds,
    })
    manifest = RunManifest(
        command="fit", seed=args.seed,
        inputs={"data": str(args.data), "w2": args.w2 or "", "groups2": args.groups2 or ""},
        config={
            "method": args.method, "lambda_n": args.lambda_n, "eps": args.eps,
            "v": args.v, "gamma": args.gamma, "rho": args.rho,
            "max_iter": args.max_iter, "tol": args.tol,
        },
    )
    manifest.save(out / "manifest.txt")
    print(out)
    return 0


def cmd_sweep(args):
    try:
        ds, w, eg = _load_fit_inputs(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    lambdas = None
    if args.lambdas:
        lambdas = _parse_float_list(args.lambdas)
    elif args.lambda_steps:
        base = args.lambda_base or (0.1 if args.method == "kdiffnet-g" else 0.01)
        lambdas = lambda_grid(ds.p, ds.x_c.shape[0], ds.x_d.shape[0], base=base, steps=args.lambda_steps)
    eps_grid = _parse_float_list(args.eps_grid) if args.eps_grid else DEFAULT_EPS_GRID
    result = sweep(
        ds, args.method, lambdas=lambdas, eps_grid=eps_grid, v=args.v,
        threshold=args.threshold, workers=args.workers,
        gamma=args.gamma, rho=args.rho, max_iter=args.max_iter, tol=args.tol,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_sweep_table(out / "points.tsv", result)
    save_keyvalues(out / "summary.txt", {
        "kind": "sweep",
        "method": args.method,
        "auc": result.auc,
        "best_lambda": result.best_lambda,
        "best_eps": result.best_eps,
        "best_f1": result.best_f1,
        "v_used": result.v_used,
        "n_points": len(result.points),
    })
    manifest = RunManifest(
        command="sweep", seed=args.seed, inputs={"data": str(args.data)},
        config={"method": args.method, "v": args.v, "workers": args.workers},
    )
    manifest.save(out / "manifest.txt")
    failed = [pt for pt in result.points if pt.error is not None]
    for pt in failed:
        print(f"warning: grid point lambda={pt.lambda_n:g} failed: {pt.error}", file=sys.stderr)
    print(out)
    return 0 if len(failed) < len(result.points) else 1


def _write_sweep_table(path, result):
    lines = ["lambda_n\teps\ttpr\tfpr\tf1\tseconds\tconverged\terror"]
    for pt in result.points:
        eps = "" if pt.eps is None else format(pt.eps, ".17g")
        lines.append(
            f"{pt.lambda_n:.17g}\t{eps}\t{pt.tpr:.6g}\t{pt.fpr:.6g}\t{pt.f1:.6g}"
            f"\t{pt.seconds:.6g}\t{int(pt.converged)}\t{pt.error or ''}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def cmd_rate(args):
    n_list = _parse_int_list(args.n_list)
    result = rate_experiment(
        args.p, n_list, args.trials, args.seed,
        lambda_scale=args.lambda_scale, v_scale=args.v_scale,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["n\tmean_error\tstd_error"]
    for pt in result.points:
        lines.append(f"{pt.n}\t{pt.mean_error:.17g}\t{pt.std_error:.17g}")
    (out / "rate.tsv").write_text("\n".join(lines) + "\n")
    save_keyvalues(out / "summary.txt", {"kind": "rate", "slope": result.slope})
    RunManifest(
        command="rate", seed=args.seed,
        config={"p": args.p, "n_list": args.n_list, "trials": args.trials,
                "lambda_scale": args.lambda_scale},
    ).save(out / "manifest.txt")
    print(f"slope {result.slope:.4f}")
    return 0


def cmd_bench(args):
    p_list = _parse_int_list(args.p_list)
    methods = args.methods.split(",")
    for method in methods:
        if method not in ALL_METHODS:
            print(f"error: unknown method {method}", file=sys.stderr)
            return 2
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["method\tp\tbackward_seconds\tfit_mean_seconds\tfit_std_seconds"]
    for p in p_list:
        spec = SimulationSpec(
            p=p, n_c=max(p // 2, 2), n_d=max(p // 2, 2), setting="EG",
            sparsity=0.1, num_groups=max(p // 100, 1), group_size=10, seed=args.seed,
        )
        ds = gen_dataset(spec)
        w = ds.w_e
        eg = expand_node_groups(ds.node_groups)
        t0 = time.perf_counter()
        backward = prepare_backward(ds, v=args.v)
        backward_seconds = time.perf_counter() - t0
        lam = 0.1
        cfg = SolverConfig(lambda_n=lam, eps=1.0, gamma=args.gamma, rho=args.rho,
                           max_iter=args.max_iter, tol=args.tol)
        fits = {
            "diffee": lambda: solve_diffee(backward, lam),
            "kdiffnet-e": lambda: solve_kdiffnet_e(backward, w, lam),
            "kdiffnet-g": lambda: solve_kdiffnet_g(backward, eg, lam),
            "kdiffnet-eg": lambda: solve_kdiffnet_eg(backward, w, eg, cfg),
        }
        for method in methods:
            mean, std = time_harness(fits[method], repeats=args.repeats)
            lines.append(f"{method}\t{p}\t{backward_seconds:.6g}\t{mean:.6g}\t{std:.6g}")
    (out / "bench.tsv").write_text("\n".join(lines) + "\n")
    RunManifest(
        command="bench", seed=args.seed,
        config={"p_list": args.p_list, "methods": args.methods, "repeats": args.repeats},
    ).save(out / "manifest.txt")
    print(out / "bench.tsv")
    return 0


def cmd_score(args):
    result_dir = Path(args.result)
    delta_path = result_dir / "delta.txt"
    truth_path = result_dir / "true_delta.txt"
    if not delta_path.exists():
        print(f"error: {delta_path} not found", file=sys.stderr)
        return 2
    if not truth_path.exists():
        print(f"error: {truth_path} not found; bundle carries no ground truth", file=sys.stderr)
        return 2
    delta = load_matrix(delta_path)
    truth = true_support(load_matrix(truth_path), exclude_diagonal=not args.include_diagonal)
    score = score_edges(delta, truth, threshold=args.threshold,
                        exclude_diagonal=not args.include_diagonal)
    print(f"tp {score.tp}\nfp {score.fp}\nfn {score.fn}\ntn {score.tn}")
    print(f"precision {score.precision:.6f}\nrecall {score.recall:.6f}\nf1 {score.f1:.6f}")
    return 0


def _add_common(parser):
    parser.add_argument("--seed", type=int, default=0, help="random seed")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--config", default=None, help="key-value config file; flags win")


def _add_solver_flags(parser):
    parser.add_argument("--method", default="diffee", choices=ALL_METHODS)
    parser.add_argument("--lambda", dest="lambda_n", type=float, default=0.1,
                        help="regularization strength")
    parser.add_argument("--eps", type=float, default=1.0, help="group-term weight")
    parser.add_argument("--v", type=_v_policy, default="auto",
                        help="thresholding level, or 'auto' to pick the smallest workable one")
    parser.add_argument("--gamma", type=float, default=1.0, help="prox step")
    parser.add_argument("--rho", type=float, default=1.0, help="relaxation in (0, 2)")
    parser.add_argument("--max-iter", type=int, default=1000)
    parser.add_argument("--tol", type=float, default=1e-6)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="kdiffnet",
        description="Differential network estimation from two sample sets with optional "
                    "edge-weight and node-group knowledge.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate a synthetic dataset bundle")
    _add_common(sim)
    sim.add_argument("--p", type=int, default=100)
    sim.add_argument("--n-c", type=int, default=50)
    sim.add_argument("--n-d", type=int, default=50)
    sim.add_argument("--setting", choices=("E", "G", "EG"), default="EG")
    sim.add_argument("--sparsity", type=float, default=0.25)
    sim.add_argument("--num-groups", type=int, default=0)
    sim.add_argument("--group-size", type=int, default=5)
    sim.add_argument("--background-prob", type=float, default=0.05)
    sim.add_argument("--edge-value", type=float, default=None)
    sim.add_argument("--distance", default=None, help="known distance matrix file")
    sim.set_defaults(func=cmd_simulate)

    fit = sub.add_parser("fit", help="fit one estimator on a dataset bundle")
    _add_common(fit)
    _add_solver_flags(fit)
    fit.add_argument("--data", required=True, help="dataset bundle directory")
    fit.add_argument("--off-diagonal-only", action="store_true",
                     help="diffee only: leave the diagonal unthresholded")
    fit.add_argument("--w2", default=None, help="second weight matrix (kdiffnet-multi)")
    fit.add_argument("--groups2", default=None, help="second group file (kdiffnet-multi)")
    fit.add_argument("--eps-e", type=float, default=1.0)
    fit.add_argument("--eps-1", type=float, default=1.0)
    fit.add_argument("--eps-2", type=float, default=1.0)
    fit.set_defaults(func=cmd_fit)

    sw = sub.add_parser("sweep", help="fit across a regularization grid and score")
    _add_common(sw)
    _add_solver_flags(sw)
    sw.add_argument("--data", required=True)
    sw.add_argument("--lambdas", default=None, help="explicit comma-separated grid")
    sw.add_argument("--lambda-steps", type=int, default=None)
    sw.add_argument("--lambda-base", type=float, default=None)
    sw.add_argument("--eps-grid", default=None, help="comma-separated eps values")
    sw.add_argument("--threshold", type=float, default=1e-6)
    sw.add_argument("--workers", type=int, default=1)
    sw.set_defaults(func=cmd_sweep)

    rate = sub.add_parser("rate", help="estimation error versus sample size")
    _add_common(rate)
    rate.add_argument("--p", type=int, default=50)
    rate.add_argument("--n-list", default="25,50,100,200,400")
    rate.add_argument("--trials", type=int, default=10)
    rate.add_argument("--lambda-scale", type=float, default=0.25)
    rate.add_argument("--v-scale", type=float, default=0.3)
    rate.set_defaults(func=cmd_rate)

    bench = sub.add_parser("bench", help="time estimators over a shared backward map")
    _add_common(bench)
    _add_solver_flags(bench)
    bench.add_argument("--p-list", default="250,500,1000,2000")
    bench.add_argument("--methods", default="diffee,kdiffnet-e")
    bench.add_argument("--repeats", type=int, default=3)
    bench.set_defaults(func=cmd_bench)

    score = sub.add_parser("score", help="score a saved result bundle against its truth")
    score.add_argument("--result", required=True, help="result bundle directory")
    score.add_argument("--threshold", type=float, default=1e-6)
    score.add_argument("--include-diagonal", action="store_true")
    score.set_defaults(func=cmd_score)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    actions = parser._subparsers._group_actions[0].choices[args.command]._actions
    defaults = {action.dest: action.default for action in actions}
    aliases = {
        opt.lstrip("-").replace("-", "_"): action.dest
        for action in actions
        for opt in action.option_strings
    }
    args = _merge_config(args, defaults, aliases)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
