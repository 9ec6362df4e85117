"""Command-line interface: solve, train, certify, bench."""

import argparse
import os
import sys
import time

import numpy as np

from . import __version__
from .closed_form import (
    Hyperparameters, centered_observation_rank, predict, reference_parameter,
    solve_mcdnn_closed_form, solve_mcdnn_unweighted, solve_ndnn_closed_form,
    tikhonov_solve,
)
from .config import (
    BENCH_SCHEMA, SOLVE_SCHEMA, TRAIN_SCHEMA, RunManifest, experiment_config_from_values,
    parse_config_file, serialize_config, write_manifest,
)
from .benchmark import convergence_study, run_experiment
from .data import NoiseModel, TrainingSet
from .errors import (
    ConfigError, ConstructionError, DivergenceError, InsufficientDataError,
    NumericError, RankDeficiencyError,
)
from .forward import ForwardOperator
from .networks import AutoencoderParams, DenseNetwork
from .objectives import LOSS_KINDS, Objective
from .optimize import OptimizerConfig, minimize
from .priors import GaussianPrior
from .reporting import (
    emit_report, read_matrix_csv, read_vector_csv, write_certificates_csv,
    write_trace_csv, write_vector_csv,
)
from .stationary import bundled_certificates

OUTPUT_DIR_ENV = "MCINV_OUTPUT_DIR"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    parser = _Parser(prog="mcinv", description=__doc__)
    parser.add_argument("--version", action="version", version=f"mcinv {__version__}")
    commands = parser.add_subparsers(dest="command")

    solve = commands.add_parser("solve", help="closed-form inverse solve from a config")
    solve.add_argument("--config", required=True, help="solve config file")
    solve.add_argument("--out", help="output directory")
    solve.set_defaults(func=_cmd_solve)

    train = commands.add_parser("train", help="gradient-based training of a network")
    train.add_argument("--config", required=True, help="problem-data config file")
    train.add_argument("--loss", required=True, choices=LOSS_KINDS)
    train.add_argument("--alpha", type=float, default=1.0)
    train.add_argument("--alpha1", type=float, default=0.0)
    train.add_argument("--alpha2", type=float, default=0.0)
    train.add_argument("--beta", type=float, default=1.0)
    train.add_argument("--arch", default="",
                       help="hidden layers as size:activation pairs, e.g. 8:tanh,8:tanh")
    train.add_argument("--seed", type=int, default=0)
    train.add_argument("--max-iters", type=int, default=2000)
    train.add_argument("--tol", type=float, default=1e-8)
    train.add_argument("--step-size", type=float, default=0.5)
    train.add_argument("--out", help="output directory")
    train.set_defaults(func=_cmd_train)

    certify = commands.add_parser("certify", help="certify the built-in stationary constructions")
    certify.add_argument("--all", action="store_true",
                         help="include measurement-only rows beside the asserted ones")
    certify.add_argument("--seed", type=int, default=0)
    certify.add_argument("--out", help="output directory")
    certify.set_defaults(func=_cmd_certify)

    bench = commands.add_parser("bench", help="run the deconvolution benchmark")
    bench.add_argument("--config", required=True, help="benchmark config file")
    bench.add_argument("--out", help="output directory")
    bench.add_argument("--parallelism", type=int, default=1)
    bench.set_defaults(func=_cmd_bench)
    return parser


def _output_dir(args):
    out = args.out or os.environ.get(OUTPUT_DIR_ENV) or "mcinv_output"
    os.makedirs(out, exist_ok=True)
    return out


def _resolve_path(base_dir, value):
    return value if os.path.isabs(value) else os.path.join(base_dir, value)


def _load_required(values, key, base_dir, reader):
    if values[key] is None:
        raise ConfigError(f"method requires key {key!r} to point at a CSV file")
    return reader(_resolve_path(base_dir, values[key]))


def _problem_pieces(values, base_dir, need_operator):
    forward = prior = None
    if values["forward_matrix"] is not None:
        forward = ForwardOperator(read_matrix_csv(_resolve_path(base_dir, values["forward_matrix"])))
    elif need_operator:
        raise ConfigError("method requires key 'forward_matrix' to point at a CSV file")
    if forward is not None:
        dim = forward.parameter_dim
        mean = (read_vector_csv(_resolve_path(base_dir, values["prior_mean"]))
                if values["prior_mean"] else np.zeros(dim))
        covariance = (read_matrix_csv(_resolve_path(base_dir, values["prior_covariance"]))
                      if values["prior_covariance"] else np.eye(dim))
        prior = GaussianPrior(mean, covariance=covariance)
        noise = NoiseModel.scaled_identity(values["noise_sigma"], forward.observation_dim)
        return forward, prior, noise
    return None, None, None


def _cmd_solve(args):
    started = time.time()
    values = parse_config_file(args.config, SOLVE_SCHEMA)
    base_dir = os.path.dirname(os.path.abspath(args.config))
    out_dir = _output_dir(args)
    method = values["method"]
    notes = {"pinv_tolerance": values["pinv_tolerance"]}

    observation = _load_required(values, "observation", base_dir, read_vector_csv)
    forward, prior, noise = _problem_pieces(values, base_dir, need_operator=method != "ndnn")

    training_set = None
    if method != "tikhonov":
        params = _load_required(values, "training_parameters", base_dir, read_matrix_csv)
        data = _load_required(values, "training_data", base_dir, read_matrix_csv)
        training_set = TrainingSet(params, data)
        notes["centered_observation_rank"] = centered_observation_rank(training_set)

    if method == "ndnn":
        fit = solve_ndnn_closed_form(training_set, values["alpha1"], values["alpha2"],
                                     values["pinv_tolerance"])
        solution = predict(fit, observation)
    elif method == "mcdnn":
        fit = solve_mcdnn_closed_form(training_set, forward, prior, noise, values["alpha"],
                                      values["pinv_tolerance"])
        solution = predict(fit, observation)
    elif method == "mcdnn_unweighted":
        fit = solve_mcdnn_unweighted(training_set, forward, values["alpha"],
                                     values["pinv_tolerance"])
        solution = predict(fit, observation)
    else:
        if values["reference_parameter"] is not None:
            reference = read_vector_csv(_resolve_path(base_dir, values["reference_parameter"]))
        else:
            reference = prior.mean
        solution = tikhonov_solve(forward, noise, prior, values["alpha"], observation, reference)

    write_vector_csv(os.path.join(out_dir, "solution.csv"), solution)
    resolved = serialize_config(values, SOLVE_SCHEMA)
    with open(os.path.join(out_dir, "resolved_config.cfg"), "w", encoding="utf-8") as handle:
        handle.write(resolved)
    manifest = RunManifest(
        subcommand="solve", tool_version=__version__,
        config={k: line.partition(" = ")[2] for k, line in
                zip(SOLVE_SCHEMA, resolved.strip().splitlines())},
        seeds={}, outputs=["solution.csv", "resolved_config.cfg"],
        duration_seconds=time.time() - started, notes=notes)
    write_manifest(os.path.join(out_dir, "manifest.json"), manifest, out_dir)
    print(f"wrote {out_dir}/solution.csv ({method}, {solution.size} entries)")
    return 0


def _parse_arch(text):
    layers = []
    for piece in filter(None, (p.strip() for p in text.split(","))):
        size, _, activation = piece.partition(":")
        layers.append((int(size), activation or "tanh"))
    return layers


def _training_template(kind, hidden, m, n, seed):
    def stack(in_dim, out_dim, offset):
        sizes = [in_dim] + [s for s, _ in hidden] + [out_dim]
        activations = [a for _, a in hidden] + ["linear"]
        return DenseNetwork.initialize(sizes, activations, seed=seed + offset)

    if kind in ("ndnn", "mcdnn"):
        return stack(n, m, 0)
    if kind == "mcencoder":
        return AutoencoderParams(stack(n, m, 0), stack(m, n, 1))
    return AutoencoderParams(stack(m, n, 0), stack(n, m, 1))


def _cmd_train(args):
    started = time.time()
    values = parse_config_file(args.config, TRAIN_SCHEMA)
    base_dir = os.path.dirname(os.path.abspath(args.config))
    out_dir = _output_dir(args)

    params = _load_required(values, "training_parameters", base_dir, read_matrix_csv)
    data = _load_required(values, "training_data", base_dir, read_matrix_csv)
    training_set = TrainingSet(params, data)
    forward, prior, noise = _problem_pieces(values, base_dir, need_operator=args.loss != "ndnn")

    template = _training_template(args.loss, _parse_arch(args.arch),
                                  training_set.parameter_dim, training_set.observation_dim,
                                  args.seed)
    objective = Objective(args.loss, template, training_set, forward=forward, prior=prior,
                          noise=noise, hyper=Hyperparameters(alpha1=args.alpha1,
                                                             alpha2=args.alpha2,
                                                             alpha=args.alpha, beta=args.beta))
    config = OptimizerConfig(step_size=args.step_size, max_iterations=args.max_iters,
                             gradient_tolerance=args.tol, seed=args.seed)
    result = minimize(objective, template.flatten(), config)

    write_vector_csv(os.path.join(out_dir, "parameters.csv"), result.theta)
    write_trace_csv(os.path.join(out_dir, "trace.csv"), result.trace)
    manifest = RunManifest(
        subcommand="train", tool_version=__version__,
        config={**{k: str(values[k]) for k in TRAIN_SCHEMA},
                "loss": args.loss, "alpha": repr(args.alpha), "alpha1": repr(args.alpha1),
                "alpha2": repr(args.alpha2), "beta": repr(args.beta), "arch": args.arch,
                "max_iters": str(args.max_iters), "tol": repr(args.tol),
                "step_size": repr(args.step_size)},
        seeds={"init_seed": args.seed}, outputs=["parameters.csv", "trace.csv"],
        duration_seconds=time.time() - started,
        notes={"converged": result.converged, "iterations": result.iterations,
               "final_loss": result.final_loss,
               "final_gradient_norm": result.final_gradient_norm})
    write_manifest(os.path.join(out_dir, "manifest.json"), manifest, out_dir)
    status = "converged" if result.converged else "stopped"
    print(f"{status} after {result.iterations} iterations: loss {result.final_loss:.6e}, "
          f"gradient norm {result.final_gradient_norm:.3e}")
    return 0


def _cmd_certify(args):
    started = time.time()
    out_dir = _output_dir(args)
    rows = bundled_certificates(seed=args.seed, include_measured=args.all)
    write_certificates_csv(os.path.join(out_dir, "certificates.csv"), rows)
    header = f"{'loss kind':13s} {'construction':55s} {'grad norm':>10s} {'loss':>10s}  status"
    print(header)
    print("-" * len(header))
    failures = 0
    for cert, asserted in rows:
        if asserted:
            status = "pass" if cert.passed else "FAIL"
            failures += not cert.passed
        else:
            status = "measured"
        print(f"{cert.loss_kind:13s} {cert.construction:55s} "
              f"{cert.gradient_norm:10.2e} {cert.loss_value:10.2e}  {status}")
    manifest = RunManifest(
        subcommand="certify", tool_version=__version__,
        config={"all": str(args.all).lower()}, seeds={"seed": args.seed},
        outputs=["certificates.csv"], duration_seconds=time.time() - started,
        notes={"asserted_failures": failures})
    write_manifest(os.path.join(out_dir, "manifest.json"), manifest, out_dir)
    if failures:
        print(f"{failures} asserted certificate(s) failed")
        return 2
    print("all asserted certificates pass")
    return 0


def _cmd_bench(args):
    started = time.time()
    values = parse_config_file(args.config, BENCH_SCHEMA)
    config = experiment_config_from_values(values)
    out_dir = _output_dir(args)

    if config.mode == "convergence":
        report, gaps = convergence_study(config, parallelism=args.parallelism)
    else:
        report, gaps = run_experiment(config, parallelism=args.parallelism), None
    outputs = emit_report(report, out_dir, gaps=gaps)

    resolved = serialize_config(values, BENCH_SCHEMA)
    with open(os.path.join(out_dir, "resolved_config.cfg"), "w", encoding="utf-8") as handle:
        handle.write(resolved)
    outputs.append("resolved_config.cfg")
    manifest = RunManifest(
        subcommand="bench", tool_version=__version__,
        config={k: line.partition(" = ")[2] for k, line in
                zip(BENCH_SCHEMA, resolved.strip().splitlines())},
        seeds={"master_seed": config.master_seed},
        outputs=outputs, duration_seconds=time.time() - started,
        notes={"records": len(report.records),
               "surface_axes": "training_size x alpha"})
    write_manifest(os.path.join(out_dir, "manifest.json"), manifest, out_dir)
    print(f"wrote {len(outputs)} files to {out_dir} ({len(report.records)} records)")
    return 0


def dispatch(argv):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    if getattr(args, "command", None) is None:
        parser.print_help()
        return 1
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"missing file: {exc}", file=sys.stderr)
        return 1
    except (ConstructionError, DivergenceError, InsufficientDataError,
            NumericError, RankDeficiencyError, np.linalg.LinAlgError, ValueError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
