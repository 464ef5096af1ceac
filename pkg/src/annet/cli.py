"""Command-line front end.

Subcommands: fit, predict, generate, benchmark (fig1a | fig1b), nmi.
Exit codes: 0 success, 2 input error, 3 when no restart converged.
Reports are JSON with the run manifest embedded; tabular outputs are CSV.
"""

from __future__ import annotations

import argparse
import datetime
import json
import os
import sys

import numpy as np

from . import __version__
from .em import FitConfig, FitResult, fit, predict_from_metadata
from .graph import (Graph, MetadataColumn, load_edge_list, load_metadata,
                    write_edge_list, write_metadata)
from .metrics import nmi
from .priors import BernsteinPrior, DiscretePrior
from .synth import benchmark_fig1a, benchmark_fig1b, generate_metadata, generate_sbm

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NO_CONVERGENCE = 3


def _default_threads() -> int:
    try:
        return max(1, int(os.environ.get("ANNET_THREADS", "1")))
    except ValueError:
        return 1


def _manifest(args: argparse.Namespace, config: FitConfig | None = None) -> dict:
    inputs = {key: getattr(args, key) for key in ("edges", "metadata", "model")
              if getattr(args, key, None)}
    outputs = {key: getattr(args, key) for key in ("out", "marginals_out")
               if getattr(args, key, None)}
    manifest = {
        "subcommand": args.command,
        "inputs": inputs,
        "outputs": outputs,
        "seed": getattr(args, "seed", None),
        "threads": getattr(args, "threads", None),
        "version": __version__,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    if config is not None:
        manifest["config"] = {
            "k": config.k, "restarts": config.restarts,
            "max_em_steps": config.max_em_steps,
            "max_bp_steps": config.max_bp_steps,
            "bp_tol": config.bp_tol, "em_tol": config.em_tol,
            "seed": config.seed, "bernstein_degree": config.bernstein_degree,
            "reproducible": config.reproducible,
        }
    return manifest


def _prior_to_json(result: FitResult, metadata: MetadataColumn) -> dict:
    prior = result.prior
    if isinstance(prior, DiscretePrior):
        return {"kind": "discrete", "k": prior.k, "K": prior.K,
                "gamma": prior.gamma.flatten().tolist(),
                "labels": list(metadata.labels)}
    return {"kind": "ordered", "k": prior.k, "N": prior.degree,
            "gamma": prior.gamma.flatten().tolist(),
            "x_min": metadata.x_min, "x_max": metadata.x_max}


def _prior_from_json(obj: dict):
    k = int(obj["k"])
    gamma = np.asarray(obj["gamma"], dtype=np.float64)
    if obj["kind"] == "discrete":
        prior = DiscretePrior(k=k, gamma=gamma.reshape(k, int(obj["K"])))
        return prior, tuple(obj.get("labels", ())), 0.0, 1.0
    N = int(obj["N"])
    prior = BernsteinPrior(k=k, degree=N, gamma=gamma.reshape(k, N + 1))
    return prior, None, float(obj.get("x_min", 0.0)), float(obj.get("x_max", 1.0))


def _report(result: FitResult, graph: Graph, metadata: MetadataColumn,
            manifest: dict) -> dict:
    return {
        "manifest": manifest,
        "k": result.theta.k,
        "n": graph.n,
        "m": graph.m,
        "log_likelihood": result.log_likelihood,
        "converged": result.converged,
        "em_steps_used": result.em_steps_used,
        "restart_index": result.restart_index,
        "nmi_vs_metadata": result.nmi_vs_metadata,
        "assignment": result.assignment.tolist(),
        "theta": result.theta.theta.tolist(),
        "prior": _prior_to_json(result, metadata),
        "per_restart": [
            {"restart": r.index, "seed": r.seed,
             "log_likelihood": r.log_likelihood,
             "converged": r.converged, "em_steps": r.em_steps}
            for r in result.per_restart
        ],
    }


def _write_json(path: str | None, payload: dict) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True)
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def cmd_fit(args: argparse.Namespace) -> int:
    if args.k < 1:
        print("error: --k must be >= 1", file=sys.stderr)
        return EXIT_INPUT
    if args.degree is not None and not args.ordered:
        print("error: --degree requires --ordered", file=sys.stderr)
        return EXIT_INPUT
    config = FitConfig(
        k=args.k, restarts=args.restarts, max_em_steps=args.max_em_steps,
        max_bp_steps=args.max_bp_steps, bp_tol=args.tol, em_tol=args.tol,
        seed=args.seed,
        bernstein_degree=args.degree if args.degree is not None else 4,
    )
    with open(args.edges, encoding="utf-8") as fh:
        graph = load_edge_list(fh)
    kind = "ordered" if args.ordered else "discrete"
    with open(args.metadata, encoding="utf-8") as fh:
        metadata = load_metadata(fh, kind, graph.n)

    result = fit(graph, metadata, config, threads=args.threads)
    report = _report(result, graph, metadata, _manifest(args, config))
    _write_json(args.out, report)
    if args.marginals_out:
        with open(args.marginals_out, "w", encoding="utf-8") as fh:
            fh.write("node,community,probability\n")
            for u in range(graph.n):
                for s in range(config.k):
                    fh.write(f"{u},{s},{result.marginals.node[u, s]!r}\n")
    return EXIT_OK if result.converged else EXIT_NO_CONVERGENCE


def cmd_predict(args: argparse.Namespace) -> int:
    with open(args.model, encoding="utf-8") as fh:
        report = json.load(fh)
    prior, labels, x_min, x_max = _prior_from_json(report["prior"])
    if isinstance(prior, DiscretePrior):
        probs = predict_from_metadata(prior, args.value, labels=labels)
    else:
        try:
            raw = float(args.value)
        except ValueError:
            print("error: ordered model needs a numeric value", file=sys.stderr)
            return EXIT_INPUT
        probs = predict_from_metadata(prior, raw, x_min=x_min, x_max=x_max)
    print(json.dumps([float(p) for p in probs]))
    return EXIT_OK


def cmd_generate(args: argparse.Namespace) -> int:
    ss = np.random.SeedSequence(entropy=args.seed)
    g_seed, m_seed = (int(s.generate_state(1, np.uint64)[0]) for s in ss.spawn(2))
    graph, truth = generate_sbm(args.n, args.k, args.cin, args.cout, g_seed)
    metadata = generate_metadata(truth, args.rho, args.K or args.k, m_seed)
    with open(args.prefix + ".edges", "w", encoding="utf-8") as fh:
        write_edge_list(graph, fh)
    with open(args.prefix + ".metadata.csv", "w", encoding="utf-8") as fh:
        write_metadata(metadata, fh)
    with open(args.prefix + ".truth.csv", "w", encoding="utf-8") as fh:
        fh.write("node,label\n")
        for u, t in enumerate(truth):
            fh.write(f"{u},{t}\n")
    print(f"wrote {args.prefix}.edges ({graph.n} nodes, {graph.m} edges), "
          f"{args.prefix}.metadata.csv, {args.prefix}.truth.csv")
    return EXIT_OK


def _read_labels_csv(path: str) -> np.ndarray:
    pairs = {}
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
        if header.strip().lower().replace(" ", "") not in ("node,label", "node,value"):
            raise ValueError(f"{path}: expected header 'node,label'")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            node_s, _, label = line.partition(",")
            pairs[int(node_s)] = label.strip()
    labels = [pairs[node] for node in sorted(pairs)]
    index: dict[str, int] = {}
    codes = []
    for lab in labels:
        if lab not in index:
            index[lab] = len(index)
        codes.append(index[lab])
    return np.asarray(codes, dtype=np.int64)


def cmd_nmi(args: argparse.Namespace) -> int:
    a = _read_labels_csv(args.labels_a)
    b = _read_labels_csv(args.labels_b)
    print(f"{nmi(a, b):.6f}")
    return EXIT_OK


def cmd_benchmark(args: argparse.Namespace) -> int:
    config = FitConfig(k=2, restarts=args.restarts, seed=args.seed)
    manifest = _manifest(args, config)
    if args.figure == "fig1a":
        rhos = [float(r) for r in args.rhos.split(",")]
        diffs = [float(d) for d in args.diffs.split(",")]
        rows = benchmark_fig1a(args.n, args.c_mean, rhos, diffs, args.reps,
                               config, threads=args.threads)
        lines = ["rho,diff,mean_acc,stderr,reps"]
        lines += [f"{r},{d},{acc:.6f},{se:.6f},{reps}"
                  for r, d, acc, se, reps in rows]
        csv_text = "\n".join(lines) + "\n"
        if args.out:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(csv_text)
            _write_json(args.out + ".manifest.json", manifest)
        print(csv_text, end="")
        return EXIT_OK
    success_with, success_without, acc = benchmark_fig1b(
        args.n, args.reps, config, threads=args.threads,
        c_in=args.cin, c_out=args.cout, match_rate=args.match)
    print(f"success_with_metadata {success_with:.4f}")
    print(f"success_without_metadata {success_without:.4f}")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write("rep,acc_with,acc_without\n")
            for rep, (aw, ao) in enumerate(acc):
                fh.write(f"{rep},{aw:.6f},{ao:.6f}\n")
        _write_json(args.out + ".manifest.json", manifest)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="annet",
        description="Community detection in annotated networks")
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit the model to a network")
    p_fit.add_argument("--edges", required=True)
    p_fit.add_argument("--metadata", required=True)
    p_fit.add_argument("--k", type=int, required=True)
    p_fit.add_argument("--ordered", action="store_true",
                       help="treat metadata as ordered scalars")
    p_fit.add_argument("--degree", type=int, default=None,
                       help="Bernstein degree for ordered metadata (default 4)")
    p_fit.add_argument("--restarts", type=int, default=10)
    p_fit.add_argument("--max-em-steps", type=int, default=100)
    p_fit.add_argument("--max-bp-steps", type=int, default=20)
    p_fit.add_argument("--tol", type=float, default=1e-6)
    p_fit.add_argument("--seed", type=int, default=0)
    p_fit.add_argument("--threads", type=int, default=_default_threads())
    p_fit.add_argument("--out", default=None)
    p_fit.add_argument("--marginals-out", default=None)
    p_fit.set_defaults(func=cmd_fit)

    p_pred = sub.add_parser("predict", help="predict membership from metadata alone")
    p_pred.add_argument("--model", required=True, help="fit report JSON")
    p_pred.add_argument("--value", required=True)
    p_pred.set_defaults(func=cmd_predict)

    p_gen = sub.add_parser("generate", help="write a planted benchmark instance")
    p_gen.add_argument("--n", type=int, required=True)
    p_gen.add_argument("--k", type=int, required=True)
    p_gen.add_argument("--cin", type=float, required=True)
    p_gen.add_argument("--cout", type=float, required=True)
    p_gen.add_argument("--rho", type=float, default=1.0)
    p_gen.add_argument("--K", type=int, default=None)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--prefix", default="instance")
    p_gen.set_defaults(func=cmd_generate)

    p_nmi = sub.add_parser("nmi", help="NMI between two node,label CSVs")
    p_nmi.add_argument("labels_a")
    p_nmi.add_argument("labels_b")
    p_nmi.set_defaults(func=cmd_nmi)

    p_bench = sub.add_parser("benchmark", help="run a benchmark protocol")
    bench_sub = p_bench.add_subparsers(dest="figure", required=True)
    p_1a = bench_sub.add_parser("fig1a")
    p_1a.add_argument("--n", type=int, default=10000)
    p_1a.add_argument("--c-mean", type=float, default=8.0)
    p_1a.add_argument("--rhos", default="0.5,0.6,0.7,0.8,0.9")
    p_1a.add_argument("--diffs", default="0,2,4,6,8,10,12")
    p_1a.add_argument("--reps", type=int, default=10)
    p_1a.add_argument("--restarts", type=int, default=10)
    p_1a.add_argument("--seed", type=int, default=0)
    p_1a.add_argument("--threads", type=int, default=_default_threads())
    p_1a.add_argument("--out", default=None)
    p_1a.set_defaults(func=cmd_benchmark)
    p_1b = bench_sub.add_parser("fig1b")
    p_1b.add_argument("--n", type=int, default=10000)
    p_1b.add_argument("--reps", type=int, default=100)
    p_1b.add_argument("--cin", type=float, default=20.0)
    p_1b.add_argument("--cout", type=float, default=4.0)
    p_1b.add_argument("--match", type=float, default=0.65)
    p_1b.add_argument("--restarts", type=int, default=10)
    p_1b.add_argument("--seed", type=int, default=0)
    p_1b.add_argument("--threads", type=int, default=_default_threads())
    p_1b.add_argument("--out", default=None)
    p_1b.set_defaults(func=cmd_benchmark)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad flags, which matches the input-error code
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
