"""Command-line entry point: ``sobgnn <command> [options]``.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
Every command writes its outputs atomically plus a ``manifest.json``
recording the resolved configuration, input hashes, seeds and version.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import sys
import time

import numpy as np

from . import __version__
from .errors import (
    DataError,
    DimensionError,
    DomainError,
    IllConditionedError,
    NumericalError,
    ParameterError,
    SearchError,
)
from .graph_build import Dataset, Graph, knn_gaussian_graph, load_graph, read_features, read_labels, save_graph
from .network import init_params, load_checkpoint, model_backward, model_forward, save_checkpoint
from .sobolev_ops import SobolevCascade, build_cascade, load_cascade, save_cascade, sparse_sobolev_term
from .sparse_core import CsrMatrix, add_scaled_identity, atomic_write_text, count_ops, laplacian, sym_normalize
from .spectral import condition_number, hadamard_spectrum_check, penalization_curves
from .training import (
    Choice,
    LogUniform,
    TrainConfig,
    accuracy,
    derive_seed,
    evaluate,
    model_cascade,
    run_search,
    train,
)

log = logging.getLogger("sobgnn")

EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 2, 3, 4
SEED_ENV = "SOBGNN_SEED"
THEOREM_CHECK_NODES = 200


# -- helpers ---------------------------------------------------------------------

def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json(path, payload) -> None:
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_csv(path, header, rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    atomic_write_text(path, buf.getvalue())


def _write_manifest(path, args, config: dict, inputs: list, seeds: dict, outputs: list) -> None:
    _write_json(path, {
        "command": args.command,
        "argv": list(args.argv),
        "config": config,
        "inputs": {os.fspath(p): _sha256(p) for p in inputs},
        "seeds": seeds,
        "version": __version__,
        "outputs": [os.fspath(p) for p in outputs],
    })


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _bandwidth(text: str):
    if text == "auto":
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bandwidth must be 'auto' or a number, got {text!r}") from None


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise ParameterError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def _read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from None


CONFIG_FLAGS = {
    "lr": "learning_rate",
    "weight_decay": "weight_decay",
    "epochs": "max_epochs",
    "patience": "patience",
    "eps": "eps",
    "alpha": "alpha",
    "layers": "n_layers",
    "hidden": "hidden_units",
    "seed": "seed",
    "model": "model",
    "dropout": "dropout",
    "combination": "combination",
}


def resolve_config(args) -> TrainConfig:
    """Layer defaults < ``SOBGNN_SEED`` < ``--config`` file < explicit flags."""
    values = {"seed": _default_seed()}
    if getattr(args, "config", None):
        data = _read_json(args.config)
        if not isinstance(data, dict):
            raise DataError(f"{args.config}: config file must hold a JSON object")
        values.update(data)
    for flag, name in CONFIG_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            values[name] = value
    if getattr(args, "bias", False):
        values["bias"] = True
    return TrainConfig.from_dict(values)


def _load_inputs(args, config: TrainConfig) -> tuple[Dataset, Graph, dict]:
    x = read_features(args.features)
    y = read_labels(args.labels)
    graph = load_graph(args.graph)
    if x.shape[0] != len(y):
        raise DataError(f"{args.features} has {x.shape[0]} rows but {args.labels} has {len(y)} labels")
    if graph.n_nodes != len(y):
        raise DataError(f"{args.graph} has {graph.n_nodes} nodes but the dataset has {len(y)}")
    split_seed = config.seed if args.split_seed is None else args.split_seed
    test_seed = split_seed if args.test_seed is None else args.test_seed
    dataset = Dataset.from_split(x, y, tuple(args.fractions), seed=split_seed, test_seed=test_seed)
    split = {"fractions": list(args.fractions), "split_seed": split_seed, "test_seed": test_seed}
    return dataset, graph, split


def _cascade(args, graph: Graph, config: TrainConfig) -> SobolevCascade:
    """Build the model's operators, reusing ``--cache-cascade`` when it matches."""
    cache = getattr(args, "cache_cascade", None)
    if not cache or config.model == "gcn":
        return model_cascade(graph, config)
    key = f"{_sha256(args.graph)[:16]}-eps{config.eps!r}-alpha{config.alpha}"
    directory = os.path.join(cache, key)
    if os.path.exists(os.path.join(directory, "cascade.json")):
        log.info("loading cached cascade from %s", directory)
        return load_cascade(directory, eps=config.eps, alpha=config.alpha)
    cascade = build_cascade(graph.adjacency, config.eps, config.alpha)
    save_cascade(cascade, directory)
    return cascade


def induced_subgraph(a: CsrMatrix, nodes) -> CsrMatrix:
    """Rows and columns of ``a`` restricted to ``nodes`` (relabelled in the given order)."""
    nodes = np.asarray(nodes, dtype=np.int64)
    lookup = np.full(a.n_rows, -1, dtype=np.int64)
    lookup[nodes] = np.arange(len(nodes))
    rows, cols = lookup[a.row_indices()], lookup[a.col_idx]
    keep = (rows >= 0) & (cols >= 0)
    return CsrMatrix.from_coo(rows[keep], cols[keep], a.values[keep], (len(nodes), len(nodes)))


def bfs_nodes(a: CsrMatrix, limit: int, start: int = 0) -> np.ndarray:
    """Up to ``limit`` nodes in breadth-first order from ``start``."""
    seen = np.zeros(a.n_rows, dtype=bool)
    seen[start] = True
    order = [start]
    head = 0
    while head < len(order) and len(order) < limit:
        i = order[head]
        head += 1
        for j in a.col_idx[a.row_ptr[i]:a.row_ptr[i + 1]]:
            if not seen[j]:
                seen[j] = True
                order.append(int(j))
                if len(order) == limit:
                    break
    return np.array(order, dtype=np.int64)


# -- commands -------------------------------------------------------------------------

def cmd_build_graph(args) -> int:
    x = read_features(args.features)
    graph = knn_gaussian_graph(x, k=args.knn, bandwidth=args.bandwidth, symmetrization=args.symmetrize)
    save_graph(graph, args.out)
    manifest = args.manifest or f"{args.out}.manifest.json"
    config = {"knn": args.knn, "bandwidth": args.bandwidth, "symmetrize": args.symmetrize}
    _write_manifest(manifest, args, config, [args.features], {}, [args.out])
    print(f"graph: {graph.n_nodes} nodes, {graph.n_edges} edges, bandwidth {graph.meta['kernel_bandwidth']:.6g}")
    return 0


def cmd_train(args) -> int:
    config = resolve_config(args)
    dataset, graph, split = _load_inputs(args, config)
    cascade = _cascade(args, graph, config)
    params, history = train(dataset, graph, config, cascade)
    probs = model_forward(dataset.features, cascade, params).probs
    metrics = {
        "best_epoch": history.best_epoch,
        "epochs_run": len(history.epochs),
        "val_accuracy": history.best_val_accuracy,
        "test_accuracy": accuracy(probs, dataset.labels, dataset.test_mask),
    }
    out = args.out
    paths = [os.path.join(out, n) for n in ("checkpoint.json", "history.csv", "metrics.json")]
    save_checkpoint(paths[0], params, cascade, model=config.model,
                    metadata={"config": config.to_dict(), "split": split})
    _write_csv(paths[1], ["epoch", "train_loss", "train_accuracy", "val_accuracy"],
               [[r["epoch"], repr(r["train_loss"]), r["train_accuracy"], r["val_accuracy"]]
                for r in history.records()])
    _write_json(paths[2], metrics)
    _write_manifest(os.path.join(out, "manifest.json"), args, config.to_dict(),
                    [args.features, args.labels, args.graph], {"model": config.seed, **split}, paths)
    print(f"val accuracy {metrics['val_accuracy']:.4f}  test accuracy {metrics['test_accuracy']:.4f}")
    return 0


def _evaluate_checkpoint(args) -> int:
    params, header = load_checkpoint(args.checkpoint)
    meta = header["metadata"]
    config = TrainConfig.from_dict(meta.get("config", {}))
    split = meta.get("split", {})
    for name, attr in (("fractions", "fractions"), ("split_seed", "split_seed"), ("test_seed", "test_seed")):
        if getattr(args, attr) is None and name in split:
            setattr(args, attr, split[name])
    if args.fractions is None:
        args.fractions = [0.1, 0.45, 0.45]
    dataset, graph, split = _load_inputs(args, config)
    cascade = _cascade(args, graph, config)
    if cascade.alpha != header["alpha"]:
        raise DataError(f"checkpoint has alpha={header['alpha']}, cascade has {cascade.alpha}")
    probs = model_forward(dataset.features, cascade, params).probs
    metrics = {"test_accuracy": accuracy(probs, dataset.labels, dataset.test_mask),
               "checkpoint": os.fspath(args.checkpoint)}
    path = os.path.join(args.out, "metrics.json")
    _write_json(path, metrics)
    _write_manifest(os.path.join(args.out, "manifest.json"), args, config.to_dict(),
                    [args.features, args.labels, args.graph, args.checkpoint], split, [path])
    print(f"test accuracy {metrics['test_accuracy']:.4f}")
    return 0


def cmd_evaluate(args) -> int:
    if args.checkpoint:
        return _evaluate_checkpoint(args)
    if args.fractions is None:
        args.fractions = [0.1, 0.45, 0.45]
    config = resolve_config(args)
    dataset, graph, split = _load_inputs(args, config)
    metrics = evaluate(dataset, graph, config, n_seeds=args.seeds, n_resamples=args.bootstrap,
                       level=args.level, jobs=args.jobs)
    seeds = [derive_seed(config.seed, i) for i in range(args.seeds)]
    payload = {**metrics.to_dict(), "level": args.level, "n_resamples": args.bootstrap, "model": config.model}
    path = os.path.join(args.out, "metrics.json")
    _write_json(path, payload)
    _write_manifest(os.path.join(args.out, "manifest.json"), args, config.to_dict(),
                    [args.features, args.labels, args.graph], {"runs": seeds, **split}, [path])
    print(f"test accuracy {metrics.mean:.4f}  {100 * args.level:g}% CI [{metrics.ci_low:.4f}, {metrics.ci_high:.4f}]")
    return 0


def parse_space(data):
    """Search space from JSON: a list of override objects, or a mapping whose values are
    ``{"choice": [...]}``, ``{"loguniform": [low, high]}`` or a fixed value."""
    if isinstance(data, list):
        if not all(isinstance(d, dict) for d in data):
            raise DataError("a list search space must contain only JSON objects")
        return data
    if not isinstance(data, dict):
        raise DataError("search space must be a JSON object or list")
    space = {}
    for name, spec in data.items():
        if isinstance(spec, dict) and set(spec) == {"choice"}:
            space[name] = Choice(spec["choice"])
        elif isinstance(spec, dict) and set(spec) == {"loguniform"}:
            low, high = spec["loguniform"]
            space[name] = LogUniform(float(low), float(high))
        elif isinstance(spec, dict):
            raise DataError(f"search space entry {name!r} must use 'choice' or 'loguniform'")
        else:
            space[name] = spec
    return space


def cmd_search(args) -> int:
    if args.fractions is None:
        args.fractions = [0.1, 0.45, 0.45]
    config = resolve_config(args)
    dataset, graph, split = _load_inputs(args, config)
    space = parse_space(_read_json(args.space)) if args.space else None
    trials_path = os.path.join(args.out, "trials.jsonl")
    result = run_search(dataset, graph, space, n_trials=args.trials, val_seeds=args.val_seeds,
                        base_config=config, seed=config.seed, log_path=trials_path, jobs=args.jobs)
    best_path = os.path.join(args.out, "best_config.json")
    _write_json(best_path, result.best_config.to_dict())
    inputs = [args.features, args.labels, args.graph] + ([args.space] if args.space else [])
    _write_manifest(os.path.join(args.out, "manifest.json"), args, config.to_dict(), inputs,
                    {"search": config.seed, "val_seeds": list(range(args.val_seeds)), **split},
                    [trials_path, best_path])
    best = max(t["val_mean"] for t in result.trials if t["val_mean"] is not None)
    print(f"best validation accuracy {best:.4f}; config written to {best_path}")
    return 0


def cmd_spectral_report(args) -> int:
    graph = load_graph(args.graph)
    adjacency = graph.adjacency
    seeds = {}
    if args.subsample is not None and args.subsample < graph.n_nodes:
        seed = _default_seed() if args.seed is None else args.seed
        nodes = np.sort(np.random.default_rng(seed).choice(graph.n_nodes, args.subsample, replace=False))
        adjacency = induced_subgraph(adjacency, nodes)
        seeds["subsample"] = seed
    n = adjacency.n_rows
    if n > args.size_cap:
        raise ParameterError(
            f"graph has {n} nodes, above the dense spectral cap of {args.size_cap}; "
            f"rerun with --subsample M (M <= {args.size_cap}) or raise --size-cap"
        )
    lap = laplacian(adjacency)
    table = penalization_curves(lap, args.rho)
    rows = []
    for i in range(n):
        row = [i, repr(float(table.eigenvalues[i]))]
        row += [repr(float(table.nonsparse[r][i])) for r in table.rho_values]
        row += [repr(float(table.sparse[r][i])) for r in table.rho_values]
        rows.append(row)
    header = (["index", "lambda"] + [f"curve_nonsparse_rho_{r}" for r in table.rho_values]
              + [f"curve_sparse_rho_{r}" for r in table.rho_values])
    conditioning = []
    for eps in args.eps:
        entry = {"eps": eps}
        try:
            entry["kappa"] = condition_number(add_scaled_identity(lap, eps))
            entry["ill_conditioned"] = False
        except IllConditionedError as exc:
            entry["kappa"] = None
            entry["ill_conditioned"] = True
            entry["reason"] = str(exc)
        conditioning.append(entry)
    # The identity holds for any symmetric matrix, so a leading block suffices on big graphs.
    m = min(n, THEOREM_CHECK_NODES)
    block = lap.to_dense()[:m, :m]
    summary = {
        "n_nodes": n,
        "n_edges": int(adjacency.nnz // 2),
        "lambda_max": float(table.eigenvalues[-1]),
        "rho": list(table.rho_values),
        "cosine_similarity": {str(r): table.similarity(r) for r in table.rho_values},
        "condition_numbers": conditioning,
        "theorem_residual": hadamard_spectrum_check(block),
        "theorem_residual_nodes": m,
    }
    csv_path = os.path.join(args.out, "spectral.csv")
    json_path = os.path.join(args.out, "spectral.json")
    _write_csv(csv_path, header, rows)
    _write_json(json_path, summary)
    config = {"eps": args.eps, "rho": args.rho, "subsample": args.subsample, "size_cap": args.size_cap}
    _write_manifest(os.path.join(args.out, "manifest.json"), args, config, [args.graph], seeds,
                    [csv_path, json_path])
    print(f"spectral report for {n} nodes; theorem residual {summary['theorem_residual']:.3e}")
    return 0


def _epoch_cost(x, labels, mask, cascade, params) -> tuple[int, float, float]:
    """Op count and wall time of one forward and one backward pass."""
    with count_ops() as ops:
        t0 = time.perf_counter()
        trace = model_forward(x, cascade, params)
        t1 = time.perf_counter()
        model_backward(trace, labels, mask, params)
        t2 = time.perf_counter()
    return ops.multiply_adds, t1 - t0, t2 - t1


def cmd_benchmark(args) -> int:
    graph = load_graph(args.graph)
    a = graph.adjacency
    seed = _default_seed() if args.seed is None else args.seed
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(graph.n_nodes, args.width))
    labels = rng.integers(0, args.classes, size=graph.n_nodes)
    mask = np.ones(graph.n_nodes, dtype=bool)

    t0 = time.perf_counter()
    cascade = build_cascade(a, args.eps, args.alpha)
    build_total = time.perf_counter() - t0

    nodes = bfs_nodes(a, args.dense_nodes)
    sub = add_scaled_identity(induced_subgraph(a, nodes), args.eps)
    pattern = (sub.to_dense() != 0).astype(np.float64)
    power = np.eye(len(nodes))

    rows = []
    for rho in range(1, args.alpha + 1):
        t0 = time.perf_counter()
        sym_normalize(sparse_sobolev_term(a, args.eps, rho))
        build = time.perf_counter() - t0
        power = np.minimum(power @ pattern, 1.0)  # structural fill-in, immune to underflow
        rows.append({
            "rho": rho,
            "nnz": cascade.operator(rho).nnz,
            "build_seconds": build,
            "dense_power_nnz": int(np.count_nonzero(power)),
            "sparse_subgraph_nnz": sub.nnz,
        })

    params = init_params(args.width, args.hidden, args.classes, args.layers, args.alpha, rng)
    flops, fwd, bwd = [], [], []
    for _ in range(args.repeats):
        f, tf, tb = _epoch_cost(x, labels, mask, cascade, params)
        flops.append(f)
        fwd.append(tf)
        bwd.append(tb)
    double = build_cascade(a, args.eps, 2 * args.alpha)
    double_params = init_params(args.width, args.hidden, args.classes, args.layers, 2 * args.alpha, rng)
    double_flops, _, _ = _epoch_cost(x, labels, mask, double, double_params)

    summary = {
        "n_nodes": graph.n_nodes,
        "n_edges": graph.n_edges,
        "alpha": args.alpha,
        "eps": args.eps,
        "cascade_build_seconds": build_total,
        "forward_seconds": float(np.median(fwd)),
        "backward_seconds": float(np.median(bwd)),
        "propagation_flops_per_epoch": flops[0],
        "propagation_flops_per_epoch_double_alpha": double_flops,
        "flops_ratio_double_alpha": double_flops / flops[0] if flops[0] else None,
        "dense_subgraph_nodes": int(len(nodes)),
        "per_rho": rows,
    }
    csv_path = os.path.join(args.out, "benchmark.csv")
    json_path = os.path.join(args.out, "benchmark.json")
    keys = ["rho", "nnz", "build_seconds", "dense_power_nnz", "sparse_subgraph_nnz"]
    _write_csv(csv_path, keys, [[r[k] for k in keys] for r in rows])
    _write_json(json_path, summary)
    config = {k: getattr(args, k) for k in ("alpha", "eps", "width", "hidden", "classes", "layers",
                                              "repeats", "dense_nodes")}
    _write_manifest(os.path.join(args.out, "manifest.json"), args, config, [args.graph], {"features": seed},
                    [csv_path, json_path])
    for r in rows:
        print(f"rho={r['rho']}: nnz {r['nnz']}, dense-power nnz on {len(nodes)} nodes {r['dense_power_nnz']}")
    print(f"flops/epoch {flops[0]} (x{summary['flops_ratio_double_alpha']:.2f} at alpha={2 * args.alpha})")
    return 0


# -- argument parsing ---------------------------------------------------------------

def _add_data_args(p: argparse.ArgumentParser, fractions_default=None) -> None:
    p.add_argument("--features", required=True, help="CSV (one row per node) or .coo feature file")
    p.add_argument("--labels", required=True, help="one integer class label per line")
    p.add_argument("--graph", required=True, help="graph file written by build-graph")
    p.add_argument("--fractions", type=float, nargs=3, metavar=("TRAIN", "VAL", "TEST"),
                   default=fractions_default, help="split fractions (default 0.1 0.45 0.45)")
    p.add_argument("--split-seed", type=int, help="train/val split seed (default: the run seed)")
    p.add_argument("--test-seed", type=int, help="test split seed (default: the split seed)")


def _add_model_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file of training settings; flags override it")
    p.add_argument("--model", choices=["sobgnn", "gcn"])
    p.add_argument("--alpha", type=int)
    p.add_argument("--eps", type=float)
    p.add_argument("--layers", type=int)
    p.add_argument("--hidden", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--weight-decay", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--dropout", type=float)
    p.add_argument("--combination", choices=["scalar", "projection"])
    p.add_argument("--bias", action="store_true", help="add per-filter bias vectors")
    p.add_argument("--seed", type=int, help=f"run seed (fallback: ${SEED_ENV}, then 0)")
    p.add_argument("--cache-cascade", metavar="DIR", help="reuse propagation operators across runs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sobgnn", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-graph", help="k-NN Gaussian-kernel graph from node features")
    p.add_argument("--features", required=True)
    p.add_argument("--knn", type=int, default=30)
    p.add_argument("--bandwidth", type=_bandwidth, default="auto")
    p.add_argument("--symmetrize", choices=["union", "mutual"], default="union")
    p.add_argument("--out", required=True, help="output graph file")
    p.add_argument("--manifest", help="manifest path (default: OUT.manifest.json)")
    p.set_defaults(func=cmd_build_graph)

    p = sub.add_parser("train", help="train one model and report validation/test accuracy")
    _add_data_args(p, [0.1, 0.45, 0.45])
    _add_model_args(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="multi-seed test accuracy with a bootstrap interval")
    _add_data_args(p)
    _add_model_args(p)
    p.add_argument("--seeds", type=int, default=50)
    p.add_argument("--bootstrap", type=int, default=1000)
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--checkpoint", help="score a saved model on the test split instead of retraining")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("search", help="random hyperparameter search on validation accuracy")
    _add_data_args(p)
    _add_model_args(p)
    p.add_argument("--space", help="JSON search space (default: built-in space)")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--val-seeds", type=int, default=5)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("spectral-report", help="penalization curves, condition numbers, Kronecker check")
    p.add_argument("--graph", required=True)
    p.add_argument("--eps", type=_float_list, default=[0.0, 0.1, 0.5, 1.0, 2.0, 4.0])
    p.add_argument("--rho", type=_int_list, default=[1, 2, 3, 4, 5])
    p.add_argument("--size-cap", type=int, default=2000)
    p.add_argument("--subsample", type=int, help="analyse an induced subgraph on this many random nodes")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_spectral_report)

    p = sub.add_parser("benchmark", help="sparsity, timing and op counts of the operator cascade")
    p.add_argument("--graph", required=True)
    p.add_argument("--alpha", type=int, default=4)
    p.add_argument("--eps", type=float, default=1.0)
    p.add_argument("--width", type=int, default=64, help="input feature width")
    p.add_argument("--hidden", type=int, default=32)
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--dense-nodes", type=int, default=100, help="subgraph size for the dense-power comparison")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_benchmark)
    return parser


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    args.argv = argv
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ParameterError as exc:
        print(f"sobgnn: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, DimensionError, DomainError, OSError) as exc:
        print(f"sobgnn: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, SearchError, ArithmeticError) as exc:
        print(f"sobgnn: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
