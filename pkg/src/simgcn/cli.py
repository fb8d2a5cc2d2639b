"""Command-line front end.

One executable, one JSON config schema, one error vocabulary. Every run
echoes its fully-resolved config before executing, all outputs are
deterministic in the config seed, and no command mutates its inputs.

Exit codes: 0 success, 1 verification failure, 2 input error, 3 internal.
"""

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from . import accel, dataset, gcn, graph
from .errors import DivergenceError, InvalidConfig, SimgcnError
from .experiment import (
    ExperimentConfig,
    cross_validate,
    compute_metrics,
    format_report_table,
    format_sweep_table,
    ratio_sweep,
    save_report,
    save_sweep,
)
from .seeding import derive_seed
from .serialize import dumps, read_json, write_json


def _add_config_flags(p: argparse.ArgumentParser, protocol: bool = True) -> None:
    p.add_argument("--config", help="JSON config file; flags override individual fields")
    p.add_argument("-v", "--verbose", action="store_true", help="print extra detail")
    p.add_argument("--seed", type=int, default=None, help="master seed override")
    p.add_argument("--mode", choices=["supervised", "semi_supervised"], default=None)
    p.add_argument("--k", type=int, default=None, help="neighbors per node")
    p.add_argument("--sigma", default=None, help="kernel bandwidth, or 'auto'")
    p.add_argument("--symmetrize", choices=["max", "none"], default=None)
    p.add_argument("--binary-weights", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--standardize", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--hidden", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--learning-rate", type=float, default=None)
    p.add_argument("--dropout", type=float, default=None)
    p.add_argument("--weight-decay", type=float, default=None)
    p.add_argument("--optimizer", choices=["adam", "gd"], default=None)
    p.add_argument("--baseline-accuracy", type=float, default=None)
    p.add_argument("--include-traces", action=argparse.BooleanOptionalAction, default=None)
    if protocol:
        p.add_argument("--folds", type=int, default=None)
        p.add_argument("--labeled-fraction", type=float, default=None)


def _resolve_config(args) -> ExperimentConfig:
    doc = read_json(args.config) if getattr(args, "config", None) else {}
    cfg = ExperimentConfig.from_dict(doc)

    graph_cfg = cfg.graph
    if args.k is not None:
        graph_cfg = replace(graph_cfg, k=args.k)
    if args.sigma is not None:
        sigma = None if args.sigma == "auto" else float(args.sigma)
        graph_cfg = replace(graph_cfg, sigma=sigma)
    if args.symmetrize is not None:
        graph_cfg = replace(graph_cfg, symmetrize=args.symmetrize)
    if args.binary_weights is not None:
        graph_cfg = replace(graph_cfg, binary_weights=args.binary_weights)

    hyper = cfg.hyper
    if args.hidden is not None:
        hyper = replace(hyper, hidden=args.hidden)
    if args.epochs is not None:
        hyper = replace(hyper, epochs=args.epochs)
    if args.learning_rate is not None:
        hyper = replace(hyper, learning_rate=args.learning_rate)
    if args.dropout is not None:
        hyper = replace(hyper, dropout=args.dropout)
    if args.weight_decay is not None:
        hyper = replace(hyper, weight_decay=args.weight_decay)
    if args.optimizer is not None:
        hyper = replace(hyper, optimizer=args.optimizer)

    cfg = replace(cfg, graph=graph_cfg, hyper=hyper)
    if args.mode is not None:
        cfg = replace(cfg, mode=args.mode)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.standardize is not None:
        cfg = replace(cfg, standardize=args.standardize)
    if args.baseline_accuracy is not None:
        cfg = replace(cfg, baseline_accuracy=args.baseline_accuracy)
    if args.include_traces is not None:
        cfg = replace(cfg, include_traces=args.include_traces)
    if getattr(args, "folds", None) is not None:
        cfg = replace(cfg, fold_count=args.folds)
    if getattr(args, "labeled_fraction", None) is not None:
        cfg = replace(cfg, labeled_fraction=args.labeled_fraction)
    if getattr(args, "features", None):
        cfg = replace(cfg, features_path=args.features)
    if getattr(args, "labels", None):
        cfg = replace(cfg, labels_path=args.labels)
    return cfg


def _echo_config(cfg: ExperimentConfig) -> None:
    print("resolved config: " + dumps(cfg.to_dict()))


def _print_confusion(confusion, class_names) -> None:
    width = max(len(str(n)) for n in class_names)
    print("confusion matrix (rows = actual, columns = predicted):")
    for name, row in zip(class_names, confusion):
        cells = " ".join(f"{int(v):6d}" for v in row)
        print(f"  {str(name).rjust(width)} {cells}")


def _load_dataset(cfg: ExperimentConfig):
    if not cfg.features_path or not cfg.labels_path:
        raise InvalidConfig("features and labels paths are required")
    features = dataset.load_features(cfg.features_path)
    labels = dataset.load_labels(cfg.labels_path)
    if labels.n != features.n:
        raise InvalidConfig(f"{features.n} feature rows but {labels.n} label rows")
    return features, labels


# ---------------------------------------------------------------------------
# commands


def cmd_synth(args) -> int:
    spec = {
        "classes": args.classes,
        "per_class": args.per_class,
        "dims": args.dims,
        "center_distance": args.center_distance,
        "noise_std": args.noise_std,
        "seed": args.seed,
    }
    print("resolved config: " + dumps(spec))
    features, labels = dataset.synth_blobs(**spec)
    out = args.out_dir.rstrip("/")
    os.makedirs(out or ".", exist_ok=True)
    dataset.save_features(features, f"{out}/features.csv")
    dataset.save_labels(labels, f"{out}/labels.csv")
    write_json(spec, f"{out}/synth_spec.json")
    print(f"wrote {features.n}x{features.d} features and labels to {out}/")
    return 0


def cmd_graph(args) -> int:
    cfg = _resolve_config(args)
    _echo_config(cfg)
    features = dataset.load_features(args.features)
    if cfg.standardize:
        features = dataset.standardize_features(features)
    subset = None
    if args.subset_file:
        subset = np.asarray(read_json(args.subset_file), dtype=np.int64)
    g, _ = graph.build_graph(features, args.graph_mode, subset, cfg.graph)
    graph.save_graph(g, args.out)
    print(f"wrote graph: n={g.n} edges={g.edge_count} sigma={g.kernel_sigma:.6g} -> {args.out}")
    if args.verbose:
        deg = g.out_degrees()
        print(f"out-degree min/mean/max: {deg.min()}/{deg.mean():.2f}/{deg.max()}")
    return 0


def cmd_train(args) -> int:
    cfg = _resolve_config(args)
    if cfg.fold_count is not None:
        raise InvalidConfig("train selects the labeled_fraction protocol; unset fold_count")
    _echo_config(cfg)
    features, labels = _load_dataset(cfg)
    if cfg.standardize:
        features = dataset.standardize_features(features)
    if args.mask_file:
        mask = dataset.load_mask(args.mask_file)
    elif cfg.labeled_fraction is not None:
        mask = dataset.make_label_mask(
            labels, cfg.labeled_fraction, derive_seed(cfg.seed, "mask")
        )
    else:
        raise InvalidConfig("pass --labeled-fraction or --mask-file")
    _, S = graph.build_graph(features, "semi_supervised", config=cfg.graph)
    hyper = replace(cfg.hyper, seed=derive_seed(cfg.seed, "train", 0))
    model, trace = gcn.train(S, features.values, labels, mask, hyper)
    gcn.save_model(model, args.model_out)
    if args.mask_out:
        dataset.save_mask(mask, args.mask_out, cfg.seed, cfg.labeled_fraction or 0.0)
    print(
        f"trained {hyper.epochs} epochs: final loss {trace.losses[-1]:.6f}, "
        f"train accuracy {trace.final_train_accuracy:.4f} -> {args.model_out}"
        if hyper.epochs
        else f"trained 0 epochs (initialization only) -> {args.model_out}"
    )
    if args.verbose and hyper.epochs:
        print(
            f"loss {trace.losses[0]:.6f} -> {trace.losses[-1]:.6f} over {hyper.epochs} epochs, "
            f"wall time {trace.wall_time:.2f}s"
        )
    return 0


def cmd_eval(args) -> int:
    cfg = _resolve_config(args)
    _echo_config(cfg)
    features, labels = _load_dataset(cfg)
    if cfg.standardize:
        features = dataset.standardize_features(features)
    model = gcn.load_model(args.model)
    _, S = graph.build_graph(features, "semi_supervised", config=cfg.graph)
    pred = gcn.predict(model, S, features.values)
    if args.mask_file:
        mask = dataset.load_mask(args.mask_file)
        eval_idx = np.flatnonzero(~mask.mask)
    else:
        eval_idx = np.arange(features.n)
    accuracy, confusion, recall = compute_metrics(pred, labels, eval_idx)
    print(f"accuracy over {eval_idx.size} node(s): {accuracy:.4f}")
    if args.verbose:
        _print_confusion(confusion, labels.class_names)
    for name, r in zip(labels.class_names, recall):
        shown = "n/a" if np.isnan(r) else f"{r:.4f}"
        print(f"  recall[{name}] = {shown}")
    if args.report_out:
        write_json(
            {
                "config": cfg.to_dict(),
                "fingerprint": cfg.fingerprint(),
                "accuracy": accuracy,
                "confusion_matrix": confusion.astype(int),
                "per_class_recall": [None if np.isnan(r) else float(r) for r in recall],
                "class_names": labels.class_names,
                "evaluated_count": int(eval_idx.size),
            },
            args.report_out,
        )
    return 0


def cmd_cv(args) -> int:
    cfg = _resolve_config(args)
    if cfg.fold_count is None:
        cfg = replace(cfg, fold_count=5)
    _echo_config(cfg)
    features, labels = _load_dataset(cfg)
    report = cross_validate(features, labels, cfg)
    print(format_report_table(report))
    if args.verbose:
        _print_confusion(report.confusion, labels.class_names)
        times = ", ".join(f"{t.wall_time:.2f}s" for t in report.traces)
        print(f"fold wall times: {times}")
    save_report(report, args.report_out)
    print(f"report -> {args.report_out}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _resolve_config(args)
    _echo_config(cfg)
    features, labels = _load_dataset(cfg)
    ratios = [float(r) for r in args.ratios.split(",") if r]
    seeds = [int(s) for s in args.sweep_seeds.split(",") if s]
    result = ratio_sweep(features, labels, ratios, seeds, cfg)
    print(format_sweep_table(result))
    if args.verbose:
        for row in result.rows:
            accs = ", ".join(f"{a:.4f}" for a in row.accuracies)
            print(f"  {row.mode} @ {row.ratio}: [{accs}]")
    save_sweep(result, args.report_out)
    print(f"report -> {args.report_out}")
    return 0


def cmd_gradcheck(args) -> int:
    print(
        "resolved config: "
        + dumps(
            {
                "n": args.n,
                "d": args.d,
                "hidden": args.hidden,
                "classes": args.classes,
                "k": args.k,
                "seed": args.seed,
                "step": args.step,
                "weight_decay": args.weight_decay,
            }
        )
    )
    result = gcn.gradient_check(
        n=args.n,
        d=args.d,
        hidden=args.hidden,
        C=args.classes,
        k=args.k,
        seed=args.seed,
        step=args.step,
        weight_decay=args.weight_decay,
        corrupt=args.corrupt,
    )
    for key in sorted(result.per_block):
        print(f"  {key}: rel error {result.per_block[key]:.3e}")
    print(f"max relative gradient error: {result.max_rel_error:.6e} (worst block {result.worst_block})")
    if result.passed:
        print("gradcheck PASS (threshold 1e-4)")
        return 0
    print("gradcheck FAIL (threshold 1e-4)")
    return 1


def cmd_backend(args) -> int:
    from . import kernels

    print(f"kernel backend: {kernels.BACKEND} (numba available: {accel.HAS_NUMBA})")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="simgcn",
        description="kNN similarity graphs + 2-layer GCN for node classification",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic blob dataset")
    p.add_argument("--classes", type=int, default=3)
    p.add_argument("--per-class", type=int, default=100)
    p.add_argument("--dims", type=int, default=16)
    p.add_argument("--center-distance", type=float, default=10.0)
    p.add_argument("--noise-std", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("graph", help="build and save a similarity graph")
    p.add_argument("--features", required=True)
    p.add_argument(
        "--graph-mode",
        choices=["semi_supervised", "supervised_train", "supervised_test"],
        default="semi_supervised",
    )
    p.add_argument("--subset-file", help="JSON array of node indices (supervised modes)")
    p.add_argument("--out", required=True)
    _add_config_flags(p, protocol=False)
    p.set_defaults(func=cmd_graph)

    p = sub.add_parser("train", help="train on the full graph with a label mask")
    p.add_argument("--features", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--mask-file", help="JSON mask; otherwise --labeled-fraction")
    p.add_argument("--model-out", required=True)
    p.add_argument("--mask-out", help="also save the generated mask")
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a saved model")
    p.add_argument("--features", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--mask-file", help="score only nodes unlabeled in this mask")
    p.add_argument("--report-out")
    _add_config_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("cv", help="k-fold cross-validation")
    p.add_argument("--features", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--report-out", default="cv_report.json")
    _add_config_flags(p)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("sweep", help="labeled-ratio sweep over both modes")
    p.add_argument("--features", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--ratios", default="0.2,0.5,0.8")
    p.add_argument("--sweep-seeds", default="0,1,2,3,4")
    p.add_argument("--report-out", default="sweep_report.json")
    _add_config_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gradcheck", help="analytic vs finite-difference gradients")
    p.add_argument("--n", type=int, default=12)
    p.add_argument("--d", type=int, default=5)
    p.add_argument("--hidden", type=int, default=4)
    p.add_argument("--classes", type=int, default=3)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--step", type=float, default=1e-5)
    p.add_argument("--weight-decay", type=float, default=0.0)
    p.add_argument("--corrupt", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("backend", help="show the active kernel backend")
    p.set_defaults(func=cmd_backend)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DivergenceError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except SimgcnError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"IoError: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - defensive
        print(f"InternalError: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
