"""Experiment protocols: single runs, k-fold cross-validation, ratio sweeps.

Two modes mirror the two graph-construction strategies:

* semi_supervised -- one graph over the whole dataset; the loss sees only
  masked-labeled nodes and accuracy is scored on the unlabeled rest
* supervised      -- disjoint train and test graphs; the model trains on the
  full train graph and transfers frozen to the test graph

All randomness fans out from ``ExperimentConfig.seed`` (see
:mod:`simgcn.seeding`), so a config fingerprint pins an entire run.
"""

import hashlib
from dataclasses import dataclass, field, replace

import numpy as np

from .dataset import (
    FeatureMatrix,
    LabelMask,
    LabelVector,
    make_folds,
    make_label_mask,
    standardize_features,
)
from .errors import EmptyEvaluation, InvalidConfig, InvalidSplit
from .gcn import Hyperparams, predict, train
from .graph import GraphConfig, build_graph
from .seeding import derive_seed
from .serialize import dumps, write_json

MODES = ("supervised", "semi_supervised")


@dataclass
class ExperimentConfig:
    mode: str = "semi_supervised"
    graph: GraphConfig = field(default_factory=GraphConfig)
    hyper: Hyperparams = field(default_factory=Hyperparams)
    fold_count: int | None = None
    labeled_fraction: float | None = None
    seed: int = 0
    standardize: bool = False
    baseline_accuracy: float | None = None  # fraction in (0,1), for the table
    include_traces: bool = False
    features_path: str | None = None
    labels_path: str | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise InvalidConfig(f"mode must be one of {MODES}, got {self.mode!r}")

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "graph": {
                "k": self.graph.k,
                "sigma": self.graph.sigma,
                "symmetrize": self.graph.symmetrize,
                "binary_weights": self.graph.binary_weights,
            },
            "hyper": {
                "hidden": self.hyper.hidden,
                "epochs": self.hyper.epochs,
                "learning_rate": self.hyper.learning_rate,
                "dropout": self.hyper.dropout,
                "weight_decay": self.hyper.weight_decay,
                "optimizer": self.hyper.optimizer,
            },
            "fold_count": self.fold_count,
            "labeled_fraction": self.labeled_fraction,
            "seed": self.seed,
            "standardize": self.standardize,
            "baseline_accuracy": self.baseline_accuracy,
            "include_traces": self.include_traces,
            "features_path": self.features_path,
            "labels_path": self.labels_path,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = {
            "mode",
            "graph",
            "hyper",
            "fold_count",
            "labeled_fraction",
            "seed",
            "standardize",
            "baseline_accuracy",
            "include_traces",
            "features_path",
            "labels_path",
        }
        unknown = set(doc) - known
        if unknown:
            raise InvalidConfig(f"unknown config fields: {sorted(unknown)}")
        graph_doc = dict(doc.get("graph") or {})
        hyper_doc = dict(doc.get("hyper") or {})
        unknown = set(graph_doc) - {"k", "sigma", "symmetrize", "binary_weights"}
        if unknown:
            raise InvalidConfig(f"unknown graph config fields: {sorted(unknown)}")
        unknown = set(hyper_doc) - {
            "hidden",
            "epochs",
            "learning_rate",
            "dropout",
            "weight_decay",
            "optimizer",
        }
        if unknown:
            raise InvalidConfig(f"unknown hyper config fields: {sorted(unknown)}")
        return cls(
            mode=doc.get("mode", "semi_supervised"),
            graph=GraphConfig(**graph_doc),
            hyper=Hyperparams(**hyper_doc),
            fold_count=doc.get("fold_count"),
            labeled_fraction=doc.get("labeled_fraction"),
            seed=int(doc.get("seed", 0)),
            standardize=bool(doc.get("standardize", False)),
            baseline_accuracy=doc.get("baseline_accuracy"),
            include_traces=bool(doc.get("include_traces", False)),
            features_path=doc.get("features_path"),
            labels_path=doc.get("labels_path"),
        )

    def fingerprint(self) -> str:
        return hashlib.sha256(dumps(self.to_dict()).encode("utf-8")).hexdigest()


@dataclass
class ExperimentReport:
    fold_accuracies: list
    mean_accuracy: float
    confusion: np.ndarray
    per_class_recall: np.ndarray
    class_names: list
    fingerprint: str
    config: ExperimentConfig
    traces: list | None = None

    @property
    def evaluated_count(self) -> int:
        return int(self.confusion.sum())

    def to_dict(self) -> dict:
        recall = [None if np.isnan(r) else float(r) for r in self.per_class_recall]
        doc = {
            "config": self.config.to_dict(),
            "fingerprint": self.fingerprint,
            "fold_accuracies": [float(a) for a in self.fold_accuracies],
            "mean_accuracy": float(self.mean_accuracy),
            "confusion_matrix": self.confusion.astype(int),
            "per_class_recall": recall,
            "class_names": list(self.class_names),
            "evaluated_count": self.evaluated_count,
        }
        if self.config.include_traces and self.traces is not None:
            # wall-clock time is deliberately not serialized: report files
            # must be byte-identical across reruns
            doc["traces"] = [
                {
                    "losses": t.losses,
                    "final_train_accuracy": t.final_train_accuracy,
                }
                for t in self.traces
            ]
        return doc


def save_report(report: ExperimentReport, path) -> None:
    write_json(report.to_dict(), path)


# ---------------------------------------------------------------------------
# metrics


def compute_metrics(predicted, actual: LabelVector, eval_indices):
    """Accuracy, confusion counts (rows = actual, columns = predicted) and
    per-class recall over ``eval_indices``. Recall of a class absent from the
    evaluation set is NaN."""
    idx = np.asarray(eval_indices, dtype=np.int64)
    if idx.size == 0:
        raise EmptyEvaluation("no nodes to evaluate")
    pred = np.asarray(predicted, dtype=np.int64)
    C = actual.C
    y = actual.labels[idx]
    p = pred[idx]
    confusion = np.zeros((C, C), dtype=np.int64)
    np.add.at(confusion, (y, p), 1)
    accuracy = float(np.trace(confusion) / idx.size)
    row_sums = confusion.sum(axis=1)
    with np.errstate(invalid="ignore"):
        recall = np.where(row_sums > 0, np.diag(confusion) / np.maximum(row_sums, 1), np.nan)
    return accuracy, confusion, recall


# ---------------------------------------------------------------------------
# protocol runs


def _hyper_for_fold(config: ExperimentConfig, fold_index: int) -> Hyperparams:
    return replace(config.hyper, seed=derive_seed(config.seed, "train", fold_index))


def run_semi_supervised(
    features: FeatureMatrix,
    labels: LabelVector,
    mask: LabelMask,
    config: ExperimentConfig,
    _fold_index: int = 0,
    _prebuilt=None,
) -> ExperimentReport:
    """One graph over all nodes; loss on masked nodes, scored on the rest."""
    if config.standardize and _prebuilt is None:
        features = standardize_features(features)
    if mask.n != features.n or labels.n != features.n:
        raise InvalidConfig("features, labels and mask disagree on n")
    if mask.labeled_count == features.n:
        raise EmptyEvaluation("all nodes are labeled; nothing to score")
    graph, S = _prebuilt or build_graph(features, "semi_supervised", config=config.graph)
    model, trace = train(S, features.values, labels, mask, _hyper_for_fold(config, _fold_index))
    pred = predict(model, S, features.values)
    eval_idx = np.flatnonzero(~mask.mask)
    accuracy, confusion, recall = compute_metrics(pred, labels, eval_idx)
    return ExperimentReport(
        fold_accuracies=[accuracy],
        mean_accuracy=accuracy,
        confusion=confusion,
        per_class_recall=recall,
        class_names=labels.class_names,
        fingerprint=config.fingerprint(),
        config=config,
        traces=[trace],
    )


def run_supervised(
    features: FeatureMatrix,
    labels: LabelVector,
    train_indices,
    test_indices,
    config: ExperimentConfig,
    _fold_index: int = 0,
) -> ExperimentReport:
    """Disjoint train and test graphs; frozen-weight inference on the test
    graph. Accuracy is scored over the test nodes."""
    train_idx = np.asarray(train_indices, dtype=np.int64)
    test_idx = np.asarray(test_indices, dtype=np.int64)
    if np.intersect1d(train_idx, test_idx).size:
        raise InvalidSplit("train and test index sets overlap")
    if config.standardize:
        features = standardize_features(features)

    train_graph, S_train = build_graph(features, "supervised_train", train_idx, config.graph)
    y_train = labels.labels[train_idx]
    all_labeled = np.ones(train_idx.size, dtype=bool)
    model, trace = train(
        S_train,
        features.values[train_idx],
        (y_train, labels.C),
        all_labeled,
        _hyper_for_fold(config, _fold_index),
    )

    test_graph, S_test = build_graph(features, "supervised_test", test_idx, config.graph)
    pred_test = predict(model, S_test, features.values[test_idx])
    pred_full = np.full(features.n, -1, dtype=np.int64)
    pred_full[test_graph.node_ids] = pred_test
    accuracy, confusion, recall = compute_metrics(pred_full, labels, test_idx)
    return ExperimentReport(
        fold_accuracies=[accuracy],
        mean_accuracy=accuracy,
        confusion=confusion,
        per_class_recall=recall,
        class_names=labels.class_names,
        fingerprint=config.fingerprint(),
        config=config,
        traces=[trace],
    )


def cross_validate(
    features: FeatureMatrix, labels: LabelVector, config: ExperimentConfig
) -> ExperimentReport:
    """Each fold in turn is the test/unlabeled set, the remainder labeled.

    Aggregates the per-fold accuracies (the reported mean is their average)
    and sums the confusion matrices. In semi-supervised mode the full graph
    is identical across folds and is built once.
    """
    if config.labeled_fraction is not None:
        raise InvalidConfig("cross-validation selects the fold_count protocol; unset labeled_fraction")
    fold_count = config.fold_count if config.fold_count is not None else 5
    if fold_count < 2:
        raise InvalidConfig(f"fold_count must be >= 2, got {fold_count}")
    config = replace(config, fold_count=fold_count)
    if config.standardize:
        features = standardize_features(features)
        config_inner = replace(config, standardize=False)
    else:
        config_inner = config

    plan = make_folds(labels, fold_count, derive_seed(config.seed, "folds"))
    prebuilt = None
    if config.mode == "semi_supervised":
        prebuilt = build_graph(features, "semi_supervised", config=config.graph)

    fold_accs = []
    traces = []
    confusion = np.zeros((labels.C, labels.C), dtype=np.int64)
    for f in range(fold_count):
        if config.mode == "semi_supervised":
            mask = LabelMask(plan.assignments != f)
            report = run_semi_supervised(
                features, labels, mask, config_inner, _fold_index=f, _prebuilt=prebuilt
            )
        else:
            test_idx = plan.fold_indices(f)
            train_idx = np.flatnonzero(plan.assignments != f)
            report = run_supervised(
                features, labels, train_idx, test_idx, config_inner, _fold_index=f
            )
        fold_accs.append(report.mean_accuracy)
        confusion += report.confusion
        traces.extend(report.traces)

    row_sums = confusion.sum(axis=1)
    with np.errstate(invalid="ignore"):
        recall = np.where(row_sums > 0, np.diag(confusion) / np.maximum(row_sums, 1), np.nan)
    return ExperimentReport(
        fold_accuracies=fold_accs,
        mean_accuracy=float(np.mean(fold_accs)),
        confusion=confusion,
        per_class_recall=recall,
        class_names=labels.class_names,
        fingerprint=config.fingerprint(),
        config=config,
        traces=traces,
    )


# ---------------------------------------------------------------------------
# ratio sweep


@dataclass
class SweepRow:
    ratio: float
    mode: str
    mean_accuracy: float
    std: float
    accuracies: list


@dataclass
class SweepResult:
    rows: list
    config: ExperimentConfig
    fingerprint: str

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "fingerprint": self.fingerprint,
            "rows": [
                {
                    "ratio": r.ratio,
                    "mode": r.mode,
                    "mean_accuracy": r.mean_accuracy,
                    "std": r.std,
                    "accuracies": r.accuracies,
                }
                for r in self.rows
            ],
        }


def save_sweep(result: SweepResult, path) -> None:
    write_json(result.to_dict(), path)


def ratio_sweep(
    features: FeatureMatrix,
    labels: LabelVector,
    ratios,
    seeds,
    config: ExperimentConfig,
) -> SweepResult:
    """Run both modes at each labeled ratio, once per seed.

    Semi-supervised cells mask ``ratio`` of each class in the full graph;
    supervised cells use a stratified ratio split into train and test graphs.
    Reports mean and population standard deviation per (mode, ratio) cell.
    """
    ratios = [float(r) for r in ratios]
    if not ratios or any(not 0.0 < r < 1.0 for r in ratios):
        raise InvalidConfig("ratios must be a non-empty list of fractions in (0,1)")
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise InvalidConfig("at least one seed is required")
    if config.standardize:
        features = standardize_features(features)
    base = replace(config, standardize=False)

    # the full graph does not depend on ratio or seed: build it once
    prebuilt = build_graph(features, "semi_supervised", config=config.graph)

    rows = []
    for mode in ("supervised", "semi_supervised"):
        for ratio in ratios:
            accs = []
            for s in seeds:
                cfg = replace(base, mode=mode, labeled_fraction=ratio, fold_count=None, seed=s)
                split_mask = make_label_mask(labels, ratio, derive_seed(s, "mask"))
                if mode == "semi_supervised":
                    report = run_semi_supervised(
                        features, labels, split_mask, cfg, _prebuilt=prebuilt
                    )
                else:
                    train_idx = np.flatnonzero(split_mask.mask)
                    test_idx = np.flatnonzero(~split_mask.mask)
                    report = run_supervised(features, labels, train_idx, test_idx, cfg)
                accs.append(report.mean_accuracy)
            rows.append(
                SweepRow(
                    ratio=ratio,
                    mode=mode,
                    mean_accuracy=float(np.mean(accs)),
                    std=float(np.std(accs)),
                    accuracies=accs,
                )
            )
    return SweepResult(rows=rows, config=config, fingerprint=config.fingerprint())


# ---------------------------------------------------------------------------
# plain-text tables


def _ratio_label(train_fraction: float) -> str:
    t = round(100.0 * train_fraction)
    return f"{t}:{100 - t}"


def _improvement(accuracy: float, baseline: float | None) -> str:
    if baseline is None:
        return "---"
    return f"{100.0 * (accuracy - baseline):+.2f}%"


def _mode_label(mode: str) -> str:
    return "GCN (semi-supervised)" if mode == "semi_supervised" else "GCN (supervised)"


def _render_table(rows: list) -> str:
    header = ("Model", "Train:Test", "Accuracy", "Improvement")
    table = [header] + rows
    widths = [max(len(r[c]) for r in table) for c in range(4)]
    lines = []
    for r in table:
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip())
    lines.insert(1, "-" * len(lines[0]))
    return "\n".join(lines)


def format_report_table(report: ExperimentReport) -> str:
    config = report.config
    if config.fold_count is not None:
        train_fraction = (config.fold_count - 1) / config.fold_count
        label = _ratio_label(train_fraction) + f" ({config.fold_count}-fold)"
    elif config.labeled_fraction is not None:
        label = _ratio_label(config.labeled_fraction)
    else:
        label = "-"
    rows = [
        (
            _mode_label(config.mode),
            label,
            f"{100.0 * report.mean_accuracy:.2f}%",
            _improvement(report.mean_accuracy, config.baseline_accuracy),
        )
    ]
    out = [_render_table(rows)]
    if len(report.fold_accuracies) > 1:
        folds = ", ".join(f"{100.0 * a:.2f}%" for a in report.fold_accuracies)
        out.append(f"per-fold accuracy: {folds}")
    recalls = ", ".join(
        f"{name}={'n/a' if np.isnan(r) else f'{100.0 * r:.2f}%'}"
        for name, r in zip(report.class_names, report.per_class_recall)
    )
    out.append(f"per-class recall: {recalls}")
    return "\n".join(out)


def format_sweep_table(result: SweepResult) -> str:
    rows = [
        (
            _mode_label(r.mode),
            _ratio_label(r.ratio),
            f"{100.0 * r.mean_accuracy:.2f}% (std {100.0 * r.std:.2f})",
            _improvement(r.mean_accuracy, result.config.baseline_accuracy),
        )
        for r in result.rows
    ]
    return _render_table(rows)
