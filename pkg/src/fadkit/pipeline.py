"""Experiment orchestration.

Holds the tabular dataset model, stratified k-fold planning, classification
metrics, a synthetic "vital few" generator (class signal confined to a known
informative feature subset), and the cross-validated feature-dropping study
that produces the per-class normalized-area report.
"""

from __future__ import annotations

import csv
import json
import re
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import attribution, fadcurve, nncore, svgplot
from .attribution import BaselineVector
from .errors import ConfigError, DegenerateInputError, ExcludedCaseError, ShapeError

FEATURE_KINDS = ("continuous", "binary")

METHOD_ORACLE = "oracle"
METHOD_RANDOM = "random"

_METHOD_NAMES = ("ig", "shapley", "shapley-exact", "shapley-sampled",
                 "oracle", "random")


# ---------------------------------------------------------------------------
# dataset model


@dataclass
class TabularDataset:
    """Instances-by-features matrix with per-feature kinds and class labels."""

    features: np.ndarray
    labels: np.ndarray
    feature_kinds: tuple
    feature_names: tuple
    class_names: tuple

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int)
        self.feature_kinds = tuple(self.feature_kinds)
        self.feature_names = tuple(self.feature_names)
        self.class_names = tuple(str(c) for c in self.class_names)
        n, d = self.features.shape if self.features.ndim == 2 else (0, 0)
        if self.features.ndim != 2 or n == 0 or d == 0:
            raise ConfigError("features must be a nonempty (n, d) matrix")
        if self.labels.shape != (n,):
            raise ShapeError("labels must match the instance count")
        if len(self.feature_kinds) != d or len(self.feature_names) != d:
            raise ShapeError("feature kinds/names must match the feature count")
        if any(k not in FEATURE_KINDS for k in self.feature_kinds):
            raise ConfigError(f"feature kinds must be one of {FEATURE_KINDS}")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("features must be finite after ingestion")
        if self.labels.min() < 0 or self.labels.max() >= len(self.class_names):
            raise ConfigError("labels out of range for the class names")

    @property
    def n_instances(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def class_count(self) -> int:
        return len(self.class_names)

    @classmethod
    def from_csv(cls, path, kinds_path=None) -> "TabularDataset":
        """CSV with a header row and one ``label`` column; other columns are
        features. Kinds come from the sidecar JSON when given, otherwise a
        column whose values are all 0/1 counts as binary."""
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise ConfigError(f"{path}:1: empty file, expected a header row")
            if "label" not in header:
                raise ConfigError(f"{path}:1: no 'label' column in header")
            label_col = header.index("label")
            names = [h for i, h in enumerate(header) if i != label_col]
            rows, raw_labels = [], []
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != len(header):
                    raise ConfigError(
                        f"{path}:{lineno}: expected {len(header)} fields, "
                        f"got {len(row)}"
                    )
                raw_labels.append(row[label_col])
                try:
                    rows.append([float(v) for i, v in enumerate(row)
                                 if i != label_col])
                except ValueError as exc:
                    raise ConfigError(f"{path}:{lineno}: {exc}") from exc
        if not rows:
            raise ConfigError(f"{path}: no data rows")
        class_names = sorted(set(raw_labels))
        label_of = {c: i for i, c in enumerate(class_names)}
        features = np.array(rows, dtype=float)
        labels = np.array([label_of[v] for v in raw_labels], dtype=int)
        if kinds_path is not None:
            with open(kinds_path, encoding="utf-8") as fh:
                doc = json.load(fh)
            kind_map = doc.get("kinds", doc)
            try:
                kinds = tuple(kind_map[n] for n in names)
            except KeyError as exc:
                raise ConfigError(f"{kinds_path}: missing kind for {exc}") from exc
        else:
            kinds = tuple(
                "binary" if np.all(np.isin(features[:, j], (0.0, 1.0)))
                else "continuous"
                for j in range(features.shape[1])
            )
        return cls(features=features, labels=labels, feature_kinds=kinds,
                   feature_names=tuple(names), class_names=tuple(class_names))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow([*self.feature_names, "label"])
            for row, label in zip(self.features, self.labels):
                writer.writerow([*[repr(float(v)) for v in row],
                                 self.class_names[label]])

    def write_kinds(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump({"kinds": dict(zip(self.feature_names,
                                         self.feature_kinds))},
                      fh, indent=2, sort_keys=True)
            fh.write("\n")


# ---------------------------------------------------------------------------
# folds and metrics


@dataclass
class FoldPlan:
    """Partition of instances into k folds, stratified by class."""

    k: int
    assignment: np.ndarray
    seed: int

    def __post_init__(self):
        self.assignment = np.asarray(self.assignment, dtype=int)
        if self.k < 2:
            raise ConfigError("k must be at least 2")
        if self.assignment.min() < 0 or self.assignment.max() >= self.k:
            raise ValueError("fold ids out of range")

    def test_indices(self, fold: int) -> np.ndarray:
        return np.nonzero(self.assignment == fold)[0]

    def train_indices(self, fold: int) -> np.ndarray:
        return np.nonzero(self.assignment != fold)[0]


def stratified_kfold(labels, k: int, seed: int,
                     class_count: int | None = None) -> FoldPlan:
    """Seeded shuffle within each class, then round-robin fold assignment,
    so per-class fold counts differ by at most one. When ``class_count`` is
    given, every class must actually occur in the labels."""
    y = np.asarray(labels, dtype=int).reshape(-1)
    if y.size == 0:
        raise ConfigError("cannot fold an empty label list")
    if k < 2:
        raise ConfigError("k must be at least 2")
    rng = np.random.default_rng(seed)
    assignment = np.empty(y.size, dtype=int)
    classes, counts = np.unique(y, return_counts=True)
    if class_count is not None and classes.size < class_count:
        missing = sorted(set(range(class_count)) - set(classes.tolist()))
        raise ConfigError(f"classes {missing} have no instances")
    smallest = counts.min()
    if k > smallest:
        warnings.warn(
            f"k={k} exceeds the smallest class size ({smallest}); "
            "some folds will lack that class",
            UserWarning,
            stacklevel=2,
        )
    for c in classes:
        idx = np.nonzero(y == c)[0]
        rng.shuffle(idx)
        assignment[idx] = np.arange(idx.size) % k
    return FoldPlan(k=k, assignment=assignment, seed=int(seed))


@dataclass
class ClassRow:
    label: int
    name: str
    precision: float
    recall: float
    f1: float
    support: int
    zero_predicted: bool = False


@dataclass
class ClassMetrics:
    """Per-class precision/recall/F1 with support-weighted averages."""

    rows: list
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float
    accuracy: float

    def to_json_dict(self) -> dict:
        return {
            "classes": [
                {"label": r.label, "name": r.name, "precision": r.precision,
                 "recall": r.recall, "f1": r.f1, "support": r.support,
                 "zero_predicted": r.zero_predicted}
                for r in self.rows
            ],
            "weighted_avg": {"precision": self.weighted_precision,
                             "recall": self.weighted_recall,
                             "f1": self.weighted_f1},
            "accuracy": self.accuracy,
        }


def classification_metrics(predictions, labels, class_names=None) -> ClassMetrics:
    """Confusion-count metrics; classes absent from the labels get no row."""
    pred = np.asarray(predictions, dtype=int).reshape(-1)
    y = np.asarray(labels, dtype=int).reshape(-1)
    if pred.size == 0:
        raise DegenerateInputError("no predictions to score")
    if pred.shape != y.shape:
        raise ShapeError("predictions and labels must have equal length")
    rows = []
    for c in np.unique(y):
        support = int(np.sum(y == c))
        tp = int(np.sum((pred == c) & (y == c)))
        fp = int(np.sum((pred == c) & (y != c)))
        fn = support - tp
        zero_predicted = (tp + fp) == 0
        precision = 0.0 if zero_predicted else tp / (tp + fp)
        recall = tp / support
        f1 = 0.0 if precision + recall == 0 else (
            2 * precision * recall / (precision + recall)
        )
        name = class_names[c] if class_names is not None else str(int(c))
        rows.append(ClassRow(label=int(c), name=str(name), precision=precision,
                             recall=recall, f1=f1, support=support,
                             zero_predicted=zero_predicted))
    total = sum(r.support for r in rows)
    wp = sum(r.precision * r.support for r in rows) / total
    wr = sum(r.recall * r.support for r in rows) / total
    wf = sum(r.f1 * r.support for r in rows) / total
    return ClassMetrics(rows=rows, weighted_precision=wp, weighted_recall=wr,
                        weighted_f1=wf, accuracy=float(np.mean(pred == y)))


# ---------------------------------------------------------------------------
# synthetic data


@dataclass
class PlantedDataset:
    """Generated dataset plus the ground-truth informative feature indices."""

    dataset: TabularDataset
    informative_indices: np.ndarray


def generate_vital_few(n_instances: int, n_features: int,
                       informative_fraction: float, n_classes: int,
                       seed: int, class_mean_spread: float = 2.0,
                       min_class_separation: float = 4.0) -> PlantedDataset:
    """Synthetic data whose class signal lives only on a random informative
    subset of features; the rest is standard normal noise.

    Class means over the informative subset are redrawn until every pair is
    at least ``min_class_separation`` apart (unit noise std), so the classes
    are separable by construction.
    """
    if n_instances < 1 or n_features < 1 or n_classes < 2:
        raise ConfigError("need positive sizes and at least two classes")
    if not 0.0 < informative_fraction < 1.0:
        raise ConfigError("informative_fraction must lie in (0, 1)")
    n_informative = int(round(informative_fraction * n_features))
    if n_informative < 1:
        raise ConfigError("informative_fraction implies zero informative features")
    rng = np.random.default_rng(seed)
    informative = np.sort(rng.choice(n_features, size=n_informative,
                                     replace=False))
    for _ in range(10000):
        class_means = rng.normal(0.0, class_mean_spread,
                                 size=(n_classes, n_informative))
        gaps = np.linalg.norm(
            class_means[:, None, :] - class_means[None, :, :], axis=2)
        if gaps[np.triu_indices(n_classes, k=1)].min() >= min_class_separation:
            break
    else:
        raise ConfigError(
            "could not draw class means satisfying min_class_separation; "
            "lower it or raise class_mean_spread")
    labels = rng.permutation(np.arange(n_instances) % n_classes)
    features = rng.standard_normal((n_instances, n_features))
    features[:, informative] += class_means[labels]
    dataset = TabularDataset(
        features=features,
        labels=labels,
        feature_kinds=("continuous",) * n_features,
        feature_names=tuple(f"f{j}" for j in range(n_features)),
        class_names=tuple(f"class{c}" for c in range(n_classes)),
    )
    return PlantedDataset(dataset=dataset, informative_indices=informative)


# ---------------------------------------------------------------------------
# cross-validated feature-dropping analysis


@dataclass(frozen=True)
class FADConfig:
    """Knobs of the cross-validated feature-dropping study."""

    beta: float = fadcurve.DEFAULT_BETA
    methods: tuple = ("ig", "shapley")
    k_folds: int = 5
    seed: int = 0
    ig_steps: int = attribution.IG_DEFAULT_STEPS
    shapley_permutations: int = 64
    ranking_mode: str = "per-instance"      # or "class-global"
    pooling: str = "pooled"                 # or "per-fold-average"
    validation_fraction: float = 0.1
    jobs: int = 1
    baseline_override: tuple | None = None  # raw-space values
    oracle_indices: tuple | None = None     # ground truth for method "oracle"

    def __post_init__(self):
        if not 0 < self.beta <= 100:
            raise ConfigError("beta must lie in (0, 100]")
        if not self.methods:
            raise ConfigError("at least one attribution method is required")
        for m in self.methods:
            if m not in _METHOD_NAMES:
                raise ConfigError(f"unknown method {m!r}; choose from "
                                  f"{_METHOD_NAMES}")
        if self.ranking_mode not in ("per-instance", "class-global"):
            raise ConfigError("ranking_mode must be per-instance or class-global")
        if self.pooling not in ("pooled", "per-fold-average"):
            raise ConfigError("pooling must be pooled or per-fold-average")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ConfigError("validation_fraction must lie in [0, 1)")
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1")


def resolve_method_tag(name: str, n_features: int) -> str:
    """Column tag for a method name; 'shapley' picks exact enumeration when
    the feature count allows it and sampling otherwise."""
    if name == "ig":
        return attribution.METHOD_IG
    if name == "shapley":
        return (attribution.METHOD_SHAPLEY_EXACT
                if n_features <= attribution.EXACT_ENUMERATION_LIMIT
                else attribution.METHOD_SHAPLEY_SAMPLED)
    if name == "shapley-exact":
        return attribution.METHOD_SHAPLEY_EXACT
    if name == "shapley-sampled":
        return attribution.METHOD_SHAPLEY_SAMPLED
    return name  # oracle / random keep their names


@dataclass
class FoldOutcome:
    fold: int
    test_indices: np.ndarray
    test_labels: np.ndarray
    predictions: np.ndarray
    correctness: dict          # method tag -> bool array (n_test, n_drop_counts)
    network: nncore.DenseNetwork
    best_epoch: int | None


def _standardizer(train_features, kinds):
    cont = np.array([k == "continuous" for k in kinds])
    mean = np.where(cont, train_features.mean(axis=0), 0.0)
    std = np.where(cont, train_features.std(axis=0), 1.0)
    std = np.where(std < 1e-12, 1.0, std)
    return mean, std


def _validation_split(train_idx, labels, fraction, rng):
    """Stratified holdout of roughly ``fraction`` of the train fold."""
    if fraction <= 0.0:
        return train_idx, None
    val_parts, fit_parts = [], []
    for c in np.unique(labels[train_idx]):
        idx = train_idx[labels[train_idx] == c]
        idx = idx[rng.permutation(idx.size)]
        n_val = min(idx.size - 1, int(round(fraction * idx.size)))
        n_val = max(n_val, 0)
        val_parts.append(idx[:n_val])
        fit_parts.append(idx[n_val:])
    val_idx = np.sort(np.concatenate(val_parts))
    fit_idx = np.sort(np.concatenate(fit_parts))
    if val_idx.size == 0:
        return train_idx, None
    return fit_idx, val_idx


def _instance_rankings(tag, net, X_test, y_test, baseline, config,
                       shapley_seeds, random_rng):
    """One feature ranking per test instance for one method."""
    n, d = X_test.shape
    score_rows = np.empty((n, d))
    for i in range(n):
        target = int(y_test[i])
        if tag == attribution.METHOD_IG:
            attr = attribution.integrated_gradients(
                net, X_test[i], baseline, target, steps=config.ig_steps)
        elif tag == attribution.METHOD_SHAPLEY_EXACT:
            attr = attribution.shapley_exact(net, X_test[i], baseline, target)
        elif tag == attribution.METHOD_SHAPLEY_SAMPLED:
            attr = attribution.shapley_sampled(
                net, X_test[i], baseline, target,
                permutations=config.shapley_permutations,
                seed=int(shapley_seeds[i]))
        elif tag == METHOD_ORACLE:
            scores = np.zeros(d)
            scores[np.asarray(config.oracle_indices, dtype=int)] = 1.0
            score_rows[i] = scores
            continue
        elif tag == METHOD_RANDOM:
            score_rows[i] = random_rng.random(d)
            continue
        else:
            raise ConfigError(f"unhandled method tag {tag!r}")
        score_rows[i] = attr.scores
    return [attribution.rank_scores(score_rows[i]) for i in range(n)], score_rows


def _class_global_rankings(score_rows, y_test):
    """Replace each instance's ranking with its class's mean-|score| order."""
    rankings = [None] * len(y_test)
    for c in np.unique(y_test):
        rows = np.nonzero(y_test == c)[0]
        order = attribution.rank_scores(np.abs(score_rows[rows]).mean(axis=0))
        for i in rows:
            rankings[i] = order
    return rankings


def _fold_task(fold, dataset, plan, net_spec, train_config, config,
               drop_counts, method_tags):
    seed_seq = np.random.SeedSequence([config.seed, fold])
    split_child, train_child, random_child, shapley_child = seed_seq.spawn(4)

    train_idx = plan.train_indices(fold)
    test_idx = plan.test_indices(fold)
    if test_idx.size == 0:
        raise DegenerateInputError(f"fold {fold} has no test instances")

    fit_idx, val_idx = _validation_split(
        train_idx, dataset.labels, config.validation_fraction,
        np.random.default_rng(split_child))

    mean, std = _standardizer(dataset.features[train_idx],
                              dataset.feature_kinds)
    scale = lambda M: (M - mean) / std
    X_fit, y_fit = scale(dataset.features[fit_idx]), dataset.labels[fit_idx]
    validation = None
    if val_idx is not None:
        validation = (scale(dataset.features[val_idx]),
                      dataset.labels[val_idx])

    fold_train_config = train_config.with_seed(
        train_child.generate_state(1)[0])
    spec = replace(net_spec, class_count=dataset.class_count)
    result = nncore.train(X_fit, y_fit, spec, fold_train_config,
                          validation=validation)
    net = result.network

    X_test = scale(dataset.features[test_idx])
    y_test = dataset.labels[test_idx]
    predictions = nncore.predict(net, X_test)

    if config.baseline_override is not None:
        base_values = scale(np.asarray(config.baseline_override, dtype=float))
        baseline = BaselineVector(base_values,
                                  ("custom",) * dataset.n_features)
    else:
        # standardized space: continuous means and binary absence are both 0
        baseline = BaselineVector(
            np.zeros(dataset.n_features),
            tuple("mean" if k == "continuous" else "zero"
                  for k in dataset.feature_kinds))

    random_rng = np.random.default_rng(random_child)
    shapley_seeds = shapley_child.generate_state(test_idx.size)

    correctness = {}
    for tag in method_tags:
        rankings, score_rows = _instance_rankings(
            tag, net, X_test, y_test, baseline, config, shapley_seeds,
            random_rng)
        if config.ranking_mode == "class-global":
            rankings = _class_global_rankings(score_rows, y_test)
        preds = fadcurve.dropped_prediction_matrix(
            net, X_test, rankings, baseline, drop_counts)
        correctness[tag] = preds == y_test[:, None]

    return FoldOutcome(fold=fold, test_indices=test_idx, test_labels=y_test,
                       predictions=predictions, correctness=correctness,
                       network=net, best_epoch=result.best_epoch)


@dataclass
class NAUCRow:
    """One class of the normalized-area table."""

    label: str
    instances: int
    n_auc: dict
    auc: dict
    max_metric: float
    best: str
    diagnostics: dict = field(default_factory=dict)


@dataclass
class NAUCReport:
    """Per-class, per-method normalized areas plus exclusions."""

    beta: float
    methods: tuple
    rows: list
    excluded: list = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "beta": self.beta,
            "methods": list(self.methods),
            "rows": [
                {"class": r.label, "instances": r.instances,
                 "n_auc": {m: r.n_auc[m] for m in self.methods},
                 "auc": {m: r.auc[m] for m in self.methods},
                 "max_metric": r.max_metric, "best": r.best,
                 "rise_diagnostics": r.diagnostics}
                for r in self.rows
            ],
            "excluded": [{"class": name, "reason": reason}
                         for name, reason in self.excluded],
        }

    def to_csv_text(self) -> str:
        lines = [",".join(["class", "instances", *self.methods, "best"])]
        for r in self.rows:
            cells = [r.label, str(r.instances)]
            cells += [repr(r.n_auc[m]) for m in self.methods]
            cells.append(r.best)
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"

    def to_text_table(self) -> str:
        """Aligned table; the lowest (best) value per row is starred."""
        headers = ["class", "instances", *self.methods]
        body = []
        for r in self.rows:
            cells = [r.label, str(r.instances)]
            for m in self.methods:
                mark = "*" if m == r.best else " "
                cells.append(f"{r.n_auc[m]:.4f}{mark}")
            body.append(cells)
        widths = [max(len(h), *(len(row[i]) for row in body)) if body else len(h)
                  for i, h in enumerate(headers)]
        lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths))]
        for row in body:
            lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)))
        for name, reason in self.excluded:
            lines.append(f"excluded: {name} ({reason})")
        return "\n".join(lines) + "\n"


@dataclass
class FADAnalysisResult:
    report: NAUCReport
    pooled_curves: list
    fold_curves: list
    fold_metrics: list
    overall_metrics: ClassMetrics
    plan: FoldPlan
    drop_counts: list


def _curve_from_rows(correct_rows, drop_counts, n_features, label, method,
                     fold):
    metric = correct_rows.mean(axis=0)
    points = [(100.0 * k / n_features, float(metric[j]))
              for j, k in enumerate(drop_counts)]
    return fadcurve.FADCurve(points=points, label=label, method=method,
                             fold=fold)


def run_fad_analysis(dataset: TabularDataset, net_spec: nncore.NetSpec,
                     train_config: nncore.TrainConfig,
                     config: FADConfig) -> FADAnalysisResult:
    """Cross-validated feature-dropping study.

    Per fold: train on the train split (with a stratified validation holdout
    for model selection), attribute every test instance per method, and
    record whether each instance survives each drop count. Folds are pooled
    (default) for the per-class normalized areas; per-fold curves are kept
    too. All randomness is derived from (config.seed, fold), so results are
    independent of ``jobs``.
    """
    if dataset.class_count < 2:
        raise ConfigError("analysis needs at least two classes")
    if METHOD_ORACLE in config.methods and config.oracle_indices is None:
        raise ConfigError("method 'oracle' requires oracle_indices")

    # classes with zero instances cannot be trained on or appear in any
    # test fold: drop them up front and report them as excluded
    ghost_excluded = []
    active = np.unique(dataset.labels)
    if active.size < dataset.class_count:
        ghost_excluded = [
            (dataset.class_names[c], "no test instances in any fold")
            for c in range(dataset.class_count) if c not in set(active)
        ]
        remap = np.full(dataset.class_count, -1, dtype=int)
        remap[active] = np.arange(active.size)
        dataset = TabularDataset(
            features=dataset.features, labels=remap[dataset.labels],
            feature_kinds=dataset.feature_kinds,
            feature_names=dataset.feature_names,
            class_names=tuple(dataset.class_names[c] for c in active))
        if dataset.class_count < 2:
            raise ConfigError("fewer than two classes have instances")

    method_tags = tuple(resolve_method_tag(m, dataset.n_features)
                        for m in config.methods)
    if len(set(method_tags)) != len(method_tags):
        raise ConfigError(f"methods resolve to duplicate tags: {method_tags}")
    drop_counts = fadcurve.drop_count_schedule(dataset.n_features, config.beta)
    plan = stratified_kfold(dataset.labels, config.k_folds, config.seed)

    task = lambda fold: _fold_task(fold, dataset, plan, net_spec, train_config,
                                   config, drop_counts, method_tags)
    if config.jobs > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            outcomes = list(pool.map(task, range(config.k_folds)))
    else:
        outcomes = [task(fold) for fold in range(config.k_folds)]

    all_labels = np.concatenate([o.test_labels for o in outcomes])
    all_predictions = np.concatenate([o.predictions for o in outcomes])
    overall_metrics = classification_metrics(all_predictions, all_labels,
                                             dataset.class_names)
    fold_metrics = [
        classification_metrics(o.predictions, o.test_labels,
                               dataset.class_names)
        for o in outcomes
    ]

    pooled_curves, fold_curves = [], []
    rows, excluded = [], []
    d = dataset.n_features
    for c, class_name in enumerate(dataset.class_names):
        pooled_rows = {tag: [] for tag in method_tags}
        n_class = 0
        for o in outcomes:
            sel = o.test_labels == c
            if not np.any(sel):
                continue
            n_class += int(sel.sum())
            for tag in method_tags:
                pooled_rows[tag].append(o.correctness[tag][sel])
                fold_curves.append(_curve_from_rows(
                    o.correctness[tag][sel], drop_counts, d, class_name, tag,
                    o.fold))
        if n_class == 0:
            excluded.append((class_name, "no test instances in any fold"))
            continue

        per_method_curves = {}
        for tag in method_tags:
            if config.pooling == "pooled":
                stacked = np.vstack(pooled_rows[tag])
                curve = _curve_from_rows(stacked, drop_counts, d, class_name,
                                         tag, "pooled")
            else:
                class_fold_curves = [
                    fc for fc in fold_curves
                    if fc.label == class_name and fc.method == tag
                ]
                metric = np.mean(
                    [fc.metrics for fc in class_fold_curves], axis=0)
                points = [(100.0 * k / d, float(metric[j]))
                          for j, k in enumerate(drop_counts)]
                curve = fadcurve.FADCurve(points=points, label=class_name,
                                          method=tag, fold="fold-average")
            per_method_curves[tag] = curve
            pooled_curves.append(curve)

        max_metric = max(curve.max_within(config.beta)
                         for curve in per_method_curves.values())
        if max_metric <= 0:
            excluded.append(
                (class_name, "metric is zero across [0, beta] for every method"))
            continue
        aucs = {tag: fadcurve.trapezoid_auc(per_method_curves[tag], config.beta)
                for tag in method_tags}
        try:
            naucs = {tag: fadcurve.n_auc(aucs[tag], config.beta, max_metric)
                     for tag in method_tags}
        except ExcludedCaseError:
            excluded.append(
                (class_name, "a method's curve vanished across [0, beta]"))
            continue
        best = min(method_tags, key=lambda tag: (naucs[tag], tag))
        diagnostics = {
            tag: fadcurve.rise_diagnostics(per_method_curves[tag], config.beta)
            for tag in method_tags
        }
        rows.append(NAUCRow(label=class_name, instances=n_class, n_auc=naucs,
                            auc=aucs, max_metric=max_metric, best=best,
                            diagnostics=diagnostics))

    report = NAUCReport(beta=config.beta, methods=method_tags, rows=rows,
                        excluded=[*ghost_excluded, *excluded])
    return FADAnalysisResult(report=report, pooled_curves=pooled_curves,
                             fold_curves=fold_curves,
                             fold_metrics=fold_metrics,
                             overall_metrics=overall_metrics, plan=plan,
                             drop_counts=drop_counts)


def single_model_fad(net, dataset: TabularDataset, baseline: BaselineVector,
                     rankings_by_method: dict, beta: float = fadcurve.DEFAULT_BETA):
    """Feature-dropping analysis of one trained model (no cross-validation).

    ``rankings_by_method`` maps a method tag to one ranking per dataset
    instance. Returns (report, curves, drop_counts); folds are tagged "all".
    """
    if not rankings_by_method:
        raise ConfigError("at least one attribution method is required")
    drop_counts = fadcurve.drop_count_schedule(dataset.n_features, beta)
    method_tags = tuple(rankings_by_method)
    correctness = {}
    for tag, rankings in rankings_by_method.items():
        preds = fadcurve.dropped_prediction_matrix(
            net, dataset.features, rankings, baseline, drop_counts)
        correctness[tag] = preds == dataset.labels[:, None]

    curves, rows, excluded = [], [], []
    d = dataset.n_features
    for c, class_name in enumerate(dataset.class_names):
        sel = dataset.labels == c
        n_class = int(sel.sum())
        if n_class == 0:
            excluded.append((class_name, "no instances"))
            continue
        per_method_curves = {
            tag: _curve_from_rows(correctness[tag][sel], drop_counts, d,
                                  class_name, tag, "all")
            for tag in method_tags
        }
        curves.extend(per_method_curves.values())
        max_metric = max(curve.max_within(beta)
                         for curve in per_method_curves.values())
        if max_metric <= 0:
            excluded.append(
                (class_name, "metric is zero across [0, beta] for every method"))
            continue
        aucs = {tag: fadcurve.trapezoid_auc(per_method_curves[tag], beta)
                for tag in method_tags}
        try:
            naucs = {tag: fadcurve.n_auc(aucs[tag], beta, max_metric)
                     for tag in method_tags}
        except ExcludedCaseError:
            excluded.append(
                (class_name, "a method's curve vanished across [0, beta]"))
            continue
        best = min(method_tags, key=lambda tag: (naucs[tag], tag))
        diagnostics = {
            tag: fadcurve.rise_diagnostics(per_method_curves[tag], beta)
            for tag in method_tags
        }
        rows.append(NAUCRow(label=class_name, instances=n_class, n_auc=naucs,
                            auc=aucs, max_metric=max_metric, best=best,
                            diagnostics=diagnostics))
    report = NAUCReport(beta=beta, methods=method_tags, rows=rows,
                        excluded=excluded)
    return report, curves, drop_counts


def nauc_win_rate(reports, method_a: str, method_b: str) -> float:
    """Fraction of (report, class) pairs where method_a's normalized area is
    strictly below method_b's."""
    wins = total = 0
    for report in reports:
        for row in report.rows:
            if method_a in row.n_auc and method_b in row.n_auc:
                total += 1
                wins += row.n_auc[method_a] < row.n_auc[method_b]
    if total == 0:
        raise DegenerateInputError("no comparable rows")
    return wins / total


def _safe_name(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "-", name)


def write_report_bundle(report: NAUCReport, curves, plot_curves, out_dir,
                        metrics_doc=None) -> list:
    """Write curves (CSV), per-class comparison plots (SVG), and the
    normalized-area table (CSV/JSON/text). Returns the paths written."""
    from pathlib import Path

    out = Path(out_dir)
    (out / "curves").mkdir(parents=True, exist_ok=True)
    (out / "plots").mkdir(parents=True, exist_ok=True)
    written = []

    def emit(path, text):
        path.write_text(text, encoding="utf-8")
        written.append(path)

    for curve in curves:
        fname = (f"{_safe_name(curve.label)}__{_safe_name(curve.method)}"
                 f"__{_safe_name(str(curve.fold))}.csv")
        emit(out / "curves" / fname, fadcurve.curve_to_csv(curve))

    by_class = {}
    for curve in plot_curves:
        by_class.setdefault(curve.label, []).append(curve)
    for label, class_curves in sorted(by_class.items()):
        series = [
            (c.method, list(c.percents), list(c.metrics))
            for c in sorted(class_curves, key=lambda c: c.method)
        ]
        svg = svgplot.line_plot(
            series, title=f"{label}: metric vs features dropped",
            x_label="% features dropped", y_label="accuracy",
            x_range=(0.0, 100.0))
        emit(out / "plots" / f"{_safe_name(label)}.svg", svg)

    emit(out / "naucs.csv", report.to_csv_text())
    emit(out / "naucs.json",
         json.dumps(report.to_json_dict(), indent=2, sort_keys=True) + "\n")
    emit(out / "report.txt", report.to_text_table())
    if metrics_doc is not None:
        emit(out / "metrics.json",
             json.dumps(metrics_doc, indent=2, sort_keys=True) + "\n")
    return written


def write_analysis_outputs(result: FADAnalysisResult, out_dir) -> list:
    """write_report_bundle for a cross-validated analysis result."""
    metrics_doc = {
        "overall": result.overall_metrics.to_json_dict(),
        "folds": [m.to_json_dict() for m in result.fold_metrics],
    }
    return write_report_bundle(
        result.report, [*result.pooled_curves, *result.fold_curves],
        result.pooled_curves, out_dir, metrics_doc=metrics_doc)
