"""Command-line front end.

Subcommands: gen (synthetic data), train, attribute, fad, match. Every
command writes a run manifest (config snapshot, seeds, input digests,
component versions) next to its outputs; exit codes are 0 on success, 2 on
input/validation errors, 3 on numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy

from . import __version__, attribution, fadcurve, matcher, nncore, pipeline
from .errors import (ConfigError, DegenerateInputError, DivergenceError,
                     ExcludedCaseError, ShapeError)

MANIFEST_FORMAT = "fadkit-manifest"
ATTRIBUTION_FORMAT = "fadkit-attributions"


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            digest.update(block)
    return digest.hexdigest()


def _dump_json(path, doc) -> None:
    Path(path).write_text(
        json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_manifest(path, command, config, inputs, outputs, seeds,
                   summary=None) -> None:
    doc = {
        "format": MANIFEST_FORMAT,
        "version": 1,
        "command": command,
        "config": config,
        "seeds": seeds,
        "inputs": {str(p): _sha256(p) for p in inputs},
        "outputs": [str(p) for p in outputs],
        "versions": {
            "fadkit": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": sys.version.split()[0],
        },
        "created_utc": datetime.now(timezone.utc).isoformat(),
    }
    if summary is not None:
        doc["summary"] = summary
    _dump_json(path, doc)


def _load_dataset(args) -> pipeline.TabularDataset:
    kinds = getattr(args, "kinds", None)
    return pipeline.TabularDataset.from_csv(args.data, kinds_path=kinds)


def _int_list(text: str) -> list:
    return [int(v) for v in text.split(",") if v.strip()]


# ---------------------------------------------------------------------------
# gen


def cmd_gen(args) -> int:
    planted = pipeline.generate_vital_few(
        n_instances=args.instances, n_features=args.features,
        informative_fraction=args.informative_fraction,
        n_classes=args.classes, seed=args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    kinds_path = out.with_suffix(".kinds.json")
    truth_path = out.with_suffix(".truth.json")
    planted.dataset.to_csv(out)
    planted.dataset.write_kinds(kinds_path)
    _dump_json(truth_path, {
        "informative_indices": [int(i) for i in planted.informative_indices],
        "seed": args.seed,
    })
    write_manifest(
        out.with_suffix(".manifest.json"), "gen",
        config={"instances": args.instances, "features": args.features,
                "informative_fraction": args.informative_fraction,
                "classes": args.classes, "out": str(out)},
        inputs=[], outputs=[out, kinds_path, truth_path], seeds=[args.seed])
    print(f"wrote {out} ({args.instances} x {args.features}, "
          f"{planted.informative_indices.size} informative)")
    return 0


# ---------------------------------------------------------------------------
# train


def _train_config_from_doc(doc) -> tuple:
    cfg = nncore.TrainConfig(
        learning_rate=doc.get("learning_rate", 1e-3),
        beta1=doc.get("beta1", 0.9),
        beta2=doc.get("beta2", 0.999),
        epsilon=doc.get("epsilon", 1e-8),
        batch_size=doc.get("batch_size", 32),
        epochs=doc.get("epochs", 100),
        seed=doc.get("seed", 0),
    )
    spec = nncore.NetSpec(
        hidden_dims=tuple(doc.get("hidden_dims", [32])),
        gradient_target=doc.get("gradient_target", "probability"),
    )
    return spec, cfg, float(doc.get("validation_fraction", 0.1))


def cmd_train(args) -> int:
    dataset = _load_dataset(args)
    with open(args.config, encoding="utf-8") as fh:
        doc = json.load(fh)
    spec, cfg, val_fraction = _train_config_from_doc(doc)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)

    indices = np.arange(dataset.n_instances)
    fit_idx, val_idx = pipeline._validation_split(
        indices, dataset.labels, val_fraction,
        np.random.default_rng(cfg.seed))
    validation = None
    if val_idx is not None:
        validation = (dataset.features[val_idx], dataset.labels[val_idx])

    spec = nncore.NetSpec(hidden_dims=spec.hidden_dims,
                          class_count=dataset.class_count,
                          gradient_target=spec.gradient_target)
    result = nncore.train(dataset.features[fit_idx], dataset.labels[fit_idx],
                          spec, cfg, validation=validation)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    nncore.save_model(result.network, out)
    trace_path = out.with_suffix(".loss.csv")
    with open(trace_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "val_loss"])
        for epoch, loss in enumerate(result.train_loss):
            vloss = result.val_loss[epoch] if result.val_loss else ""
            writer.writerow([epoch, repr(loss), repr(vloss) if vloss != "" else ""])

    final_acc = nncore.accuracy(result.network, dataset.features,
                                dataset.labels)
    write_manifest(
        out.with_suffix(".manifest.json"), "train",
        config={"data": str(args.data), "kinds": args.kinds,
                "config": str(args.config), "out": str(out),
                "resolved": {"hidden_dims": list(spec.hidden_dims),
                             "learning_rate": cfg.learning_rate,
                             "beta1": cfg.beta1, "beta2": cfg.beta2,
                             "epsilon": cfg.epsilon,
                             "batch_size": cfg.batch_size,
                             "epochs": cfg.epochs,
                             "validation_fraction": val_fraction,
                             "gradient_target": spec.gradient_target}},
        inputs=[p for p in (args.data, args.kinds, args.config) if p],
        outputs=[out, trace_path], seeds=[cfg.seed],
        summary={"final_train_accuracy": final_acc,
                 "best_epoch": result.best_epoch,
                 "parameter_count": result.network.parameter_count})
    print(f"wrote {out} (train accuracy {final_acc:.3f})")
    return 0


# ---------------------------------------------------------------------------
# attribute


def _baseline_for(args, dataset) -> attribution.BaselineVector:
    if args.baseline_file:
        with open(args.baseline_file, encoding="utf-8") as fh:
            doc = json.load(fh)
        return attribution.make_baseline(dataset.features,
                                         dataset.feature_kinds,
                                         override=np.asarray(doc["values"]))
    if args.baseline == "zero":
        return attribution.make_baseline(
            dataset.features, dataset.feature_kinds,
            override=np.zeros(dataset.n_features))
    return attribution.make_baseline(dataset.features, dataset.feature_kinds)


def cmd_attribute(args) -> int:
    net = nncore.load_model(args.model)
    dataset = _load_dataset(args)
    if dataset.n_features != net.input_dim:
        raise ShapeError(
            f"dataset has {dataset.n_features} features but the model "
            f"expects {net.input_dim}")
    if args.method not in ("ig", "shapley", "shapley-exact", "shapley-sampled"):
        raise ConfigError(f"unknown attribution method {args.method!r}")
    tag = pipeline.resolve_method_tag(args.method, dataset.n_features)
    baseline = _baseline_for(args, dataset)

    seed_seq = np.random.SeedSequence(args.seed)
    instance_seeds = seed_seq.generate_state(dataset.n_instances)

    instances = []
    for i in range(dataset.n_instances):
        x = dataset.features[i]
        target = int(dataset.labels[i])
        if tag == attribution.METHOD_IG:
            attr = attribution.integrated_gradients(net, x, baseline, target,
                                                    steps=args.steps)
        elif tag == attribution.METHOD_SHAPLEY_EXACT:
            attr = attribution.shapley_exact(net, x, baseline, target)
        else:
            attr = attribution.shapley_sampled(
                net, x, baseline, target, permutations=args.permutations,
                seed=int(instance_seeds[i]))
        instances.append({
            "index": i,
            "target_class": target,
            "class_name": dataset.class_names[target],
            "scores": [float(s) for s in attr.scores],
            "metadata": attr.metadata,
            "rows": attribution.to_rows(attr, dataset.feature_names),
        })

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    doc = {
        "format": ATTRIBUTION_FORMAT,
        "version": 1,
        "method": tag,
        "requested_method": args.method,
        "gradient_target": net.gradient_target,
        "feature_names": list(dataset.feature_names),
        "baseline": {"values": [float(v) for v in baseline.values],
                     "policies": list(baseline.policies)},
        "instances": instances,
    }
    _dump_json(out, doc)
    write_manifest(
        out.with_suffix(".manifest.json"), "attribute",
        config={"model": str(args.model), "data": str(args.data),
                "kinds": args.kinds, "method": args.method,
                "resolved_method": tag, "steps": args.steps,
                "permutations": args.permutations,
                "baseline": args.baseline,
                "baseline_file": args.baseline_file, "out": str(out)},
        inputs=[p for p in (args.model, args.data, args.kinds,
                            args.baseline_file) if p],
        outputs=[out], seeds=[args.seed])
    print(f"wrote {out} ({tag}, {dataset.n_instances} instances)")
    return 0


# ---------------------------------------------------------------------------
# fad


def _load_attribution_doc(path, dataset):
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != ATTRIBUTION_FORMAT:
        raise ConfigError(f"{path}: not an attribution document")
    if list(dataset.feature_names) != doc["feature_names"]:
        raise ConfigError(f"{path}: feature names do not match the dataset")
    if len(doc["instances"]) != dataset.n_instances:
        raise ConfigError(
            f"{path}: {len(doc['instances'])} attribution rows for "
            f"{dataset.n_instances} dataset instances")
    return doc


def _fad_from_files(args) -> int:
    if not args.attributions:
        raise ConfigError("file mode needs at least one --attributions document")
    if not args.model:
        raise ConfigError("file mode needs --model")
    net = nncore.load_model(args.model)
    dataset = _load_dataset(args)
    if dataset.n_features != net.input_dim:
        raise ShapeError("dataset and model feature counts disagree")

    rankings_by_method = {}
    baseline = None
    for path in args.attributions:
        doc = _load_attribution_doc(path, dataset)
        tag = doc["method"]
        if tag in rankings_by_method:
            raise ConfigError(f"duplicate attribution method {tag!r}")
        rankings_by_method[tag] = [
            attribution.rank_scores(np.asarray(inst["scores"], dtype=float))
            for inst in doc["instances"]
        ]
        doc_baseline = attribution.BaselineVector(
            np.asarray(doc["baseline"]["values"], dtype=float),
            tuple(doc["baseline"]["policies"]))
        if baseline is None:
            baseline = doc_baseline
        elif not np.array_equal(baseline.values, doc_baseline.values):
            raise ConfigError("attribution documents used different baselines")

    report, curves, _ = pipeline.single_model_fad(
        net, dataset, baseline, rankings_by_method, beta=args.beta)
    out = Path(args.out)
    written = pipeline.write_report_bundle(report, curves, curves, out)
    write_manifest(
        out / "manifest.json", "fad",
        config={"mode": "files", "model": str(args.model),
                "data": str(args.data), "kinds": args.kinds,
                "attributions": [str(p) for p in args.attributions],
                "beta": args.beta, "out": str(out)},
        inputs=[args.model, args.data,
                *(p for p in (args.kinds,) if p), *args.attributions],
        outputs=written, seeds=[])
    print(report.to_text_table(), end="")
    return 0


def _fad_end_to_end(args) -> int:
    methods = tuple(m for m in args.methods.split(",") if m.strip())
    if not methods:
        raise ConfigError("--methods must name at least one method")

    generated = args.data is None
    truth = None
    if not generated:
        dataset = _load_dataset(args)
        if args.truth:
            with open(args.truth, encoding="utf-8") as fh:
                truth = tuple(json.load(fh)["informative_indices"])
    if "oracle" in methods and not generated and truth is None:
        raise ConfigError("method 'oracle' needs --truth when --data is given")

    spec = nncore.NetSpec(hidden_dims=tuple(args.hidden))
    train_cfg = nncore.TrainConfig(epochs=args.epochs,
                                   batch_size=args.batch_size)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    reports = []
    seed_list = [args.seed + s for s in range(args.seeds)]
    for seed in seed_list:
        if generated:
            planted = pipeline.generate_vital_few(
                n_instances=args.gen_instances, n_features=args.gen_features,
                informative_fraction=args.gen_informative,
                n_classes=args.gen_classes, seed=seed)
            dataset = planted.dataset
            truth = tuple(int(i) for i in planted.informative_indices)
        config = pipeline.FADConfig(
            beta=args.beta, methods=methods, k_folds=args.k_folds, seed=seed,
            ig_steps=args.steps, shapley_permutations=args.permutations,
            jobs=args.jobs, oracle_indices=truth)
        result = pipeline.run_fad_analysis(dataset, spec, train_cfg, config)
        pipeline.write_analysis_outputs(result, out / f"seed-{seed}")
        reports.append(result.report)

    summary = {
        "seeds": seed_list,
        "methods": list(reports[0].methods),
        "per_seed_rows": [r.to_json_dict()["rows"] for r in reports],
        "win_rates_vs_random": {},
    }
    if "random" in methods:
        random_tag = pipeline.METHOD_RANDOM
        for tag in reports[0].methods:
            if tag != random_tag:
                summary["win_rates_vs_random"][tag] = pipeline.nauc_win_rate(
                    reports, tag, random_tag)
    _dump_json(out / "summary.json", summary)
    write_manifest(
        out / "manifest.json", "fad",
        config={"mode": "end-to-end", "data": None if generated else str(args.data),
                "kinds": args.kinds, "truth": args.truth,
                "methods": list(methods), "beta": args.beta,
                "k_folds": args.k_folds, "seeds": args.seeds,
                "jobs": args.jobs, "epochs": args.epochs,
                "batch_size": args.batch_size, "hidden": list(args.hidden),
                "steps": args.steps, "permutations": args.permutations,
                "gen": {"instances": args.gen_instances,
                        "features": args.gen_features,
                        "informative": args.gen_informative,
                        "classes": args.gen_classes} if generated else None,
                "out": str(out)},
        inputs=[p for p in (args.data, args.kinds, args.truth) if p],
        outputs=[out / "summary.json"], seeds=seed_list,
        summary={"win_rates_vs_random": summary["win_rates_vs_random"]})
    for tag, rate in summary["win_rates_vs_random"].items():
        print(f"win rate {tag} vs random: {rate:.3f}")
    print(f"wrote {out}/summary.json over {len(seed_list)} seed(s)")
    return 0


def cmd_fad(args) -> int:
    if args.end_to_end:
        return _fad_end_to_end(args)
    return _fad_from_files(args)


# ---------------------------------------------------------------------------
# match


def cmd_match(args) -> int:
    lexicon = matcher.EmbeddingLexicon.load(args.lexicon)
    mentions = matcher.load_mentions(args.mentions)
    assignments, filtered_fraction = matcher.assign_all(
        mentions, lexicon, epsilon=args.epsilon)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _dump_json(out, {
        "epsilon": args.epsilon,
        "total": len(assignments),
        "filtered_fraction": filtered_fraction,
        "assignments": [a.to_json_dict() for a in assignments],
    })
    write_manifest(
        out.with_suffix(".manifest.json"), "match",
        config={"lexicon": str(args.lexicon), "mentions": str(args.mentions),
                "epsilon": args.epsilon, "out": str(out)},
        inputs=[args.lexicon, args.mentions], outputs=[out], seeds=[],
        summary={"filtered_fraction": filtered_fraction,
                 "total": len(assignments)})
    print(f"assigned {len(assignments)} mentions, "
          f"filtered {filtered_fraction:.1%} below epsilon={args.epsilon}")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fadkit",
        description="Train dense classifiers, attribute their predictions, "
                    "and score attribution quality with feature-dropping "
                    "curves.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic vital-few dataset")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--instances", type=int, default=500)
    p.add_argument("--features", type=int, default=50)
    p.add_argument("--informative-fraction", type=float, default=0.2)
    p.add_argument("--classes", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train a dense classifier")
    p.add_argument("--data", required=True, help="dataset CSV")
    p.add_argument("--kinds", default=None, help="feature-kind sidecar JSON")
    p.add_argument("--config", required=True, help="training config JSON")
    p.add_argument("--out", required=True, help="model JSON path")
    p.add_argument("--seed", type=int, default=None,
                   help="override the config seed")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("attribute", help="per-instance feature attributions")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--kinds", default=None)
    p.add_argument("--method", required=True,
                   help="ig | shapley | shapley-exact | shapley-sampled")
    p.add_argument("--steps", type=int, default=attribution.IG_DEFAULT_STEPS)
    p.add_argument("--permutations", type=int, default=64)
    p.add_argument("--baseline", choices=("auto", "zero"), default="auto")
    p.add_argument("--baseline-file", default=None,
                   help="JSON {\"values\": [...]} override")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_attribute)

    p = sub.add_parser(
        "fad", help="feature-dropping curves and the normalized-area table")
    p.add_argument("--end-to-end", action="store_true",
                   help="run the full cross-validated study")
    p.add_argument("--model", default=None, help="model JSON (file mode)")
    p.add_argument("--data", default=None, help="dataset CSV")
    p.add_argument("--kinds", default=None)
    p.add_argument("--attributions", action="append", default=[],
                   help="attribution JSON, repeatable (file mode)")
    p.add_argument("--truth", default=None,
                   help="ground-truth JSON for the oracle method")
    p.add_argument("--beta", type=float, default=fadcurve.DEFAULT_BETA)
    p.add_argument("--methods", default="ig,shapley",
                   help="comma list: ig, shapley, shapley-exact, "
                        "shapley-sampled, oracle, random (end-to-end mode)")
    p.add_argument("--seeds", type=int, default=1,
                   help="number of end-to-end repetitions")
    p.add_argument("--seed", type=int, default=0, help="base seed")
    p.add_argument("--k-folds", type=int, default=5)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--hidden", type=_int_list, default=[32],
                   help="comma list of hidden widths")
    p.add_argument("--steps", type=int, default=attribution.IG_DEFAULT_STEPS)
    p.add_argument("--permutations", type=int, default=64)
    p.add_argument("--gen-instances", type=int, default=500)
    p.add_argument("--gen-features", type=int, default=50)
    p.add_argument("--gen-informative", type=float, default=0.2)
    p.add_argument("--gen-classes", type=int, default=3)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_fad)

    p = sub.add_parser("match", help="assign mention embeddings to a lexicon")
    p.add_argument("--lexicon", required=True)
    p.add_argument("--mentions", required=True)
    p.add_argument("--epsilon", type=float, default=matcher.DEFAULT_EPSILON)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_match)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DivergenceError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, ShapeError, DegenerateInputError, ExcludedCaseError,
            IndexError, KeyError, OSError, ValueError,
            json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
