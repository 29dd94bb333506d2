"""Operator entry point.

Subcommands: gen-data, train, evaluate, cv, grid-search, ablate, explain,
summary, serve. Every subcommand writes machine-readable outputs to the
declared paths plus a human-readable summary on stdout, and is byte-for-byte
reproducible given identical argv and input files. Flag values override a
JSON config file (--config), which overrides built-in defaults.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional

from .data import (
    DEFAULT_SCHEMA,
    ValidationError,
    load_csv,
    load_schema,
    save_csv,
    split_train_test,
)
from .explain import (
    DEFAULT_EXACT_LIMIT,
    BackgroundSet,
    ExplainerError,
    exact_shapley,
    global_summary,
    kernel_shap,
    waterfall,
)
from .mlp import MlpConfig
from .model_io import ModelFormatError, load_model, save_model
from .numeric import Rng, derive_seed
from .synth import default_generator_spec, generate, load_generator_spec
from .training import (
    ABLATION_VARIANTS,
    TrainConfig,
    TrainingDiverged,
    cross_validate,
    evaluate,
    grid_search,
    run_ablation,
    train,
)

_TRAIN_FLAGS = (
    ("seed", int, 0),
    ("epochs", int, 1500),
    ("lr0", float, 0.005),
    ("step_size", int, 300),
    ("gamma", float, 0.8),
    ("clip_norm", float, 1.0),
    ("weight_decay", float, 0.01),
    ("batch_size", int, None),
)


def _add_train_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--epochs", type=int, default=None)
    parser.add_argument("--lr0", type=float, default=None)
    parser.add_argument("--step-size", type=int, default=None, dest="step_size")
    parser.add_argument("--gamma", type=float, default=None)
    parser.add_argument("--clip-norm", type=float, default=None, dest="clip_norm")
    parser.add_argument("--weight-decay", type=float, default=None, dest="weight_decay")
    parser.add_argument("--batch-size", type=int, default=None, dest="batch_size")
    parser.add_argument("--dropout", type=float, default=None)
    parser.add_argument("--layers", type=str, default=None, help="hidden sizes, e.g. 64,1000,200,8")


def _add_data_flags(parser: argparse.ArgumentParser, required: bool = True) -> None:
    parser.add_argument("--data", required=required)
    parser.add_argument("--schema", default=None)
    parser.add_argument("--ignore-extra-columns", action="store_true", dest="ignore_extra_columns")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shear-oracle",
        description="Train, evaluate and explain waste shear-strength regressors.",
    )
    parser.add_argument("--config", default=None, help="JSON file of default flag values")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write a synthetic dataset CSV")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--spec", default=None, help="generator spec JSON")

    p = sub.add_parser("train", help="train one target's regressor")
    _add_data_flags(p)
    p.add_argument("--target", choices=("friction", "cohesion"), required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--curve-out", default=None, dest="curve_out")
    p.add_argument("--report-out", default=None, dest="report_out")
    p.add_argument("--test-fraction", type=float, default=0.1, dest="test_fraction")
    p.add_argument("--background", type=int, default=20, help="embedded background rows")
    _add_train_flags(p)

    p = sub.add_parser("evaluate", help="metrics of a model on a dataset")
    _add_data_flags(p)
    p.add_argument("--model", required=True)
    p.add_argument("--out", default=None)

    p = sub.add_parser("cv", help="k-fold cross-validation")
    _add_data_flags(p)
    p.add_argument("--target", choices=("friction", "cohesion"), required=True)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--out", default=None)
    _add_train_flags(p)

    p = sub.add_parser("grid-search", help="exhaustive hyperparameter search")
    _add_data_flags(p)
    p.add_argument("--target", choices=("friction", "cohesion"), required=True)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--grid", required=True, help="JSON file: {param: [candidates]}")
    p.add_argument("--out", default=None)
    _add_train_flags(p)

    p = sub.add_parser("ablate", help="architecture ablation MAPE table")
    _add_data_flags(p)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--variants", default=None, help="JSON file: [[label, [sizes...]], ...]")
    p.add_argument(
        "--external",
        action="append",
        default=[],
        help="LABEL:TARGET=PATH prediction file for a non-trained row (repeatable)",
    )
    p.add_argument("--out", default=None)
    _add_train_flags(p)

    p = sub.add_parser("explain", help="attribute predictions for input rows")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True, help="CSV of rows to explain")
    p.add_argument("--method", choices=("exact", "kernel"), default="kernel")
    p.add_argument("--n-samples", type=int, default=2048, dest="n_samples")
    p.add_argument("--background", type=int, default=None, help="use first N embedded rows")
    p.add_argument("--exact-limit", type=int, default=DEFAULT_EXACT_LIMIT, dest="exact_limit")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.add_argument("--ignore-extra-columns", action="store_true", dest="ignore_extra_columns")

    p = sub.add_parser("summary", help="global attribution summary over a dataset")
    _add_data_flags(p)
    p.add_argument("--model", required=True)
    p.add_argument("--method", choices=("exact", "kernel"), default="kernel")
    p.add_argument("--n-samples", type=int, default=2048, dest="n_samples")
    p.add_argument("--background", type=int, default=None)
    p.add_argument("--exact-limit", type=int, default=DEFAULT_EXACT_LIMIT, dest="exact_limit")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)

    p = sub.add_parser("serve", help="run the JSON inference API")
    p.add_argument("--friction-model", required=True, dest="friction_model")
    p.add_argument("--cohesion-model", required=True, dest="cohesion_model")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--exact-limit", type=int, default=17, dest="exact_limit")
    p.add_argument("--static-dir", default=None, dest="static_dir", help="serve a UI bundle at /")

    return parser


def _load_config(path: Optional[str]) -> dict:
    if path is None:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ValidationError("config file must be a JSON object of flag values")
    return doc


def _effective(args, config: dict, key: str, default):
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in config:
        return config[key]
    return default


def _train_config(args, config: dict) -> TrainConfig:
    values = {key: _effective(args, config, key, default) for key, _, default in _TRAIN_FLAGS}
    return TrainConfig(**values)


def _mlp_config(args, config: dict, input_size: int) -> MlpConfig:
    layers = _effective(args, config, "layers", None)
    if layers is None:
        hidden = (64, 1000, 200, 8)
    elif isinstance(layers, str):
        hidden = tuple(int(tok) for tok in layers.split(",") if tok.strip())
    else:
        hidden = tuple(int(v) for v in layers)
    dropout = _effective(args, config, "dropout", 0.2)
    return MlpConfig(input_size=input_size, hidden_sizes=hidden, dropout_p=dropout)


def _schema_for(args, config: dict):
    path = _effective(args, config, "schema", None)
    return load_schema(path) if path else DEFAULT_SCHEMA


def _load_dataset(args, config: dict):
    schema = _schema_for(args, config)
    return load_csv(
        args.data, schema, ignore_extra_columns=bool(getattr(args, "ignore_extra_columns", False))
    )


def _write_json(path: Optional[str], doc: dict) -> None:
    if path is None:
        return
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _metrics_dict(metrics) -> dict:
    return {"mae": metrics.mae, "mape": metrics.mape, "r2": metrics.r2}


# ---------------------------------------------------------------------------
# Subcommands


def cmd_gen_data(args, config) -> int:
    spec = load_generator_spec(args.spec) if args.spec else default_generator_spec()
    seed = _effective(args, config, "seed", 0)
    dataset, _ = generate(spec, args.n, Rng(seed))
    save_csv(dataset, args.out)
    print(f"wrote {len(dataset)} samples to {args.out} (seed {seed})")
    return 0


def cmd_train(args, config) -> int:
    dataset = _load_dataset(args, config).for_target(args.target)
    train_config = _train_config(args, config)
    mlp_config = _mlp_config(args, config, input_size=len(dataset.schema))
    split_rng = Rng(derive_seed(train_config.seed, 11))
    train_set, test_set = split_train_test(dataset, args.test_fraction, split_rng)

    bundle, curve = train(
        train_set, test_set, mlp_config, train_config, background_size=args.background
    )
    digest = save_model(bundle, args.out)
    curve_out = args.curve_out or f"{args.out}.curve.csv"
    curve.to_csv(curve_out)

    metrics = evaluate(bundle, test_set)
    print(f"trained {args.target} model on {len(train_set)}/{len(test_set)} split")
    print(f"holdout: {metrics.describe()}")
    print(f"model {args.out} (sha256 {digest[:12]}...), curve {curve_out}")
    _write_json(
        args.report_out,
        {
            "target": args.target,
            "model_path": str(args.out),
            "model_sha256": digest,
            "holdout_metrics": _metrics_dict(metrics),
            "n_train": len(train_set),
            "n_test": len(test_set),
        },
    )
    return 0


def cmd_evaluate(args, config) -> int:
    bundle = load_model(args.model)
    dataset = load_csv(
        args.data,
        bundle.schema,
        ignore_extra_columns=bool(getattr(args, "ignore_extra_columns", False)),
    ).for_target(bundle.target_name)
    metrics = evaluate(bundle, dataset)
    print(f"{bundle.target_name} on {len(dataset)} samples: {metrics.describe()}")
    _write_json(
        args.out,
        {
            "target": bundle.target_name,
            "n_samples": len(dataset),
            "metrics": _metrics_dict(metrics),
            "model_sha256": bundle.checksum,
        },
    )
    return 0


def cmd_cv(args, config) -> int:
    dataset = _load_dataset(args, config).for_target(args.target)
    train_config = _train_config(args, config)
    mlp_config = _mlp_config(args, config, input_size=len(dataset.schema))
    result = cross_validate(dataset, mlp_config, train_config, args.k)
    for i, metrics in enumerate(result.fold_metrics):
        print(f"fold {i}: {metrics.describe()}")
    print(f"{args.k}-fold summary for {args.target}:")
    print(result.describe())
    _write_json(
        args.out,
        {
            "target": args.target,
            "k": args.k,
            "folds": [_metrics_dict(m) for m in result.fold_metrics],
            "mean": {"mae": result.mean_mae, "mape": result.mean_mape, "r2": result.mean_r2},
            "std": {"mae": result.std_mae, "mape": result.std_mape, "r2": result.std_r2},
        },
    )
    return 0


def cmd_grid_search(args, config) -> int:
    dataset = _load_dataset(args, config).for_target(args.target)
    with open(args.grid, "r", encoding="utf-8") as fh:
        grids = json.load(fh)
    train_config = _train_config(args, config)
    mlp_config = _mlp_config(args, config, input_size=len(dataset.schema))
    points = grid_search(dataset, grids, mlp_config, train_config, args.k)
    print(f"{len(points)} configurations, ranked by mean {args.k}-fold MAE:")
    for rank, point in enumerate(points, start=1):
        print(f"{rank:3d}. MAE {point.mean_mae:.4f} ± {point.std_mae:.4f}  {point.values}")
    _write_json(
        args.out,
        {
            "target": args.target,
            "k": args.k,
            "ranking": [
                {"values": p.values, "mean_mae": p.mean_mae, "std_mae": p.std_mae}
                for p in points
            ],
        },
    )
    return 0


def _parse_external(entries: list[str]) -> dict:
    external: dict = {}
    for entry in entries:
        try:
            label_target, path = entry.split("=", 1)
            label, target = label_target.rsplit(":", 1)
        except ValueError:
            raise ValidationError(
                f"bad --external {entry!r}; expected LABEL:TARGET=PATH"
            )
        if target not in ("friction", "cohesion"):
            raise ValidationError(f"bad --external target {target!r}")
        external.setdefault(label, {})[target] = path
    return external


def cmd_ablate(args, config) -> int:
    dataset = _load_dataset(args, config)
    train_config = _train_config(args, config)
    if args.variants:
        with open(args.variants, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        variants = [(str(label), tuple(int(h) for h in hidden)) for label, hidden in doc]
    else:
        variants = list(ABLATION_VARIANTS)
    report = run_ablation(
        dataset, variants, train_config, args.k, external=_parse_external(args.external)
    )
    print(report.render_table())
    _write_json(args.out, report.to_dict())
    return 0


def _background_for(bundle, limit: Optional[int]) -> BackgroundSet:
    bg = BackgroundSet.from_bundle(bundle)
    if limit is not None and limit < bg.rows.shape[0]:
        provenance = dict(bg.provenance)
        provenance["truncated_to"] = limit
        return BackgroundSet(rows=bg.rows[:limit], provenance=provenance)
    return bg


def _explain_one(bundle, features, args) -> dict:
    background = _background_for(bundle, args.background)
    if args.method == "exact":
        expl = exact_shapley(bundle, features, background, exact_limit=args.exact_limit)
    else:
        expl = kernel_shap(
            bundle, features, background, n_samples=args.n_samples, seed=args.seed
        )
    residual = expl.reconstruction_residual()
    if residual > 1e-6 * max(1.0, abs(expl.prediction)):
        raise ExplainerError(
            f"internal: attribution failed local accuracy (residual {residual})"
        )
    doc = expl.to_dict()
    doc["waterfall"] = [
        {"label": s.label, "phi": s.phi, "cumulative": s.cumulative} for s in waterfall(expl)
    ]
    return doc


def cmd_explain(args, config) -> int:
    bundle = load_model(args.model)
    dataset = load_csv(
        args.input,
        bundle.schema,
        ignore_extra_columns=bool(getattr(args, "ignore_extra_columns", False)),
    )
    if len(dataset) == 0:
        raise ValidationError("input file has no rows to explain")
    reports = [_explain_one(bundle, s.features, args) for s in dataset.samples]
    for i, doc in enumerate(reports):
        print(
            f"row {i}: base {doc['base_value']:.4f} -> prediction {doc['prediction']:.4f} "
            f"({bundle.target_name}, {doc['method']})"
        )
        top = sorted(doc["features"], key=lambda f: -abs(f["phi"]))[:5]
        for entry in top:
            print(f"    {entry['name']:<18} {entry['phi']:+.4f}")
    _write_json(
        args.out,
        {
            "target": bundle.target_name,
            "model_sha256": bundle.checksum,
            "explanations": reports,
        },
    )
    return 0


def cmd_summary(args, config) -> int:
    bundle = load_model(args.model)
    dataset = load_csv(
        args.data,
        bundle.schema,
        ignore_extra_columns=bool(getattr(args, "ignore_extra_columns", False)),
    )
    background = _background_for(bundle, args.background)
    n_samples = args.n_samples if args.method == "kernel" else "full"
    summary = global_summary(
        bundle,
        dataset,
        background,
        method=args.method,
        n_samples=n_samples,
        exact_limit=args.exact_limit,
        seed=args.seed,
    )
    print(f"mean |phi| ranking over {len(dataset)} samples ({bundle.target_name}):")
    for name in summary.ranking[:10]:
        j = summary.feature_names.index(name)
        print(
            f"    {name:<18} mean|phi| {summary.mean_abs_phi[j]:.4f} "
            f"mean phi {summary.mean_signed_phi[j]:+.4f}"
        )
    _write_json(
        args.out,
        {
            "target": bundle.target_name,
            "model_sha256": bundle.checksum,
            "summary": summary.to_dict(),
        },
    )
    return 0


def cmd_serve(args, config) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(
        friction_model=args.friction_model,
        cohesion_model=args.cohesion_model,
        exact_limit=args.exact_limit,
        static_dir=args.static_dir,
    )
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


_DISPATCH = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "cv": cmd_cv,
    "grid-search": cmd_grid_search,
    "ablate": cmd_ablate,
    "explain": cmd_explain,
    "summary": cmd_summary,
    "serve": cmd_serve,
}


def execute(argv) -> int:
    """Parse argv and run one subcommand; returns the process exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        config = _load_config(args.config)
        return _DISPATCH[args.command](args, config)
    except (
        ValidationError,
        ModelFormatError,
        ExplainerError,
        TrainingDiverged,
        ValueError,
        OSError,
        json.JSONDecodeError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main(argv=None) -> int:
    return execute(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    sys.exit(main())
