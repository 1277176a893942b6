"""Command-line surface for the full pipeline.

Subcommands: prepare, train, evaluate, rank-features, gradcheck, serve.
Flags may also come from a flat key=value config file (--config); explicit
command-line flags win. Reports and artifacts go to files; logs go to
standard error.

Exit codes are a stable contract:
    0  success
    1  usage error
    2  data error (missing/malformed input, digest mismatch, divergence)
    3  verification failure (gradient check out of tolerance)
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import metrics as metrics_mod
from . import models as models_mod
from . import nncore, persist, serve
from .errors import DataError
from .ingest import DEFAULT_SCHEMA, TABLE1_FEATURES, binarize_label, load_file
from .preprocess import (
    EncodedDataset,
    encode_dataset,
    encoder_file_digest,
    fit_encoder,
    load_encoder,
    rank_features,
    save_encoder,
    select_top_k,
    split_indices,
)

SMOKE_ROW_CAP = 20000
SMOKE_EPOCHS = 10

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_VERIFICATION = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _log(msg):
    print(msg, file=sys.stderr)


def _read_config_file(path) -> dict[str, str]:
    values = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read config file {path}: {exc}") from None
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise DataError(f"config file {path} line {line_no}: expected key = value")
        key, _, value = stripped.partition("=")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _apply_config(subparser: argparse.ArgumentParser, config: dict[str, str]):
    """Coerce config strings with each flag's declared type and install them
    as defaults, so explicit flags still win."""
    coerced = {}
    for action in subparser._actions:
        if action.dest in config:
            raw = config[action.dest]
            if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
                coerced[action.dest] = raw.lower() in ("1", "true", "yes", "on")
            elif action.type is not None:
                try:
                    coerced[action.dest] = action.type(raw)
                except ValueError:
                    raise DataError(f"config key {action.dest!r}: cannot parse {raw!r}") from None
            else:
                coerced[action.dest] = raw
    subparser.set_defaults(**coerced)


def _load_records(path, smoke=False):
    try:
        records = load_file(path)
    except OSError as exc:
        raise DataError(f"cannot read dataset {path}: {exc}") from None
    _log(f"parsed {len(records)} records from {path}")
    if smoke and len(records) > SMOKE_ROW_CAP:
        records = records[:SMOKE_ROW_CAP]
        _log(f"smoke profile: capped at {SMOKE_ROW_CAP} records")
    if not records:
        raise DataError(f"dataset {path} contains no records")
    return records


def _class_counts(labels) -> dict[str, int]:
    attack = int(np.sum(np.asarray(labels) == 1))
    return {"normal": int(len(labels) - attack), "attack": attack}


def cmd_prepare(args) -> int:
    records = _load_records(args.data, args.smoke)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    train_idx, test_idx = split_indices(len(records), args.ratio, args.seed)

    schema = DEFAULT_SCHEMA
    ranking_doc = None
    if args.features == "topk":
        fit_records = records if args.fit_on_all else [records[i] for i in train_idx]
        labels = [binarize_label(r.label) for r in fit_records]
        report = rank_features(fit_records, labels, schema)
        selected = select_top_k(report, args.k)
        schema = schema.with_selected(selected)
        ranking_doc = {"ranking": [[n, s] for n, s in report.ranking], "selected": selected}
        _log(f"top-{args.k} ranked features: {', '.join(selected)}")

    if args.fit_on_all:
        encoder = fit_encoder(records, schema)
        full = encode_dataset(records, encoder)
        train = EncodedDataset(full.matrix[train_idx], full.labels[train_idx], full.feature_layout)
        test = EncodedDataset(full.matrix[test_idx], full.labels[test_idx], full.feature_layout)
    else:
        train_records = [records[i] for i in train_idx]
        test_records = [records[i] for i in test_idx]
        encoder = fit_encoder(train_records, schema)
        train = encode_dataset(train_records, encoder)
        test = encode_dataset(test_records, encoder)

    save_encoder(encoder, out / "encoder.nidsenc")
    np.save(out / "train_x.npy", train.matrix)
    np.save(out / "train_y.npy", train.labels)
    np.save(out / "test_x.npy", test.matrix)
    np.save(out / "test_y.npy", test.labels)
    if ranking_doc is not None:
        (out / "ranking.json").write_text(json.dumps(ranking_doc, indent=2) + "\n", encoding="utf-8")

    summary = {
        "rows_total": len(records),
        "train_rows": len(train),
        "test_rows": len(test),
        "train_class_counts": _class_counts(train.labels),
        "test_class_counts": _class_counts(test.labels),
        "output_dim": encoder.output_dim,
        "features": list(encoder.feature_order),
        "ratio": args.ratio,
        "seed": args.seed,
        "fit_on_all": bool(args.fit_on_all),
        "encoder_digest": encoder_file_digest(out / "encoder.nidsenc"),
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    _log(f"train rows: {len(train)}  test rows: {len(test)}  encoded dim: {encoder.output_dim}")
    _log(f"train classes: {summary['train_class_counts']}  test classes: {summary['test_class_counts']}")
    return EXIT_OK


def _load_prepared(prepared):
    prepared = Path(prepared)
    needed = ["encoder.nidsenc", "train_x.npy", "train_y.npy", "test_x.npy", "test_y.npy"]
    missing = [n for n in needed if not (prepared / n).exists()]
    if missing:
        raise DataError(f"{prepared} is not a prepared data directory (missing {', '.join(missing)}); run prepare first")
    encoder = load_encoder(prepared / "encoder.nidsenc")
    digest = encoder_file_digest(prepared / "encoder.nidsenc")
    train = EncodedDataset(np.load(prepared / "train_x.npy"), np.load(prepared / "train_y.npy"), encoder.layout)
    test = EncodedDataset(np.load(prepared / "test_x.npy"), np.load(prepared / "test_y.npy"), encoder.layout)
    return encoder, digest, train, test


def cmd_train(args) -> int:
    encoder, digest, train_data, _ = _load_prepared(args.prepared)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    archs = models_mod.ARCHITECTURES if args.arch == "all" else (args.arch,)
    epochs = args.epochs if args.epochs is not None else (SMOKE_EPOCHS if args.smoke else 100)
    config = models_mod.TrainConfig(
        epochs=epochs,
        lr=args.lr,
        batch_size=args.batch_size,
        validation_fraction=args.validation_fraction,
        seed=args.seed,
        threshold=args.threshold,
    )
    for arch in archs:
        spec, net = models_mod.build(arch, encoder.output_dim, config.seed)
        _log(f"training {arch}: {spec.param_count} parameters, {config.epochs} epochs")
        model = models_mod.train(spec, net, train_data, config)
        persist.write_model(model, digest, out / f"{arch}.nidsmodel")
        (out / f"{arch}_history.csv").write_text(models_mod.history_csv(model), encoding="utf-8")
        last = model.history[-1]
        _log(f"{arch}: train loss {last.train_loss:.4f}  val loss {last.val_loss:.4f}  val acc {last.val_accuracy:.4f}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    _, digest, _, test_data = _load_prepared(args.prepared)
    models_dir = Path(args.models)
    artifacts = sorted(models_dir.glob("*.nidsmodel"))
    if not artifacts:
        raise DataError(f"no .nidsmodel artifacts in {models_dir}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    reports = {}
    for path in artifacts:
        model = persist.read_model(path)
        if model.encoder_digest != digest:
            raise DataError(
                f"{path.name}: encoder digest mismatch (model {model.encoder_digest}, prepared data {digest})"
            )
        threshold = args.threshold if args.threshold is not None else model.threshold
        scores = model.net.scores(test_data.matrix)
        report = metrics_mod.evaluate(scores, test_data.labels, threshold)
        reports[model.spec.arch] = report
        (out / f"roc_{model.spec.arch}.csv").write_text(metrics_mod.roc_csv(report), encoding="utf-8")
        _log(
            f"{model.spec.arch}: accuracy {report.accuracy:.4f}  precision {report.precision:.4f}  "
            f"recall {report.recall:.4f}  f1 {report.f1:.4f}  auc {report.auc:.4f}"
        )
    (out / "metrics.json").write_text(metrics_mod.report_json(reports), encoding="utf-8")
    (out / "metrics.csv").write_text(metrics_mod.metrics_csv(reports), encoding="utf-8")
    (out / "confusion.csv").write_text(metrics_mod.confusion_csv(reports), encoding="utf-8")
    (out / "auc.csv").write_text(metrics_mod.auc_csv(reports), encoding="utf-8")
    return EXIT_OK


def cmd_rank_features(args) -> int:
    records = _load_records(args.data)
    labels = [binarize_label(r.label) for r in records]
    report = rank_features(records, labels, DEFAULT_SCHEMA)
    selected = select_top_k(report, args.k)
    doc = {"ranking": [[n, s] for n, s in report.ranking], "selected": selected}
    Path(args.out).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    overlap = sorted(set(selected) & set(TABLE1_FEATURES))
    _log(f"top-{args.k}: {', '.join(selected) if selected else '(empty selection)'}")
    if args.k == 0:
        _log("warning: k = 0 selects nothing")
    _log(f"overlap with the default 12-feature set: {len(overlap)}/12")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    layers = [args.layer] if args.layer else None
    try:
        reports = nncore.run_all_checks(seeds=range(args.seeds), tolerance=args.tolerance, layers=layers)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    failed = 0
    for name in sorted(reports):
        r = reports[name]
        ok = r.passed(args.tolerance)
        failed += not ok
        where = f" (worst: {r.worst_input}{list(r.worst_index)}, analytic {r.analytic:.3e}, numeric {r.numeric:.3e})"
        _log(f"{name:<16} max rel error {r.max_rel_error:.3e}  {'PASS' if ok else 'FAIL' + where}")
    if failed:
        _log(f"{failed} layer kind(s) exceeded tolerance {args.tolerance}")
        return EXIT_VERIFICATION
    return EXIT_OK


def cmd_serve(args) -> int:
    host, _, port = args.bind.rpartition(":")
    if not host or not port.isdigit():
        raise DataError(f"--bind must look like HOST:PORT, got {args.bind!r}")
    server = serve.make_server(args.model, args.encoder, (host, int(port)), args.threshold)
    _log(f"serving {server.model.spec.arch} on {host}:{server.port} (threshold {server.threshold})")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        _log("shutting down")
        server.shutdown()
    finally:
        server.server_close()
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="nidsdl", description="NSL-KDD intrusion-detection pipeline")
    parser.add_argument("--config", help="flat key = value config file; flags override")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    p = sub.add_parser("prepare", help="parse, encode, and split a dataset")
    p.add_argument("--data", required=True, help="path to a local NSL-KDD record file (never downloaded)")
    p.add_argument("--out", required=True, help="output directory for encoder + encoded splits")
    p.add_argument("--ratio", type=float, default=0.85, help="train fraction (0.85 default; 0.75 supported)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--features", choices=("table1", "topk"), default="table1",
                   help="fixed 12-feature set, or top-k by correlation ranking")
    p.add_argument("--k", type=int, default=12, help="feature count when --features topk")
    p.add_argument("--fit-on-all", action="store_true",
                   help="fit the encoder before splitting (strict replication mode)")
    p.add_argument("--smoke", action="store_true", help=f"cap input at {SMOKE_ROW_CAP} rows")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="train classifiers on prepared data")
    p.add_argument("--prepared", required=True, help="directory produced by prepare")
    p.add_argument("--out", required=True, help="output directory for model artifacts")
    p.add_argument("--arch", default="all", choices=("all",) + models_mod.ARCHITECTURES)
    p.add_argument("--epochs", type=int, default=None, help="default 100 (10 under --smoke)")
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--batch-size", type=int, default=1024)
    p.add_argument("--validation-fraction", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--smoke", action="store_true", help=f"{SMOKE_EPOCHS}-epoch CI profile")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score artifacts on the prepared test split")
    p.add_argument("--prepared", required=True)
    p.add_argument("--models", required=True, help="directory holding .nidsmodel artifacts")
    p.add_argument("--out", required=True, help="output directory for report files")
    p.add_argument("--threshold", type=float, default=None, help="override the stored threshold")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("rank-features", help="rank features by |Pearson| against the label")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="ranking report file (JSON)")
    p.add_argument("--k", type=int, default=12)
    p.set_defaults(func=cmd_rank_features)

    p = sub.add_parser("gradcheck", help="finite-difference check of every layer kind")
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--seeds", type=int, default=20, help="random shapes per layer kind")
    p.add_argument("--layer", choices=tuple(nncore.LAYER_CHECKS), default=None)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("serve", help="run the TCP classification service")
    p.add_argument("--model", required=True, help=".nidsmodel artifact")
    p.add_argument("--encoder", required=True, help=".nidsenc encoder file")
    p.add_argument("--bind", default="127.0.0.1:7316")
    p.add_argument("--threshold", type=float, default=None)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args, _ = parser.parse_known_args(argv)
        if args.config:
            config = _read_config_file(args.config)
            known = set()
            for sp in parser._subparsers._group_actions[0].choices.values():
                for action in sp._actions:
                    known.add(action.dest)
                _apply_config(sp, config)
            unknown = set(config) - known
            if unknown:
                parser.error(f"unknown config key(s): {', '.join(sorted(unknown))}")
        args = parser.parse_args(argv)
        if not getattr(args, "func", None):
            parser.error("a command is required")
        return args.func(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


def entrypoint():
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
