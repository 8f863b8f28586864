"""Command-line interface: generate / train / evaluate / test / run / matrix
/ plot / report."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from ._derive import derive_int
from .datasets import build_dataset, load_dataset, save_dataset, split_dataset
from .estimator import MlpDistinguisher, evaluate, resolve_hidden_layers
from .experiments import (
    ExperimentConfig,
    cascade_matrix_configs,
    config_from_dict,
    emit_plot,
    render_cascade_table,
    resolve_out_dir,
    run_experiment,
    run_matrix,
)
from .stats import binomial_two_sided
from .training import TrainingHistory


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="experiment config (JSON)")
    p.add_argument("--seed", type=int, default=None, help="override the master seed")
    p.add_argument("--out", default=None, help="output root (default $CPALAB_OUT or ./runs)")
    p.add_argument("--preset", choices=["paper", "desk"], default=None,
                   help="split/schedule preset; config values still override")
    p.add_argument("--include-iv", choices=["true", "false"], default=None,
                   help="include the clear IV/nonce bytes in the feature vector")


def _config_from_args(args) -> ExperimentConfig:
    with open(args.config, encoding="utf-8") as fh:
        data = json.load(fh)
    if args.seed is not None:
        data["seed"] = args.seed
    if args.include_iv is not None:
        data["include_iv"] = args.include_iv == "true"
    return config_from_dict(data, preset=args.preset)


def _cmd_generate(args) -> int:
    config = _config_from_args(args)
    out = resolve_out_dir(config, args.out)
    out.mkdir(parents=True, exist_ok=True)
    dataset = build_dataset(config.game_spec())
    path = out / "dataset.bin"
    save_dataset(dataset, path)
    print(f"wrote {path} ({dataset.n_samples} samples, {dataset.feature_len} features)")
    return 0


def _cmd_train(args) -> int:
    config = _config_from_args(args)
    dataset = load_dataset(args.dataset)
    train, val, _ = split_dataset(
        dataset, config.train_n, config.val_n, config.test_n,
        seed=derive_int(config.seed, "split"),
    )
    est = MlpDistinguisher.from_schedule(
        config.schedule,
        hidden_layers=resolve_hidden_layers(config.network),
        random_state=derive_int(config.seed, "train"),
    )
    est.fit(train.features, train.labels, validation_data=(val.features, val.labels))
    out = resolve_out_dir(config, args.out)
    out.mkdir(parents=True, exist_ok=True)
    est.history_.to_csv(out / "history.csv")
    est.save(out / "checkpoint.mlp")
    best = est.history_.records[est.best_epoch_ - 1]
    print(f"trained {len(est.history_.records)} epochs; "
          f"best epoch {est.best_epoch_} (val_loss={best.val_loss:.6f}, "
          f"val_acc={best.val_acc:.4f})")
    print(f"wrote {out / 'history.csv'} and {out / 'checkpoint.mlp'}")
    return 0


def _cmd_evaluate(args) -> int:
    est = MlpDistinguisher.load(args.checkpoint)
    dataset = load_dataset(args.dataset)
    result = evaluate(est, dataset.features, dataset.labels)
    out = Path(args.out) if args.out else Path("predictions.csv")
    with open(out, "w", encoding="ascii") as fh:
        fh.write("label,prob,pred\n")
        for y, p, yhat in zip(dataset.labels, result.probabilities, result.predictions):
            fh.write(f"{int(y)},{float(p)!r},{int(yhat)}\n")
    print(f"accuracy {result.accuracy:.4f} ({result.k}/{result.n}); wrote {out}")
    return 0


def _cmd_test(args) -> int:
    k = n = 0
    with open(args.predictions, newline="", encoding="ascii") as fh:
        for row in csv.DictReader(fh):
            n += 1
            k += int(row["pred"]) == int(row["label"])
    if n == 0:
        print("predictions file holds no rows", file=sys.stderr)
        return 1
    result = binomial_two_sided(k, n, alpha=args.alpha)
    print(json.dumps({
        "n": result.n, "k": result.k,
        "accuracy": result.accuracy,
        "p_value": result.p_value_str(),
        "log2_p_value": result.log2_p_value,
        "alpha": result.alpha,
        "reject": result.reject,
    }, indent=2))
    return 0


def _cmd_run(args) -> int:
    config = _config_from_args(args)
    report = run_experiment(config, args.out)
    d = report.to_dict()
    print(json.dumps({key: d[key] for key in
                      ("experiment_id", "scheme", "net", "n_test", "k",
                       "accuracy", "p_value", "reject")}, indent=2))
    print(f"report: {report.paths['report']}")
    return 0


def _cmd_matrix(args) -> int:
    with open(args.config, encoding="utf-8") as fh:
        base = json.load(fh)
    if args.seed is not None:
        base["seed"] = args.seed
    if args.include_iv is not None:
        base["include_iv"] = args.include_iv == "true"
    configs, skipped = cascade_matrix_configs(base, preset=args.preset)
    rows = run_matrix(configs, out_root=args.out, skipped=skipped, jobs=args.jobs)
    print(render_cascade_table(rows))
    if args.out:
        path = Path(args.out) / "matrix.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(rows, fh, indent=2)
            fh.write("\n")
        print(f"wrote {path}")
    failures = [r for r in rows if r["status"] == "error"]
    return 1 if failures else 0


def _cmd_plot(args) -> int:
    histories = {Path(p).stem: TrainingHistory.from_csv(p) for p in args.history}
    emit_plot(histories, args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_report(args) -> int:
    rows = []
    for path in args.results:
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
        rows.append((d["experiment_id"], f"{100 * d['accuracy']:.2f}%",
                     d["p_value"], d["reject"]))
    widths = [max([len("experiment")] + [len(r[0]) for r in rows]) + 2, 12, 12, 8]
    header = ["experiment", "accuracy", "p_value", "reject"]
    print("".join(h.ljust(w) for h, w in zip(header, widths)))
    for r in rows:
        print("".join(str(v).ljust(w) for v, w in zip(r, widths)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cpalab",
        description="Empirical ciphertext-indistinguishability testing: generate "
                    "labeled ciphertext corpora, train neural distinguishers, and "
                    "decide significance with an exact binomial test.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="build and save the dataset only")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("train", help="train on an existing dataset file")
    _add_config_flags(p)
    p.add_argument("--dataset", required=True, help="dataset file from 'generate'")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", help="run a checkpoint over a dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", default=None, help="predictions CSV path")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("test", help="binomial test on a predictions file")
    p.add_argument("--predictions", required=True)
    p.add_argument("--alpha", type=float, default=0.01)
    p.set_defaults(func=_cmd_test)

    p = sub.add_parser("run", help="full pipeline: generate, train, evaluate, test")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("matrix", help="run the cascade combination matrix")
    _add_config_flags(p)
    p.add_argument("--jobs", type=int, default=1, help="concurrent experiments")
    p.set_defaults(func=_cmd_matrix)

    p = sub.add_parser("plot", help="validation-accuracy SVG from history CSVs")
    p.add_argument("--history", nargs="+", required=True)
    p.add_argument("--out", required=True, help="output SVG path")
    p.set_defaults(func=_cmd_plot)

    p = sub.add_parser("report", help="tabulate report.json files")
    p.add_argument("--results", nargs="+", required=True)
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
