"""Configuration-driven experiment orchestration.

One experiment is generate -> split -> train -> evaluate -> test -> report.
A config is a complete description of a run: every randomized stage derives
its seed from the master seed plus a fixed role label, so identical configs
produce byte-identical datasets, history files, and checkpoints on a
platform. Reports echo the full config and carry dataset digests so a run
can be verified and repeated from its report alone.
"""

from __future__ import annotations

import concurrent.futures
import hashlib
import json
import os
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

from matplotlib import pyplot as plt  # noqa: E402

from ._derive import derive_int
from .datasets import GameSpec, build_dataset, load_dataset, save_dataset, split_dataset
from .estimator import MlpDistinguisher, evaluate, resolve_hidden_layers
from .stats import BinomialTestResult, binomial_two_sided
from .training import DESK_SCHEDULE, TrainingHistory, TrainingSchedule

OUTPUT_ROOT_ENV = "CPALAB_OUT"

#: split sizes (per class) and schedules of the two bundled presets
PRESETS = {
    "desk": {"train_n": 5_000, "val_n": 1_000, "test_n": 1_000, "schedule": DESK_SCHEDULE},
    "paper": {"train_n": 500_000, "val_n": 100_000, "test_n": 100_000,
              "schedule": TrainingSchedule()},
}

#: cascade matrix order (rows = inner cipher, columns = outer cipher)
CASCADE_CIPHERS = ("aes-cbc", "aes-ctr", "aes-ecb", "chacha20", "des-ecb")


@dataclass(frozen=True)
class ExperimentConfig:
    """Sufficient description of one experiment."""

    experiment_id: str
    game: str = "single-cipher"
    cipher: str | None = None
    cascade: tuple[str, str] | None = None
    kem: str | None = None
    asym: str | None = None
    kem_corpus: str | None = None
    external_dataset: str | None = None
    plaintext_len: int = 16
    ss_len: int = 32
    mock_ct_len: int = 32
    modulus_bits: int = 2048
    include_iv: bool = True
    network: str | tuple[int, ...] = "small"
    train_n: int = 5_000
    val_n: int = 1_000
    test_n: int = 1_000
    schedule: TrainingSchedule = field(default_factory=lambda: DESK_SCHEDULE)
    alpha: float = 0.01
    seed: int = 0
    out_dir: str | None = None

    def game_spec(self) -> GameSpec:
        return GameSpec(
            game=self.game,
            samples_per_class=self.train_n + self.val_n + self.test_n,
            seed=derive_int(self.seed, "dataset"),
            plaintext_len=self.plaintext_len,
            cipher=self.cipher,
            cascade=self.cascade,
            kem=self.kem,
            asym=self.asym,
            kem_corpus=self.kem_corpus,
            ss_len=self.ss_len,
            mock_ct_len=self.mock_ct_len,
            modulus_bits=self.modulus_bits,
            include_iv=self.include_iv,
        )

    def scheme_label(self) -> str:
        if self.external_dataset:
            return f"external:{self.external_dataset}"
        if self.game == "single-cipher":
            if self.cascade is not None:
                inner, outer = self.cascade
                return f"{inner} -> {outer}"
            return str(self.cipher)
        return f"{self.kem} + {self.asym}"

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["cascade"] is not None:
            d["cascade"] = list(d["cascade"])
        if not isinstance(d["network"], str):
            d["network"] = list(d["network"])
        d["schedule"] = asdict(self.schedule)
        return d


def config_from_dict(data: dict, preset: str | None = None) -> ExperimentConfig:
    """Build a config; preset defaults first, explicit keys override."""
    data = dict(data)
    preset_name = preset or data.pop("preset", "desk")
    if preset_name not in PRESETS:
        raise ValueError(f"unknown preset {preset_name!r}; expected one of {sorted(PRESETS)}")
    base = PRESETS[preset_name]
    schedule = base["schedule"]
    if "schedule" in data:
        schedule = replace(schedule, **data.pop("schedule"))
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    kwargs = {
        "train_n": base["train_n"],
        "val_n": base["val_n"],
        "test_n": base["test_n"],
        **data,
        "schedule": schedule,
    }
    if kwargs.get("cascade") is not None:
        kwargs["cascade"] = tuple(kwargs["cascade"])
    if not isinstance(kwargs.get("network", "small"), str):
        kwargs["network"] = tuple(kwargs["network"])
    return ExperimentConfig(**kwargs)


def load_config(path: str | Path, preset: str | None = None) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return config_from_dict(json.load(fh), preset=preset)


def resolve_out_dir(config: ExperimentConfig, out_root: str | Path | None = None) -> Path:
    root = config.out_dir or out_root or os.environ.get(OUTPUT_ROOT_ENV) or "runs"
    return Path(root) / config.experiment_id


@dataclass
class RunReport:
    """Everything needed to read, verify, or repeat one experiment."""

    experiment_id: str
    config: dict
    scheme: str
    result: BinomialTestResult
    digests: dict
    best_epoch: int
    epochs_run: int
    timings: dict
    paths: dict

    def to_dict(self) -> dict:
        return {
            "experiment_id": self.experiment_id,
            "game": self.config["game"],
            "scheme": self.scheme,
            "net": self.config["network"],
            "n_test": self.result.n,
            "k": self.result.k,
            "accuracy": self.result.accuracy,
            "p_value": self.result.p_value_str(),
            "log2_p_value": self.result.log2_p_value,
            "reject": self.result.reject,
            "seed": self.config["seed"],
            "digests": self.digests,
            "best_epoch": self.best_epoch,
            "epochs_run": self.epochs_run,
            "timings": self.timings,
            "paths": self.paths,
            "config": self.config,
        }


def _sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_predictions(path: Path, labels, probabilities, predictions) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write("label,prob,pred\n")
        for y, p, yhat in zip(labels, probabilities, predictions):
            fh.write(f"{int(y)},{float(p)!r},{int(yhat)}\n")


def run_experiment(config: ExperimentConfig, out_root: str | Path | None = None) -> RunReport:
    """Full pipeline; artifacts land in <out>/<experiment_id>/."""
    out = resolve_out_dir(config, out_root)
    out.mkdir(parents=True, exist_ok=True)
    failed_marker = out / "FAILED.txt"
    stage = "setup"
    timings: dict[str, float] = {}
    try:
        stage = "generate"
        t0 = time.perf_counter()
        if config.external_dataset:
            dataset_path = Path(config.external_dataset)
            dataset = load_dataset(dataset_path)
        else:
            dataset = build_dataset(config.game_spec())
            dataset_path = out / "dataset.bin"
            save_dataset(dataset, dataset_path)
        timings[stage] = time.perf_counter() - t0

        stage = "split"
        t0 = time.perf_counter()
        train, val, test = split_dataset(
            dataset, config.train_n, config.val_n, config.test_n,
            seed=derive_int(config.seed, "split"),
        )
        timings[stage] = time.perf_counter() - t0

        stage = "train"
        t0 = time.perf_counter()
        est = MlpDistinguisher.from_schedule(
            config.schedule,
            hidden_layers=resolve_hidden_layers(config.network),
            random_state=derive_int(config.seed, "train"),
        )
        est.fit(train.features, train.labels, validation_data=(val.features, val.labels))
        history_path = out / "history.csv"
        est.history_.to_csv(history_path)
        checkpoint_path = out / "checkpoint.mlp"
        est.save(checkpoint_path)
        timings[stage] = time.perf_counter() - t0

        stage = "evaluate"
        t0 = time.perf_counter()
        ev = evaluate(est, test.features, test.labels)
        predictions_path = out / "predictions.csv"
        _write_predictions(predictions_path, test.labels, ev.probabilities, ev.predictions)
        timings[stage] = time.perf_counter() - t0

        stage = "test"
        result = binomial_two_sided(ev.k, ev.n, alpha=config.alpha)

        stage = "report"
        plot_path = out / "val_accuracy.svg"
        emit_plot({config.experiment_id: est.history_}, plot_path)
        report = RunReport(
            experiment_id=config.experiment_id,
            config=config.to_dict(),
            scheme=config.scheme_label(),
            result=result,
            digests={"dataset": _sha256_file(dataset_path)},
            best_epoch=est.best_epoch_,
            epochs_run=len(est.history_.records),
            timings=timings,
            paths={
                "dataset": str(dataset_path),
                "history": str(history_path),
                "checkpoint": str(checkpoint_path),
                "predictions": str(predictions_path),
                "report": str(out / "report.json"),
                "plot": str(plot_path),
            },
        )
        with open(out / "report.json", "w", encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        if failed_marker.exists():
            failed_marker.unlink()
        return report
    except Exception as exc:
        failed_marker.write_text(
            f"stage: {stage}\nerror: {exc}\n", encoding="utf-8"
        )
        raise RuntimeError(f"experiment {config.experiment_id!r} failed in stage "
                           f"{stage!r}: {exc}") from exc


def accepted_cascade_pairs() -> list[tuple[str, str]]:
    """The 17 tested (inner, outer) pairs of the cascade matrix."""
    pairs = []
    for inner in CASCADE_CIPHERS:
        for outer in CASCADE_CIPHERS:
            if _cascade_skip_reason(inner, outer) is None:
                pairs.append((inner, outer))
    return pairs


def _cascade_skip_reason(inner: str, outer: str) -> str | None:
    if inner == outer:
        return "no cipher is combined with itself"
    if {inner, outer} == {"aes-ecb", "des-ecb"}:
        return "both components deterministic"
    if (inner, outer) == ("aes-ctr", "chacha20"):
        return "commuting stream pair; tested in the other order"
    return None


def cascade_matrix_configs(
    base: dict | None = None, preset: str | None = None
) -> tuple[list[ExperimentConfig], list[dict]]:
    """Configs for every accepted cascade cell plus the skipped-cell records.

    ``base`` carries shared settings (network, seed, splits, schedule
    overrides); per-cell ids are '<prefix>inner--outer'.
    """
    base = dict(base or {})
    prefix = base.pop("experiment_id", "cascade")
    configs, skipped = [], []
    for inner in CASCADE_CIPHERS:
        for outer in CASCADE_CIPHERS:
            reason = _cascade_skip_reason(inner, outer)
            if reason is not None:
                skipped.append({"inner": inner, "outer": outer, "reason": reason})
                continue
            cell = dict(base)
            cell.update(
                experiment_id=f"{prefix}-{inner}--{outer}",
                game="single-cipher",
                cascade=[inner, outer],
            )
            configs.append(config_from_dict(cell, preset=preset))
    return configs, skipped


def run_matrix(
    configs: list[ExperimentConfig],
    out_root: str | Path | None = None,
    skipped: list[dict] | None = None,
    jobs: int = 1,
) -> list[dict]:
    """Run many experiments with per-cell fault isolation; returns cell rows."""

    def one(config: ExperimentConfig) -> dict:
        row = {
            "experiment_id": config.experiment_id,
            "scheme": config.scheme_label(),
            "inner": config.cascade[0] if config.cascade else None,
            "outer": config.cascade[1] if config.cascade else None,
        }
        try:
            report = run_experiment(config, out_root)
            row.update(
                status="ok",
                accuracy=report.result.accuracy,
                p_value=report.result.p_value_str(),
                reject=report.result.reject,
            )
        except Exception as exc:  # fault isolation: one bad cell cannot sink the matrix
            row.update(status="error", error=str(exc))
        return row

    if jobs > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(one, configs))
    else:
        rows = [one(c) for c in configs]
    for skip in skipped or []:
        rows.append(
            {
                "experiment_id": None,
                "scheme": f"{skip['inner']} -> {skip['outer']}",
                "inner": skip["inner"],
                "outer": skip["outer"],
                "status": "skipped",
                "reason": skip["reason"],
            }
        )
    return rows


def render_cascade_table(rows: list[dict]) -> str:
    """Text grid in the matrix layout: rows = inner cipher, columns = outer."""
    cells = {(r["inner"], r["outer"]): r for r in rows if r.get("inner")}
    width = 22
    header = "inner \\ outer".ljust(width) + "".join(c.ljust(width) for c in CASCADE_CIPHERS)
    lines = [header]
    for inner in CASCADE_CIPHERS:
        line = inner.ljust(width)
        for outer in CASCADE_CIPHERS:
            cell = cells.get((inner, outer))
            if cell is None:
                text = "-"
            elif cell["status"] == "ok":
                text = f"{100 * cell['accuracy']:.2f}% ({cell['p_value']})"
            elif cell["status"] == "skipped":
                text = "skipped"
            else:
                text = "ERROR"
            line += text.ljust(width)
        lines.append(line)
    return "\n".join(lines)


def emit_plot(
    histories: TrainingHistory | dict[str, TrainingHistory], path: str | Path
) -> None:
    """Validation accuracy over epochs as SVG, one line per experiment."""
    if isinstance(histories, TrainingHistory):
        histories = {"validation accuracy": histories}
    if not histories or all(not h.records for h in histories.values()):
        raise ValueError("emit_plot needs at least one non-empty history")
    plt.rcParams["svg.fonttype"] = "none"  # keep labels greppable in the SVG
    fig, ax = plt.subplots(figsize=(8.0, 4.5))
    lo, hi = 0.4, 1.0
    for label, history in histories.items():
        epochs = history.column("epoch")
        acc = history.column("val_acc")
        marker = "o" if len(epochs) == 1 else None
        ax.plot(epochs, acc, label=label, marker=marker)
        lo = min(lo, float(acc.min()) - 0.02)
        hi = max(hi, float(acc.max()) + 0.02)
    ax.axhline(0.5, color="gray", linestyle="--", linewidth=0.8, label="chance")
    ax.set_xlabel("epoch")
    ax.set_ylabel("validation accuracy")
    ax.set_ylim(lo, hi)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
