"""Recognition experiments over image corpora, accuracy metrics and report files."""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import (
    CacheMiss,
    DatasetMismatch,
    EmptyPredictionList,
    WriteFailure,
    WrongModality,
)
from .ingest import IMAGE_MODALITIES, DatasetManifest, ImageCorpus, ImageSample, load_image_corpus
from .llm import Backend, BackendConfig, ModelRequest, ParsedLabel, open_backend, parse_class_label
from .prompt import TEMPLATE_VERSION, ShotStrategy, render_image_prompt, sample_exemplars

DEFAULT_TRIALS = 5
REPORT_SCHEMA = 1


@dataclass(frozen=True)
class Prediction:
    sample_id: str
    truth: str
    parsed: ParsedLabel
    correct: bool


@dataclass(frozen=True)
class Trial:
    trial_index: int
    seed: int
    predictions: tuple[Prediction, ...]
    accuracy: float


@dataclass(frozen=True)
class Confusion:
    """Square count matrix (truth rows, predicted columns) plus off-class answers per truth class."""

    labels: tuple[str, ...]
    matrix: tuple[tuple[int, ...], ...]
    off_class: tuple[int, ...]

    def row_totals(self) -> list[int]:
        return [sum(row) + off for row, off in zip(self.matrix, self.off_class)]

    @property
    def total(self) -> int:
        return sum(self.row_totals())

    @property
    def trace(self) -> int:
        return sum(self.matrix[i][i] for i in range(len(self.labels)))


@dataclass(frozen=True)
class EvaluationReport:
    dataset_id: str
    task: str
    strategy: str  # "zero_shot" | "one_shot"
    model_id: str
    backend: str
    template_version: str
    base_seed: int
    trials: tuple[Trial, ...]
    mean_accuracy: float
    compliant_fraction: float
    confusion: Confusion

    @property
    def seeds(self) -> list[int]:
        return [t.seed for t in self.trials]


@dataclass(frozen=True)
class StrategyDelta:
    zero_shot_accuracy: float
    one_shot_accuracy: float
    delta: float  # percentage points, 2 decimals

    def describe(self) -> str:
        return (
            f"zero-shot {self.zero_shot_accuracy:.4f}, one-shot {self.one_shot_accuracy:.4f}, "
            f"delta {self.delta:+.2f} points"
        )


# -- metrics --------------------------------------------------------------------

def compute_accuracy(predictions: Sequence[tuple[str, ParsedLabel]]) -> float:
    """Share of predictions whose parsed label equals the truth; off-class counts as wrong."""
    if not predictions:
        raise EmptyPredictionList("no predictions to score")
    correct = sum(1 for truth, parsed in predictions if parsed.label is not None and parsed.label == truth)
    return correct / len(predictions)


def build_confusion(labels: Sequence[str], predictions: Iterable[Prediction]) -> Confusion:
    index = {c: i for i, c in enumerate(labels)}
    k = len(labels)
    matrix = [[0] * k for _ in range(k)]
    off = [0] * k
    for p in predictions:
        t = index[p.truth]
        if p.parsed.label is None:
            off[t] += 1
        else:
            matrix[t][index[p.parsed.label]] += 1
    return Confusion(tuple(labels), tuple(tuple(r) for r in matrix), tuple(off))


def compare_strategies(zero_report: EvaluationReport, one_report: EvaluationReport) -> StrategyDelta:
    if (zero_report.dataset_id, zero_report.task) != (one_report.dataset_id, one_report.task):
        raise DatasetMismatch(
            f"cannot compare {zero_report.dataset_id}/{zero_report.task} "
            f"with {one_report.dataset_id}/{one_report.task}"
        )
    if zero_report.strategy != "zero_shot" or one_report.strategy != "one_shot":
        raise ValueError("expected a zero-shot report followed by a one-shot report")
    zero, one = zero_report.mean_accuracy, one_report.mean_accuracy
    return StrategyDelta(zero, one, round((one - zero) * 100.0, 2))


# -- experiment -----------------------------------------------------------------

def _variant(strategy) -> str:
    if isinstance(strategy, ShotStrategy):
        return strategy.variant
    v = str(strategy).replace("-", "_")
    if v not in ("zero_shot", "one_shot"):
        raise ValueError(f"unknown strategy {strategy!r}")
    return v


def trial_requests(corpus: ImageCorpus, modality_name: str, variant: str, seed: int,
                   backend: Backend) -> list[tuple[ImageSample, ModelRequest]]:
    """The (sample, request) pairs one trial issues, in corpus order."""
    if variant == "one_shot":
        exemplars, pool = sample_exemplars(corpus, seed)
    else:
        exemplars, pool = None, list(corpus.samples)
    out = []
    for sample in pool:
        prompt = render_image_prompt(modality_name, corpus.class_labels, sample, exemplars)
        out.append((sample, backend.make_request(prompt)))
    return out


def run_recognition_experiment(
    manifest: DatasetManifest,
    strategy,
    backend: Backend | BackendConfig,
    n_trials: int = DEFAULT_TRIALS,
    base_seed: int = 0,
    corpus: ImageCorpus | None = None,
) -> EvaluationReport:
    """Run ``n_trials`` recognition trials; trial ``i`` uses seed ``base_seed + i``.

    One-shot trials draw fresh exemplars per trial and score only the
    remaining pool. Requests within a trial run concurrently up to the
    backend's in-flight cap; results are gathered back in corpus order.
    A replay cache miss aborts with every missing digest of that trial.
    """
    if manifest.modality not in IMAGE_MODALITIES:
        raise WrongModality("radar tables are evaluated with classify.evaluate_holdout")
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    variant = _variant(strategy)
    if corpus is None:
        corpus = load_image_corpus(manifest)

    owned = isinstance(backend, BackendConfig)
    be = open_backend(backend) if owned else backend
    try:
        trials = []
        with ThreadPoolExecutor(max_workers=max(1, be.max_in_flight)) as pool:
            for i in range(n_trials):
                seed = base_seed + i
                pairs = trial_requests(corpus, manifest.modality_name, variant, seed, be)
                futures = [pool.submit(be.send, req) for _, req in pairs]
                missing: list[str] = []
                texts: list[str | None] = []
                for fut in futures:
                    try:
                        texts.append(fut.result().text)
                    except CacheMiss as exc:
                        missing.extend(exc.digests)
                        texts.append(None)
                if missing:
                    err = CacheMiss(missing)
                    err.trial_index = i
                    raise err
                preds = []
                for (sample, _), text in zip(pairs, texts):
                    parsed = parse_class_label(text, corpus.class_labels)
                    preds.append(Prediction(sample.sample_id, sample.class_label, parsed,
                                            parsed.label == sample.class_label))
                acc = compute_accuracy([(p.truth, p.parsed) for p in preds])
                trials.append(Trial(i, seed, tuple(preds), acc))
    finally:
        if owned:
            be.close()

    every = [p for t in trials for p in t.predictions]
    return EvaluationReport(
        dataset_id=manifest.dataset_id,
        task=manifest.task,
        strategy=variant,
        model_id=be.model_id,
        backend=be.kind,
        template_version=TEMPLATE_VERSION,
        base_seed=base_seed,
        trials=tuple(trials),
        mean_accuracy=sum(t.accuracy for t in trials) / len(trials),
        compliant_fraction=sum(1 for p in every if p.parsed.outcome == "exact") / len(every),
        confusion=build_confusion(corpus.class_labels, every),
    )


# -- serialization ----------------------------------------------------------------

def report_to_dict(report: EvaluationReport) -> dict:
    return {
        "schema": REPORT_SCHEMA,
        "dataset_id": report.dataset_id,
        "task": report.task,
        "strategy": report.strategy,
        "model_id": report.model_id,
        "backend": report.backend,
        "template_version": report.template_version,
        "base_seed": report.base_seed,
        "trials": [
            {
                "trial_index": t.trial_index,
                "seed": t.seed,
                "accuracy": t.accuracy,
                "predictions": [
                    {
                        "sample_id": p.sample_id,
                        "truth": p.truth,
                        "label": p.parsed.label,
                        "outcome": p.parsed.outcome,
                        "raw_text": p.parsed.raw_text,
                        "correct": p.correct,
                    }
                    for p in t.predictions
                ],
            }
            for t in report.trials
        ],
        "mean_accuracy": report.mean_accuracy,
        "compliant_fraction": report.compliant_fraction,
        "confusion": {
            "labels": list(report.confusion.labels),
            "matrix": [list(r) for r in report.confusion.matrix],
            "off_class": list(report.confusion.off_class),
        },
    }


def report_from_dict(d: dict) -> EvaluationReport:
    trials = tuple(
        Trial(
            t["trial_index"],
            t["seed"],
            tuple(
                Prediction(p["sample_id"], p["truth"],
                           ParsedLabel(p["outcome"], p["label"], p["raw_text"]), p["correct"])
                for p in t["predictions"]
            ),
            t["accuracy"],
        )
        for t in d["trials"]
    )
    c = d["confusion"]
    return EvaluationReport(
        dataset_id=d["dataset_id"],
        task=d["task"],
        strategy=d["strategy"],
        model_id=d["model_id"],
        backend=d["backend"],
        template_version=d["template_version"],
        base_seed=d["base_seed"],
        trials=trials,
        mean_accuracy=d["mean_accuracy"],
        compliant_fraction=d["compliant_fraction"],
        confusion=Confusion(tuple(c["labels"]), tuple(tuple(r) for r in c["matrix"]), tuple(c["off_class"])),
    )


def report_json(report: EvaluationReport) -> str:
    return json.dumps(report_to_dict(report), indent=2, ensure_ascii=False) + "\n"


def predictions_csv(report: EvaluationReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["trial_index", "seed", "sample_id", "truth", "label", "outcome", "correct"])
    for t in report.trials:
        for p in t.predictions:
            w.writerow([t.trial_index, t.seed, p.sample_id, p.truth, p.parsed.label or "",
                        p.parsed.outcome, int(p.correct)])
    return buf.getvalue()


def emit_report(report: EvaluationReport, destination, csv_destination=None) -> Path:
    """Write the report JSON (and optionally the per-sample CSV). Output depends only on ``report``."""
    dest = Path(destination)
    try:
        dest.parent.mkdir(parents=True, exist_ok=True)
        dest.write_text(report_json(report), encoding="utf-8")
        if csv_destination is not None:
            Path(csv_destination).write_text(predictions_csv(report), encoding="utf-8")
    except OSError as exc:
        raise WriteFailure(f"cannot write report to {dest}: {exc}") from exc
    return dest


def load_report(path) -> EvaluationReport:
    return report_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
