"""``multisurf`` command line: validate, run-recognition, train-radar, compare, extract-profile, recommend, cache."""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

import click

from . import classify
from .context import (
    ProfileStore,
    ScenarioQuery,
    bundled_profiles,
    compose_rationale,
    extract_method_profile,
    rank_methods,
)
from .errors import ConfigError, MultiSurfError
from .evaluation import compare_strategies, emit_report, load_report, run_recognition_experiment
from .ingest import load_manifest, load_radar_table, validate_dataset
from .llm import DEFAULT_MODEL_ID, BackendConfig, ReplayCache

POSTURE_FLAGS = {"face-up": "face_up", "face-down": "face_down", "unknown": "unknown"}
HARDWARE_FLAGS = {"consumer": "consumer_smartphone", "specialized": "specialized_kit", "unknown": "unknown"}
ALGORITHM_FLAGS = {"rf": "random_forest", "svm": "linear_svm"}


@dataclass(frozen=True)
class AppConfig:
    endpoint_url: str | None = None
    model_id: str = DEFAULT_MODEL_ID
    backend_mode: str = "replay"
    cache_path: str | None = None
    seed: int = 0
    trials: int = 5
    max_in_flight: int = 4
    requests_per_second: float | None = None
    timeout: float = 60.0

    @classmethod
    def load(cls, path) -> "AppConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        if "api_key" in data:
            raise ConfigError("credentials are read from MULTISURF_API_KEY only")
        return cls(**data)

    def override(self, **flags) -> "AppConfig":
        return replace(self, **{k: v for k, v in flags.items() if v is not None})

    def backend_config(self) -> BackendConfig:
        if self.backend_mode == "replay" and not self.cache_path:
            raise ConfigError("replay mode needs --cache")
        if self.backend_mode in ("live", "record") and not self.endpoint_url:
            raise ConfigError(f"{self.backend_mode} mode needs --endpoint")
        return BackendConfig(
            mode=self.backend_mode,
            model_id=self.model_id,
            endpoint_url=self.endpoint_url,
            cache_path=Path(self.cache_path) if self.cache_path else None,
            max_in_flight=self.max_in_flight,
            requests_per_second=self.requests_per_second,
            timeout=self.timeout,
        )


def _app_config(config_path, **flags) -> AppConfig:
    base = AppConfig.load(config_path) if config_path else AppConfig()
    return base.override(**flags)


def backend_options(fn):
    """Shared flags for subcommands that talk to a model."""
    opts = [
        click.option("--config", "config_path", type=click.Path(dir_okay=False), help="JSON config file."),
        click.option("--backend", "backend_mode", type=click.Choice(["replay", "live", "record"]),
                     help="Model backend (default: replay)."),
        click.option("--cache", "cache_path", type=click.Path(dir_okay=False), help="Replay cache (JSON lines)."),
        click.option("--endpoint", "endpoint_url", help="Chat-completion endpoint URL for live/record modes."),
        click.option("--model-id", help="Model identifier sent to the endpoint."),
        click.option("--concurrency", "max_in_flight", type=click.IntRange(min=1), help="In-flight request cap."),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
def cli():
    """Recognition and context reasoning for multimodal surface sensing."""


@cli.command()
@click.option("--manifest", required=True, type=click.Path(dir_okay=False))
def validate(manifest):
    """Check a dataset against its manifest."""
    m = load_manifest(manifest)
    report = validate_dataset(m)
    click.echo(f"{m.dataset_id}: {len(report.issues)} issues "
               f"({len(report.errors)} errors, {len(report.warnings)} warnings)")
    for issue in report.issues:
        click.echo(f"  [{issue.severity}] {issue.message}")
    if not report.loadable:
        sys.exit(1)


@cli.command("run-recognition")
@click.option("--manifest", required=True, type=click.Path(dir_okay=False))
@click.option("--strategy", required=True, type=click.Choice(["zero-shot", "one-shot"]))
@click.option("--trials", type=click.IntRange(min=1), help="Number of repeated trials (default 5).")
@click.option("--seed", type=click.IntRange(min=0), help="Base seed; trial i uses seed + i.")
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Report JSON destination.")
@click.option("--csv", "csv_out", type=click.Path(dir_okay=False), help="Optional per-sample CSV.")
@backend_options
def run_recognition(manifest, strategy, trials, seed, out, csv_out, config_path, **flags):
    """Score image recognition under a zero-shot or one-shot strategy."""
    cfg = _app_config(config_path, trials=trials, seed=seed, **flags)
    m = load_manifest(manifest)
    report = run_recognition_experiment(m, strategy, cfg.backend_config(), cfg.trials, cfg.seed)
    emit_report(report, out, csv_out)
    click.echo(f"{report.dataset_id}/{report.task} {report.strategy}: "
               f"mean accuracy {report.mean_accuracy:.4f} over {len(report.trials)} trials, "
               f"compliant {report.compliant_fraction:.4f}")
    click.echo(f"report written to {out}")


@cli.command("train-radar")
@click.option("--manifest", required=True, type=click.Path(dir_okay=False))
@click.option("--algorithm", type=click.Choice(sorted(ALGORITHM_FLAGS)), default="rf", show_default=True)
@click.option("--seed", type=click.IntRange(min=0), default=0, show_default=True)
@click.option("--split", type=click.FloatRange(0, 1, min_open=True, max_open=True), default=0.8,
              show_default=True, help="Train share of each class.")
@click.option("--out", type=click.Path(dir_okay=False), help="Holdout result JSON destination.")
@click.option("--model-out", type=click.Path(dir_okay=False), help="Trained model JSON destination.")
def train_radar(manifest, algorithm, seed, split, out, model_out):
    """Train RF or linear SVM on a radar CSV and report holdout accuracy."""
    m = load_manifest(manifest)
    table = load_radar_table(m)
    config = classify.TrainConfig(ALGORITHM_FLAGS[algorithm], seed=seed, split_fraction=split)
    result = classify.evaluate_holdout(table, config)
    click.echo(f"{m.dataset_id}/{m.task} {config.algorithm}: accuracy {result.accuracy:.4f} "
               f"on {len(result.test_indices)} held-out rows")
    if out:
        doc = {"dataset_id": m.dataset_id, "task": m.task, **result.to_dict()}
        Path(out).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    if model_out:
        Path(model_out).write_text(json.dumps(result.model.to_dict(), indent=2) + "\n", encoding="utf-8")


@cli.command()
@click.option("--zero", "zero_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--one", "one_path", required=True, type=click.Path(exists=True, dir_okay=False))
def compare(zero_path, one_path):
    """Accuracy change from zero-shot to one-shot, in percentage points."""
    delta = compare_strategies(load_report(zero_path), load_report(one_path))
    click.echo(delta.describe())


@cli.command("extract-profile")
@click.option("--document", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--method-name", required=True)
@click.option("--accuracy-class", type=click.Choice(["high", "moderate", "unknown"]), default="unknown")
@click.option("--profiles", type=click.Path(dir_okay=False), help="Profile store to add the result to.")
@backend_options
def extract_profile(document, method_name, accuracy_class, profiles, config_path, **flags):
    """Summarize a method's description paper into a profile."""
    cfg = _app_config(config_path, **flags)
    profile = extract_method_profile(Path(document).read_bytes(), cfg.backend_config(),
                                     method_name, accuracy_class)
    click.echo(json.dumps(profile.to_dict(), indent=2, ensure_ascii=False))
    if profiles:
        path = Path(profiles)
        store = ProfileStore.load(path) if path.exists() else ProfileStore()
        store.add(profile, replace=True)
        store.save(path)


@cli.command()
@click.option("--scenario-posture", type=click.Choice(sorted(POSTURE_FLAGS)), default="unknown", show_default=True)
@click.option("--hardware", type=click.Choice(sorted(HARDWARE_FLAGS)), default="unknown", show_default=True)
@click.option("--activity", default="", help="Free-text activity (echoed, not interpreted).")
@click.option("--location")
@click.option("--time", "time_")
@click.option("--profiles", type=click.Path(exists=True, dir_okay=False),
              help="Profile store JSON (default: bundled profiles).")
@click.option("--out", type=click.Path(dir_okay=False), help="Recommendation JSON destination.")
@click.option("--rewrite/--no-rewrite", default=False, help="Let the model rewrite the rationale.")
@backend_options
def recommend(scenario_posture, hardware, activity, location, time_, profiles, out, rewrite, config_path, **flags):
    """Rank sensing methods for a usage scenario."""
    scenario = ScenarioQuery(activity, POSTURE_FLAGS[scenario_posture], HARDWARE_FLAGS[hardware],
                             location, time_)
    store = ProfileStore.load(profiles) if profiles else bundled_profiles()
    rec = rank_methods(scenario, list(store))
    rationale = rec.rationale
    if rewrite:
        cfg = _app_config(config_path, **flags)
        rationale = compose_rationale(rec, cfg.backend_config())
    for pos, entry in enumerate(rec.ranked, start=1):
        verdicts = ", ".join(v.verdict for v in entry.verdicts)
        click.echo(f"{pos}. {entry.method_name}\t{entry.score:.2f}\t{verdicts}")
    click.echo("")
    click.echo(rationale)
    if out:
        doc = {
            "scenario": {"activity": activity, "posture": scenario.posture,
                         "available_hardware": scenario.available_hardware,
                         "location": location, "time": time_, "aspects": list(scenario.aspects)},
            "ranked": [
                {"method_name": e.method_name, "score": e.score,
                 "verdicts": [{"verdict": v.verdict, "aspect": v.aspect, "explanation": v.explanation}
                              for v in e.verdicts]}
                for e in rec.ranked
            ],
            "rationale": rationale,
        }
        Path(out).write_text(json.dumps(doc, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


@cli.group()
def cache():
    """Inspect and maintain a replay cache."""


@cache.command("ls")
@click.option("--cache", "cache_path", required=True, type=click.Path(dir_okay=False))
def cache_ls(cache_path):
    c = ReplayCache.load(cache_path, missing_ok=True)
    for e in c:
        click.echo(f"{e.digest}\t{e.model_id}\t{e.recorded_at}")


@cache.command("verify")
@click.option("--cache", "cache_path", required=True, type=click.Path(exists=True, dir_okay=False))
def cache_verify(cache_path):
    c = ReplayCache.load(cache_path)
    bad = c.verify()
    unchecked = sum(1 for e in c if e.canonical is None)
    click.echo(f"{len(c)} entries, {len(bad)} mismatches, {unchecked} without stored canonical form")
    for d in bad:
        click.echo(f"  mismatch {d}")
    if bad:
        sys.exit(1)


@cache.command("prune")
@click.option("--cache", "cache_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--model-id", required=True)
def cache_prune(cache_path, model_id):
    c = ReplayCache.load(cache_path)
    removed = c.prune(model_id)
    click.echo(f"removed {removed} entries for {model_id}; {len(c)} remain")


def dispatch(argv=None) -> int:
    """Run the CLI and return its exit code: 0 ok, 1 operational error, 2 usage error."""
    try:
        cli.main(args=argv, prog_name="multisurf", standalone_mode=False)
    except click.UsageError as exc:
        exc.show()
        return 2
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except (MultiSurfError, ValueError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except SystemExit as exc:
        return int(exc.code or 0)
    return 0


def main():
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
