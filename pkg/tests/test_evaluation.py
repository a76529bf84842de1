import csv
import io
import random
import time

import pytest
from hypothesis import given, settings, strategies as st

from multisurf import errors
from multisurf.evaluation import (
    Confusion,
    EvaluationReport,
    Prediction,
    build_confusion,
    compare_strategies,
    compute_accuracy,
    emit_report,
    load_report,
    predictions_csv,
    run_recognition_experiment,
)
from multisurf.ingest import load_image_corpus, load_manifest
from multisurf.llm import BackendConfig, ParsedLabel, ReplayBackend, ReplayCache
from multisurf.prompt import ShotStrategy, sample_exemplars


def parsed(label, outcome="exact"):
    return ParsedLabel(outcome, label, label or "?")


def report(acc, strategy="zero_shot", dataset="d", task="t"):
    return EvaluationReport(dataset, task, strategy, "m", "replay", "v1", 0, (), acc, 1.0,
                            Confusion(("a",), ((0,),), (0,)))


def test_accuracy_examples():
    assert compute_accuracy([("a", parsed("a"))] * 10) == 1.0
    eleven = [("a", parsed("a"))] * 10 + [("a", parsed("b"))]
    assert f"{compute_accuracy(eleven):.4f}" == "0.9091"
    with pytest.raises(errors.EmptyPredictionList):
        compute_accuracy([])


def test_off_class_is_wrong():
    assert compute_accuracy([("a", parsed(None, "off_class")), ("a", parsed("a", "salvaged"))]) == 0.5


def test_delta_points():
    d = compare_strategies(report(0.4), report(0.6333, "one_shot"))
    assert d.delta == 23.33
    assert d.describe().endswith("+23.33 points")
    assert compare_strategies(report(0.5), report(0.5, "one_shot")).delta == 0.0
    with pytest.raises(errors.DatasetMismatch):
        compare_strategies(report(0.4), report(0.6, "one_shot", dataset="other"))
    with pytest.raises(errors.DatasetMismatch):
        compare_strategies(report(0.4), report(0.6, "one_shot", task="Other"))


@pytest.mark.parametrize("zero,one,expected", [(0.5, 0.6111, 11.11), (0.3, 0.8167, 51.67), (0.9, 0.8, -10.0)])
def test_delta_rounding(zero, one, expected):
    assert compare_strategies(report(zero), report(one, "one_shot")).delta == expected


def replay(path):
    return ReplayBackend(ReplayCache.load(path))


def test_one_shot_run(image_dataset, replay_cache_path, no_network):
    m = load_manifest(image_dataset)
    r = run_recognition_experiment(m, "one_shot", replay(replay_cache_path), n_trials=3, base_seed=42)
    assert len(r.trials) == 3
    assert r.seeds == [42, 43, 44]
    assert all(len(t.predictions) == 27 for t in r.trials)
    corpus = load_image_corpus(m)
    for t in r.trials:
        ex, _ = sample_exemplars(corpus, t.seed)
        assert {s.sample_id for s in ex.exemplars.values()}.isdisjoint(p.sample_id for p in t.predictions)
    assert 0.0 <= r.mean_accuracy <= 1.0
    assert r.confusion.total == 81
    again = run_recognition_experiment(m, ShotStrategy.one_shot(42), replay(replay_cache_path), 3, 42)
    assert again == r


def test_zero_shot_every_image_once(image_dataset, replay_cache_path):
    m = load_manifest(image_dataset)
    r = run_recognition_experiment(m, "zero-shot", replay(replay_cache_path), n_trials=3, base_seed=42)
    ids = [p.sample_id for p in r.trials[0].predictions]
    assert len(ids) == 30 == len(set(ids))
    exact = sum(p.parsed.outcome == "exact" for t in r.trials for p in t.predictions)
    assert r.compliant_fraction == exact / 90


def test_scripted_one_shot_beats_zero_shot(image_dataset, replay_cache_path):
    m = load_manifest(image_dataset)
    zero = run_recognition_experiment(m, "zero_shot", replay(replay_cache_path), 3, 42)
    one = run_recognition_experiment(m, "one_shot", replay(replay_cache_path), 3, 42)
    assert compare_strategies(zero, one).delta > 0


def test_cache_miss_lists_digests(image_dataset, tmp_path):
    m = load_manifest(image_dataset)
    with pytest.raises(errors.CacheMiss) as ei:
        run_recognition_experiment(m, "zero_shot", ReplayBackend(ReplayCache()), n_trials=1)
    assert len(ei.value.digests) == 30
    assert ei.value.trial_index == 0


def test_live_without_credential_fails_first(image_dataset, no_credential, no_network):
    cfg = BackendConfig(mode="live", endpoint_url="https://models.example/v1")
    with pytest.raises(errors.MissingCredential):
        run_recognition_experiment(load_manifest(image_dataset), "zero_shot", cfg, n_trials=1)


def test_radar_manifest_rejected(radar_dataset, replay_cache_path):
    with pytest.raises(errors.WrongModality):
        run_recognition_experiment(load_manifest(radar_dataset), "zero_shot", replay(replay_cache_path))


class JitteryBackend(ReplayBackend):
    """Replay with random per-request delay, so completion order is shuffled."""

    def send(self, request):
        time.sleep(random.random() * 0.003)
        return super().send(request)


def test_result_independent_of_completion_order(image_dataset, replay_cache_path):
    m = load_manifest(image_dataset)
    cache = ReplayCache.load(replay_cache_path)
    a = run_recognition_experiment(m, "one_shot", ReplayBackend(cache, max_in_flight=1), 3, 42)
    b = run_recognition_experiment(m, "one_shot", JitteryBackend(cache, max_in_flight=8), 3, 42)
    assert a == b


def test_emit_byte_identical_and_round_trip(image_dataset, replay_cache_path, tmp_path):
    m = load_manifest(image_dataset)
    r = run_recognition_experiment(m, "one_shot", replay(replay_cache_path), 3, 42)
    emit_report(r, tmp_path / "a.json", tmp_path / "a.csv")
    emit_report(r, tmp_path / "b.json", tmp_path / "b.csv")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert load_report(tmp_path / "a.json") == r
    rows = list(csv.DictReader(io.StringIO((tmp_path / "a.csv").read_text())))
    assert len(rows) == sum(len(t.predictions) for t in r.trials)


def test_emit_failure(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(errors.WriteFailure):
        emit_report(report(0.5), blocker / "sub" / "r.json")


def test_predictions_csv_header():
    assert predictions_csv(report(0.5)).splitlines() == [
        "trial_index,seed,sample_id,truth,label,outcome,correct"
    ]


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.sampled_from("abc"), st.sampled_from(["a", "b", "c", None])), min_size=1, max_size=50))
def test_confusion_identities(rows):
    preds = [Prediction(f"s{i}", t, parsed(p, "exact" if p else "off_class"), p == t) for i, (t, p) in enumerate(rows)]
    c = build_confusion(["a", "b", "c"], preds)
    assert c.total == len(rows)
    for i, lab in enumerate("abc"):
        assert c.row_totals()[i] == sum(1 for t, _ in rows if t == lab)
    assert c.trace == sum(p.correct for p in preds)
    assert c.trace / c.total == compute_accuracy([(p.truth, p.parsed) for p in preds])
