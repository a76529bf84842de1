"""Acceptance criteria AC1-AC8; each prints a PASS/FAIL line in the terminal summary."""

import hashlib
import json
import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from multisurf.classify import TrainConfig, confusion_matrix, evaluate_holdout
from multisurf.cli import dispatch
from multisurf.context import (
    ACCURACY_CLASSES,
    HARDWARE,
    POSTURES,
    SCENARIO_HARDWARE,
    SCENARIO_POSTURES,
    MethodProfile,
    ScenarioQuery,
    ScoringWeights,
    bundled_profiles,
    rank_methods,
)
from multisurf.evaluation import compare_strategies, compute_accuracy, EvaluationReport, Confusion
from multisurf.ingest import ImageCorpus, ImageSample, RadarTable
from multisurf.llm import ModelRequest, ParsedLabel, cache_key, parse_class_label
from multisurf.prompt import Attachment, RenderedPrompt, render_csv_prompt, render_document_prompt, render_image_prompt, sample_exemplars
from multisurf.synthetic import separable_blobs


class Budget:
    def __init__(self, seconds):
        self.seconds = seconds

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start
        if exc[0] is None:
            assert self.elapsed < self.seconds, f"took {self.elapsed:.2f}s, budget {self.seconds}s"


# -- AC1 --------------------------------------------------------------------

@pytest.mark.acceptance("AC1", "golden prompts match the template wording (<1s)")
def test_ac1_golden_prompts():
    with Budget(1.0):
        csv_text = render_csv_prompt("radar", "RF", b"0.1,0.2,A\n").text
        assert csv_text == (
            "The provided CSV is radar data. In the CSV file, columns [0:-1] contain the radar features, "
            "and the last column [-1] contains the labels. Build a model (defaulting to using RF) and return "
            "the accuracy. Do not output other text.\n[Rules]: Do not output any other text."
        )
        q = ImageSample("wood/1", "wood", b"img", "png")
        img_text = render_image_prompt("microscope image", ["wood", "metal"], q).text
        assert img_text == (
            "The provided picture is microscope image. Identify the category of this picture from [wood, metal] "
            "and return only one category (only one category can be returned).\n"
            "[Rules]: Must return within [wood, metal]. Do not output any other text."
        )
        doc_text = render_document_prompt(b"%PDF").text
        assert doc_text == (
            "According to the given paper, what equipment did they use, what is the method, and what is the "
            "origin usage of the data?\n"
            "[Rules]: Summarize the method and origin usage each in one complete sentence."
        )
        assert "Build a model (defaulting to using RF) and return the accuracy" in csv_text
        assert "Identify the category of this picture from [wood, metal]" in img_text
        assert "what equipment did they use" in doc_text


# -- AC2 --------------------------------------------------------------------

def nearest_centroid(X_train, y_train, X_test):
    classes = sorted(set(y_train))
    cents = np.stack([X_train[np.array(y_train) == c].mean(axis=0) for c in classes])
    dist = ((X_test[:, None, :] - cents[None, :, :]) ** 2).sum(axis=2)
    return [classes[i] for i in dist.argmin(axis=1)]


@pytest.mark.acceptance("AC2", "RF and SVM reach >=0.95 and >= nearest-centroid - 0.05 (<10s)")
def test_ac2_classifier_oracle():
    table = separable_blobs(n_rows=200, n_features=8, seed=11)
    with Budget(10.0):
        for algorithm in ("random_forest", "linear_svm"):
            res = evaluate_holdout(table, TrainConfig(algorithm, seed=5))
            labels = np.array(table.labels)
            oracle_pred = nearest_centroid(table.features[res.train_indices], labels[res.train_indices],
                                           table.features[res.test_indices])
            oracle = float(np.mean(np.array(oracle_pred) == labels[res.test_indices]))
            assert res.accuracy >= 0.95, (algorithm, res.accuracy)
            assert res.accuracy >= oracle - 0.05, (algorithm, res.accuracy, oracle)


# -- AC3 --------------------------------------------------------------------

@pytest.mark.acceptance("AC3", "replay run-recognition and train-radar are reproducible (<30s)")
def test_ac3_determinism(tmp_path, image_dataset, replay_cache_path, radar_dataset, blobs, no_network):
    with Budget(30.0):
        for name in ("first", "second"):
            code = dispatch(["run-recognition", "--manifest", str(image_dataset), "--strategy", "one-shot",
                             "--backend", "replay", "--cache", str(replay_cache_path), "--trials", "3",
                             "--seed", "42", "--out", str(tmp_path / f"{name}.json")])
            assert code == 0
        assert (tmp_path / "first.json").read_bytes() == (tmp_path / "second.json").read_bytes()

        for algorithm in ("random_forest", "linear_svm"):
            config = TrainConfig(algorithm, seed=8)
            assert evaluate_holdout(blobs, config) == evaluate_holdout(blobs, config)
        for name in ("first", "second"):
            assert dispatch(["train-radar", "--manifest", str(radar_dataset), "--seed", "8",
                             "--out", str(tmp_path / f"{name}.holdout.json")]) == 0
        assert (tmp_path / "first.holdout.json").read_bytes() == (tmp_path / "second.holdout.json").read_bytes()


# -- AC4 --------------------------------------------------------------------

@pytest.mark.acceptance("AC4", "face-up consumer scenario ranks MicroCam first with exact verdicts (<1s)")
def test_ac4_figure2(tmp_path, capsys):
    profiles = tmp_path / "profiles.json"
    bundled_profiles().save(profiles)
    with Budget(1.0):
        code = dispatch(["recommend", "--scenario-posture", "face-up", "--hardware", "consumer",
                         "--profiles", str(profiles), "--out", str(tmp_path / "rec.json")])
        assert code == 0
        doc = json.loads((tmp_path / "rec.json").read_text())
        verdicts = {e["method_name"]: [(v["verdict"], v["aspect"]) for v in e["verdicts"]] for e in doc["ranked"]}
        assert doc["ranked"][0]["method_name"] == "MicroCam"
        assert verdicts == {
            "MicroCam": [("compatible", None)],
            "SpeCam": [("posture_conflict", "activity")],
            "Tangible Radar": [("hardware_unavailable", "identity")],
        }
        assert capsys.readouterr().out.startswith("1. MicroCam")


# -- AC5 --------------------------------------------------------------------

def _report(acc, strategy):
    return EvaluationReport("micro", "Object", strategy, "m", "replay", "v1", 0, (), acc, 1.0,
                            Confusion(("a",), ((0,),), (0,)))


@pytest.mark.acceptance("AC5", "accuracy to 4 decimals and deltas in points to 2 decimals (<1s)")
def test_ac5_accuracy_arithmetic():
    with Budget(1.0):
        preds = [("a", ParsedLabel("exact", "a", "a"))] * 10 + [("a", ParsedLabel("exact", "b", "b"))]
        assert f"{compute_accuracy(preds):.4f}" == "0.9091"
        assert round(compute_accuracy(preds), 4) == 0.9091
        cases = [((0.4000, 0.6333), 23.33), ((0.5, 0.6111), 11.11), ((0.3, 0.8167), 51.67), ((0.7, 0.7), 0.0)]
        for (zero, one), expected in cases:
            d = compare_strategies(_report(zero, "zero_shot"), _report(one, "one_shot"))
            assert d.delta == expected
            assert f"{d.delta:+.2f}" == f"{expected:+.2f}"


# -- AC6 --------------------------------------------------------------------

CLASSES = ["wood", "metal", "fabric", "paper"]
PARSE_FIXTURES = [
    # exact
    ("wood", "exact", "wood"),
    ("metal", "exact", "metal"),
    ("fabric", "exact", "fabric"),
    ("paper", "exact", "paper"),
    # cased
    ("Wood", "exact", "wood"),
    ("METAL", "exact", "metal"),
    ("FaBrIc", "exact", "fabric"),
    # punctuated
    ("wood.", "exact", "wood"),
    ("metal!", "exact", "metal"),
    ('"fabric"', "exact", "fabric"),
    ("  paper \n", "exact", "paper"),
    ("**wood**", "exact", "wood"),
    ("'Metal'.", "exact", "metal"),
    # sentence-wrapped
    ("It looks like wood.", "salvaged", "wood"),
    ("The answer is metal.", "salvaged", "metal"),
    ("This picture shows fabric texture.", "salvaged", "fabric"),
    ("Category: paper", "salvaged", "paper"),
    # off-class
    ("plastic", "off_class", None),
    ("glass", "off_class", None),
    ("", "off_class", None),
    ("I cannot determine the category.", "off_class", None),
    # ambiguous
    ("wood or metal", "off_class", None),
    ("Either fabric or paper.", "off_class", None),
    ("wood, metal, fabric, paper", "off_class", None),
]


@settings(max_examples=100, deadline=None)
@given(st.sampled_from(CLASSES) | st.text(max_size=30))
def _reparse_is_exact(text):
    p = parse_class_label(text, CLASSES)
    if p.label is not None:
        again = parse_class_label(p.label, CLASSES)
        assert (again.outcome, again.label) == ("exact", p.label)


@pytest.mark.acceptance("AC6", ">=20 parse fixtures map to contract outcomes; re-parse is exact (<1s)")
def test_ac6_parse_robustness():
    assert len(PARSE_FIXTURES) >= 20
    with Budget(1.0):
        for text, outcome, label in PARSE_FIXTURES:
            p = parse_class_label(text, CLASSES)
            assert (p.outcome, p.label) == (outcome, label), text
            assert p.compliant == (outcome == "exact")
        _reparse_is_exact()


# -- AC7 --------------------------------------------------------------------

@pytest.mark.acceptance("AC7", "1000 one-shot seeds: exemplars disjoint from pool, |classes|+1 attachments (<10s)")
def test_ac7_one_shot_bookkeeping():
    counts = {"wood": 4, "metal": 3, "fabric": 1, "paper": 6}
    samples = tuple(ImageSample(f"{c}/{i}", c, f"{c}{i}".encode(), "png") for c, n in counts.items() for i in range(n))
    corpus = ImageCorpus("syn", tuple(counts), samples)
    rng = np.random.default_rng(2024)
    seeds = rng.integers(0, 2**63, size=1000, dtype=np.uint64)
    with Budget(10.0):
        for seed in seeds:
            ex, pool = sample_exemplars(corpus, int(seed))
            chosen = {s.sample_id for s in ex.exemplars.values()}
            assert chosen.isdisjoint(s.sample_id for s in pool)
            assert len(chosen) + len(pool) == len(samples)
            for q in pool:
                prompt = render_image_prompt("microscope image", list(counts), q, ex)
                assert len(prompt.attachments) == len(counts) + 1
                assert prompt.attachments[-1].role == "query"


# -- AC8 --------------------------------------------------------------------

@settings(max_examples=100, deadline=None)
@given(st.integers(1, 5), st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4)), min_size=1, max_size=80))
def _confusion_identities(k, pairs):
    truth = np.array([a % k for a, _ in pairs])
    pred = np.array([b % k for _, b in pairs])
    cm = confusion_matrix(truth, pred, k)
    assert cm.sum() == len(pairs)
    assert np.array_equal(cm.sum(axis=1), np.bincount(truth, minlength=k))
    assert np.trace(cm) == int((truth == pred).sum())


_profiles = st.lists(
    st.builds(lambda i, p, h, a: MethodProfile(f"m{i}", "kit", p, h, a, "m.", "u."),
              st.integers(0, 99), st.sampled_from(POSTURES), st.sampled_from(HARDWARE), st.sampled_from(ACCURACY_CLASSES)),
    min_size=1, max_size=8, unique_by=lambda p: p.method_name,
)
_scenarios = st.builds(ScenarioQuery, st.just("activity"), st.sampled_from(SCENARIO_POSTURES), st.sampled_from(SCENARIO_HARDWARE))


@settings(max_examples=100, deadline=None)
@given(_scenarios, _profiles)
def _dominance(scenario, profiles):
    flags = [r.compatible for r in rank_methods(scenario, profiles).ranked]
    assert flags == sorted(flags, reverse=True)


@settings(max_examples=100, deadline=None)
@given(_scenarios, _profiles, st.floats(1e-3, 1e3))
def _argmax_invariance(scenario, profiles, c):
    w = ScoringWeights()
    a = [r.method_name for r in rank_methods(scenario, profiles, weights=w).ranked]
    b = [r.method_name for r in rank_methods(scenario, profiles, weights=w.scaled(c)).ranked]
    assert a == b


_requests = st.builds(
    lambda text, atts, t, m: ModelRequest("gpt-4o", RenderedPrompt(text, tuple(atts)), t, m),
    st.text(alphabet="abc xyz", max_size=20),
    st.lists(st.builds(Attachment, st.sampled_from(["query", "exemplar"]), st.none() | st.sampled_from(["a", "b"]),
                       st.binary(min_size=1, max_size=16)), max_size=3),
    st.sampled_from([0.0, 0.7]),
    st.sampled_from([64, 256]),
)


@settings(max_examples=100, deadline=None)
@given(_requests, _requests)
def _cache_key_determinism(a, b):
    assert cache_key(a) == cache_key(ModelRequest(a.model_id, RenderedPrompt(a.prompt.text, a.prompt.attachments),
                                                  a.temperature, a.max_output_tokens))
    same = (a.prompt.text, a.temperature, a.max_output_tokens,
            [(x.role, x.label_hint, hashlib.sha256(x.bytes).digest()) for x in a.prompt.attachments]) == \
           (b.prompt.text, b.temperature, b.max_output_tokens,
            [(x.role, x.label_hint, hashlib.sha256(x.bytes).digest()) for x in b.prompt.attachments])
    assert (cache_key(a) == cache_key(b)) == same


@pytest.mark.acceptance("AC8", "invariant suites hold over >=100 generated cases each (<60s)")
def test_ac8_invariants():
    with Budget(60.0):
        _confusion_identities()
        _dominance()
        _argmax_invariance()
        _cache_key_determinism()
