import socket

import pytest

from multisurf.ingest import load_manifest
from multisurf.llm import ReplayCache
from multisurf.synthetic import (
    radar_csv_text,
    record_replay_cache,
    separable_blobs,
    write_image_corpus,
    write_manifest,
)

_acceptance_results = []


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    if call.when == "setup" and call.excinfo is None:
        return
    if call.when not in ("setup", "call"):
        return
    ident, title = marker.args[:2]
    passed = call.when == "call" and call.excinfo is None
    _acceptance_results.append((ident, title, passed, call.duration))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.section("acceptance criteria")
    for ident, title, passed, dur in sorted(_acceptance_results, key=lambda r: int(r[0][2:])):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"{status} {ident} {title} ({dur:.2f}s)")


@pytest.fixture
def no_network(monkeypatch):
    """Fail loudly on any attempt to open a socket."""

    def refuse(*args, **kwargs):
        raise AssertionError("network access attempted")

    monkeypatch.setattr(socket.socket, "connect", refuse)
    monkeypatch.setattr(socket.socket, "connect_ex", refuse)
    monkeypatch.setattr(socket, "create_connection", refuse)
    monkeypatch.setattr(socket, "getaddrinfo", refuse)


@pytest.fixture
def no_credential(monkeypatch):
    monkeypatch.delenv("MULTISURF_API_KEY", raising=False)


@pytest.fixture
def image_dataset(tmp_path):
    """Microscope corpus of 30 images over three classes."""
    write_image_corpus(tmp_path / "images", {"wood": 10, "metal": 10, "fabric": 10})
    return write_manifest(
        tmp_path / "manifest.json",
        dataset_id="micro-demo",
        modality="microscope_image",
        task="Object",
        class_labels=["wood", "metal", "fabric"],
        data_path="images",
    )


@pytest.fixture
def replay_cache_path(tmp_path, image_dataset):
    """Cache pre-recorded for zero-shot and one-shot runs with seeds 42..44."""
    manifest = load_manifest(image_dataset)
    path = tmp_path / "cache.jsonl"
    cache = ReplayCache(path=path)
    record_replay_cache(cache, manifest, "zero_shot", 3, 42)
    record_replay_cache(cache, manifest, "one_shot", 3, 42)
    cache.save()
    return path


@pytest.fixture
def blobs():
    return separable_blobs(n_rows=200, n_features=8, seed=3)


@pytest.fixture
def radar_dataset(tmp_path, blobs):
    (tmp_path / "radar.csv").write_text(radar_csv_text(blobs), encoding="utf-8")
    return write_manifest(
        tmp_path / "radar.json",
        dataset_id="radar-demo",
        modality="radar_csv",
        task="Material",
        class_labels=list(blobs.class_labels),
        data_path="radar.csv",
    )
