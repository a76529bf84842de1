"""Deterministic synthetic datasets and scripted model answers for offline runs."""

from __future__ import annotations

import csv
import hashlib
import io
import json
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np
from PIL import Image

from .ingest import DatasetManifest, ImageCorpus, ImageSample, RadarTable, load_image_corpus
from .llm import Backend, ReplayBackend, ReplayCache
from .evaluation import trial_requests


def separable_blobs(n_rows: int = 200, n_features: int = 8, seed: int = 0,
                    separation: float = 6.0, labels: Sequence[str] = ("A", "B")) -> RadarTable:
    """Gaussian clusters with unit variance whose centres sit ``separation`` apart on the diagonal."""
    rng = np.random.default_rng(seed)
    k = len(labels)
    per = [n_rows // k + (1 if i < n_rows % k else 0) for i in range(k)]
    feats, labs = [], []
    for i, (lab, n) in enumerate(zip(labels, per)):
        centre = np.full(n_features, i * separation / np.sqrt(n_features))
        feats.append(rng.normal(centre, 1.0, size=(n, n_features)))
        labs.extend([lab] * n)
    X = np.vstack(feats)
    order = rng.permutation(X.shape[0])
    return RadarTable(
        tuple(f"ch{j}" for j in range(n_features)),
        X[order],
        tuple(labs[j] for j in order),
        tuple(labels),
        "synthetic",
    )


def radar_csv_text(table: RadarTable, header: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header:
        w.writerow(list(table.feature_names) + ["label"])
    for row, lab in zip(table.features, table.labels):
        w.writerow([repr(float(v)) for v in row] + [lab])
    return buf.getvalue()


def png_bytes(rgb: tuple[int, int, int], marker: int = 0, size: int = 8) -> bytes:
    """A small solid PNG; ``marker`` is written into the first pixels so payloads differ."""
    im = Image.new("RGB", (size, size), rgb)
    px = im.load()
    for i in range(min(size, 4)):
        px[i, 0] = ((marker >> (8 * i)) & 255, i, 255 - i)
    buf = io.BytesIO()
    im.save(buf, format="PNG", optimize=False)
    return buf.getvalue()


_PALETTE = [(200, 150, 90), (120, 120, 130), (60, 90, 200), (40, 160, 60), (220, 60, 60), (240, 220, 80)]


def write_image_corpus(root, counts: Mapping[str, int]) -> Path:
    root = Path(root)
    marker = 0
    for ci, (label, n) in enumerate(counts.items()):
        d = root / label
        d.mkdir(parents=True, exist_ok=True)
        for j in range(n):
            marker += 1
            (d / f"{j:03d}.png").write_bytes(png_bytes(_PALETTE[ci % len(_PALETTE)], marker))
    return root


def write_manifest(path, **fields) -> Path:
    path = Path(path)
    path.write_text(json.dumps(fields, indent=2) + "\n", encoding="utf-8")
    return path


# -- scripted answers -------------------------------------------------------------

Responder = Callable[[ImageSample, str, Sequence[str]], str]


def _bucket(sample_id: str, variant: str, n: int) -> int:
    h = hashlib.sha256(f"{variant}:{sample_id}".encode()).digest()
    return int.from_bytes(h[:4], "big") % n


def scripted_responder(sample: ImageSample, variant: str, class_labels: Sequence[str]) -> str:
    """Answers with a fixed mix of styles; one-shot answers are right more often."""
    truth = sample.class_label
    other = class_labels[(list(class_labels).index(truth) + 1) % len(class_labels)]
    styles = [
        truth,
        truth.upper(),
        f"{truth}.",
        f"The picture shows {truth}.",
        other,
        "plastic",
    ]
    if variant == "one_shot":
        styles = styles[:4] * 2 + styles[4:]
    return styles[_bucket(sample.sample_id, variant, len(styles))]


def record_replay_cache(
    cache: ReplayCache,
    manifest: DatasetManifest,
    variant: str,
    n_trials: int,
    base_seed: int,
    responder: Responder = scripted_responder,
    backend: Backend | None = None,
    corpus: ImageCorpus | None = None,
    recorded_at: str = "2024-01-01T00:00:00Z",
) -> int:
    """Pre-record answers for every request an experiment will issue; returns entries added."""
    corpus = corpus or load_image_corpus(manifest)
    backend = backend or ReplayBackend(cache)
    before = len(cache)
    for i in range(n_trials):
        for sample, req in trial_requests(corpus, manifest.modality_name, variant, base_seed + i, backend):
            cache.record(req, responder(sample, variant, corpus.class_labels), recorded_at)
    return len(cache) - before
