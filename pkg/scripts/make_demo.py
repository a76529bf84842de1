"""Write a small offline demo: image corpus, radar CSV, manifests and a replay cache.

    python3 scripts/make_demo.py demo/

The cache holds scripted answers for zero-shot and one-shot runs with
``--trials 3 --seed 42``, so the CLI examples in the README work without
network access.
"""

from __future__ import annotations

import argparse
from pathlib import Path

from multisurf.ingest import load_manifest
from multisurf.llm import ReplayCache
from multisurf.synthetic import (
    radar_csv_text,
    record_replay_cache,
    separable_blobs,
    write_image_corpus,
    write_manifest,
)


def main():
    ap = argparse.ArgumentParser(description="Generate the offline demo workspace.")
    ap.add_argument("dest", type=Path)
    ap.add_argument("--trials", type=int, default=3)
    ap.add_argument("--seed", type=int, default=42)
    args = ap.parse_args()
    dest: Path = args.dest
    dest.mkdir(parents=True, exist_ok=True)

    write_image_corpus(dest / "micro", {"wood": 10, "metal": 10, "fabric": 10})
    micro = write_manifest(dest / "micro.json", dataset_id="micro-demo", modality="microscope_image",
                           task="Object", class_labels=["wood", "metal", "fabric"], data_path="micro")

    table = separable_blobs(200, 8, seed=3, labels=("glass", "steel"))
    (dest / "radar.csv").write_text(radar_csv_text(table), encoding="utf-8")
    write_manifest(dest / "radar.json", dataset_id="radar-demo", modality="radar_csv", task="Material",
                   class_labels=list(table.class_labels), data_path="radar.csv")

    cache_path = dest / "cache.jsonl"
    cache_path.unlink(missing_ok=True)
    cache = ReplayCache(path=cache_path)
    manifest = load_manifest(micro)
    n = 0
    for variant in ("zero_shot", "one_shot"):
        n += record_replay_cache(cache, manifest, variant, args.trials, args.seed)
    print(f"wrote demo to {dest} ({n} cached answers)")


if __name__ == "__main__":
    main()
