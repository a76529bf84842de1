"""Dataset manifests, radar CSV tables and labelled image corpora."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import (
    DuplicateClassLabel,
    DuplicateSampleId,
    EmptyClass,
    EmptyTable,
    FileUnreadable,
    MissingClassDirectory,
    MultiSurfError,
    NonNumericFeature,
    RaggedRow,
    SchemaViolation,
    UndecodableImage,
    UnknownLabel,
    WrongModality,
)

MODALITIES = ("radar_csv", "microscope_image", "multispectral_image")
IMAGE_MODALITIES = ("microscope_image", "multispectral_image")
IMAGE_SUFFIXES = (".png", ".jpeg", ".jpg")

# human-readable modality names substituted for <MOD> in prompts
MODALITY_NAMES = {
    "radar_csv": "radar",
    "microscope_image": "microscope image",
    "multispectral_image": "multispectral image",
}

_REQUIRED_FIELDS = ("dataset_id", "modality", "task", "class_labels", "data_path")
_OPTIONAL_FIELDS = ("document_path",)


def _normalize_label(label: str) -> str:
    return label.strip().casefold()


@dataclass(frozen=True)
class DatasetManifest:
    dataset_id: str
    modality: str
    task: str
    class_labels: tuple[str, ...]
    data_path: Path
    document_path: Path | None = None

    def __post_init__(self):
        object.__setattr__(self, "class_labels", tuple(self.class_labels))
        object.__setattr__(self, "data_path", Path(self.data_path))
        if self.document_path is not None:
            object.__setattr__(self, "document_path", Path(self.document_path))
        if self.modality not in MODALITIES:
            raise SchemaViolation("modality", f"must be one of {', '.join(MODALITIES)}")
        if not self.class_labels:
            raise SchemaViolation("class_labels", "must be a non-empty list")
        seen: dict[str, str] = {}
        for label in self.class_labels:
            key = _normalize_label(label)
            if key in seen:
                raise DuplicateClassLabel(label, seen[key])
            seen[key] = label

    @property
    def modality_name(self) -> str:
        return MODALITY_NAMES[self.modality]


@dataclass(frozen=True)
class Issue:
    severity: str  # "error" | "warning"
    message: str
    row: int | None = None
    path: str | None = None


@dataclass(frozen=True)
class ValidationReport:
    dataset_id: str
    issues: tuple[Issue, ...] = ()

    @property
    def errors(self) -> list[Issue]:
        return [i for i in self.issues if i.severity == "error"]

    @property
    def warnings(self) -> list[Issue]:
        return [i for i in self.issues if i.severity == "warning"]

    @property
    def loadable(self) -> bool:
        return not self.errors


@dataclass(frozen=True, eq=False)
class RadarTable:
    """Radar feature rows; ``features`` is a read-only ``(n, d)`` float64 array."""

    feature_names: tuple[str, ...]
    features: np.ndarray
    labels: tuple[str, ...]
    class_labels: tuple[str, ...]
    source: str

    def __post_init__(self):
        feats = np.array(self.features, dtype=np.float64, copy=True)
        if feats.ndim != 2:
            raise ValueError("features must be two-dimensional")
        if feats.shape[0] != len(self.labels):
            raise ValueError("one label per row required")
        if feats.shape[1] < 1 and feats.shape[0] > 0:
            raise ValueError("at least one feature column required")
        unknown = set(self.labels) - set(self.class_labels)
        if unknown:
            raise ValueError(f"labels outside class_labels: {sorted(unknown)}")
        feats.setflags(write=False)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "class_labels", tuple(self.class_labels))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    def __len__(self) -> int:
        return len(self.labels)

    def __eq__(self, other):
        if not isinstance(other, RadarTable):
            return NotImplemented
        return (
            self.feature_names == other.feature_names
            and self.labels == other.labels
            and self.class_labels == other.class_labels
            and self.source == other.source
            and np.array_equal(self.features, other.features)
        )

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def rows(self) -> list[tuple[np.ndarray, str]]:
        return list(zip(self.features, self.labels))

    @property
    def label_codes(self) -> np.ndarray:
        """Labels encoded as indices into ``class_labels``."""
        index = {c: i for i, c in enumerate(self.class_labels)}
        return np.array([index[lab] for lab in self.labels], dtype=np.int64)

    def subset(self, indices) -> "RadarTable":
        idx = np.asarray(indices, dtype=np.int64)
        return RadarTable(
            feature_names=self.feature_names,
            features=self.features[idx],
            labels=tuple(self.labels[i] for i in idx),
            class_labels=self.class_labels,
            source=self.source,
        )


@dataclass(frozen=True)
class ImageSample:
    sample_id: str
    class_label: str
    bytes: bytes = field(repr=False)
    media_kind: str  # "png" | "jpeg"

    def __post_init__(self):
        if not self.bytes:
            raise ValueError(f"sample {self.sample_id}: empty payload")


@dataclass(frozen=True)
class ImageCorpus:
    manifest_ref: str
    class_labels: tuple[str, ...]
    samples: tuple[ImageSample, ...]
    warnings: tuple[Issue, ...] = ()

    def __post_init__(self):
        ids = set()
        for s in self.samples:
            if s.sample_id in ids:
                raise DuplicateSampleId(s.sample_id)
            if s.class_label not in self.class_labels:
                raise ValueError(f"sample {s.sample_id}: unknown class {s.class_label!r}")
            ids.add(s.sample_id)

    def __len__(self) -> int:
        return len(self.samples)

    def by_class(self) -> dict[str, list[ImageSample]]:
        groups: dict[str, list[ImageSample]] = {c: [] for c in self.class_labels}
        for s in self.samples:
            groups[s.class_label].append(s)
        return groups


# -- manifests ----------------------------------------------------------------

def _parse_manifest(obj, base_dir: Path) -> DatasetManifest:
    if not isinstance(obj, dict):
        raise SchemaViolation("<root>", "manifest must be a JSON object")
    for key in obj:
        if key not in _REQUIRED_FIELDS + _OPTIONAL_FIELDS:
            raise SchemaViolation(key, "unknown field")
    for key in _REQUIRED_FIELDS:
        if key not in obj:
            raise SchemaViolation(key, "missing required field")
    for key in ("dataset_id", "modality", "task", "data_path"):
        if not isinstance(obj[key], str) or not obj[key].strip():
            raise SchemaViolation(key, "must be a non-empty string")
    if obj["modality"] not in MODALITIES:
        raise SchemaViolation("modality", f"must be one of {', '.join(MODALITIES)}")
    labels = obj["class_labels"]
    if not isinstance(labels, list) or not labels:
        raise SchemaViolation("class_labels", "must be a non-empty list")
    if not all(isinstance(c, str) and c.strip() for c in labels):
        raise SchemaViolation("class_labels", "entries must be non-empty strings")
    doc = obj.get("document_path")
    if doc is not None and (not isinstance(doc, str) or not doc.strip()):
        raise SchemaViolation("document_path", "must be a non-empty string or null")

    return DatasetManifest(
        dataset_id=obj["dataset_id"],
        modality=obj["modality"],
        task=obj["task"],
        class_labels=tuple(c.strip() for c in labels),
        data_path=base_dir / obj["data_path"],
        document_path=(base_dir / doc) if doc else None,
    )


def load_manifest(path) -> DatasetManifest:
    """Read a manifest JSON file.

    Relative ``data_path``/``document_path`` values are resolved against the
    directory that holds the manifest.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise FileUnreadable(path, str(exc)) from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaViolation("<root>", f"invalid JSON: {exc}") from exc
    return _parse_manifest(obj, path.resolve().parent)


def manifest_to_dict(manifest: DatasetManifest) -> dict:
    out = {
        "dataset_id": manifest.dataset_id,
        "modality": manifest.modality,
        "task": manifest.task,
        "class_labels": list(manifest.class_labels),
        "data_path": str(manifest.data_path),
    }
    if manifest.document_path is not None:
        out["document_path"] = str(manifest.document_path)
    return out


# -- radar CSV --------------------------------------------------------------------

def _parse_real(cell: str) -> float | None:
    try:
        value = float(cell.strip())
    except ValueError:
        return None
    return value if math.isfinite(value) else None


def _looks_like_header(row: list[str], class_labels) -> bool:
    if len(row) < 2:
        return False
    if row[-1].strip() in class_labels:
        return False
    return all(_parse_real(c) is None for c in row[:-1])


def load_radar_table(manifest: DatasetManifest, issues: list[Issue] | None = None) -> RadarTable:
    """Parse the manifest's CSV: every column but the last is a feature, the last is the label.

    When ``issues`` is given the loader runs in checking mode: bad rows are
    recorded as error entries and skipped instead of raising.
    """
    if manifest.modality != "radar_csv":
        raise WrongModality(f"{manifest.dataset_id}: expected radar_csv, got {manifest.modality}")
    try:
        raw = Path(manifest.data_path).read_bytes()
        text = raw.decode("utf-8-sig")
    except (OSError, UnicodeDecodeError) as exc:
        raise FileUnreadable(manifest.data_path, str(exc)) from exc
    return parse_radar_csv(text, manifest.class_labels, manifest.dataset_id, issues)


def parse_radar_csv(text: str, class_labels, source: str = "", issues: list[Issue] | None = None) -> RadarTable:
    class_labels = tuple(class_labels)
    allowed = set(class_labels)
    rows = [r for r in csv.reader(io.StringIO(text)) if any(c.strip() for c in r)]

    header = None
    if rows and _looks_like_header(rows[0], allowed):
        header, rows = rows[0], rows[1:]

    arity = len(header) if header else (len(rows[0]) if rows else 0)
    features: list[list[float]] = []
    labels: list[str] = []

    def fail(err: MultiSurfError):
        if issues is None:
            raise err
        issues.append(Issue("error", str(err), row=getattr(err, "row", None)))

    for rownum, row in enumerate(rows, start=1):
        if len(row) != arity or arity < 2:
            fail(RaggedRow(rownum, max(arity, 2), len(row)))
            continue
        values = []
        bad = None
        for col, cell in enumerate(row[:-1], start=1):
            v = _parse_real(cell)
            if v is None:
                bad = NonNumericFeature(rownum, col, cell)
                break
            values.append(v)
        if bad is not None:
            fail(bad)
            continue
        label = row[-1].strip()
        if label not in allowed:
            fail(UnknownLabel(rownum, label))
            continue
        features.append(values)
        labels.append(label)

    if not labels:
        if issues is not None:
            issues.append(Issue("error", str(EmptyTable("radar CSV"))))
            d = max(arity - 1, 1)
            return RadarTable(_feature_names(header, d), np.empty((0, d)), (), class_labels, source)
        raise EmptyTable("radar CSV")

    names = _feature_names(header, arity - 1)
    return RadarTable(names, np.array(features, dtype=np.float64), tuple(labels), class_labels, source)


def _feature_names(header, d: int) -> tuple[str, ...]:
    if header:
        return tuple(h.strip() for h in header[:-1])
    return tuple(f"f{i}" for i in range(d))


# -- image corpora ------------------------------------------------------------------

def _decode_kind(payload: bytes) -> str | None:
    try:
        with Image.open(io.BytesIO(payload)) as im:
            fmt = im.format
            im.verify()
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError):
        return None
    return {"PNG": "png", "JPEG": "jpeg"}.get(fmt or "")


def _class_files(directory: Path) -> Iterator[Path]:
    for p in sorted(directory.iterdir()):
        if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES:
            yield p


def load_image_corpus(manifest: DatasetManifest, issues: list[Issue] | None = None) -> ImageCorpus:
    """Load ``<data_path>/<class_label>/<file>.{png,jpg,jpeg}`` into memory.

    Undecodable files are skipped and reported as warnings. In checking mode
    (``issues`` given) missing or empty classes become error entries.
    """
    if manifest.modality not in IMAGE_MODALITIES:
        raise WrongModality(f"{manifest.dataset_id}: expected an image modality, got {manifest.modality}")
    root = Path(manifest.data_path)
    if not root.is_dir():
        raise FileUnreadable(root, "image corpus root is not a directory")

    warnings: list[Issue] = []
    samples: list[ImageSample] = []
    seen: set[str] = set()

    def fail(err: MultiSurfError):
        if issues is None:
            raise err
        issues.append(Issue("error", str(err)))

    for label in manifest.class_labels:
        class_dir = root / label
        if not class_dir.is_dir():
            fail(MissingClassDirectory(label))
            continue
        count = 0
        for path in _class_files(class_dir):
            try:
                payload = path.read_bytes()
            except OSError as exc:
                warnings.append(Issue("warning", str(FileUnreadable(path, str(exc))), path=str(path)))
                continue
            kind = _decode_kind(payload) if payload else None
            if kind is None:
                warnings.append(Issue("warning", str(UndecodableImage(path)), path=str(path)))
                continue
            sample_id = f"{label}/{path.stem}"
            if sample_id in seen:
                fail(DuplicateSampleId(sample_id))
                continue
            seen.add(sample_id)
            samples.append(ImageSample(sample_id, label, payload, kind))
            count += 1
        if count == 0:
            fail(EmptyClass(label))

    if issues is not None:
        issues.extend(warnings)
    return ImageCorpus(manifest.dataset_id, manifest.class_labels, tuple(samples), tuple(warnings))


def validate_dataset(manifest: DatasetManifest) -> ValidationReport:
    """Run the modality's loader in checking mode and gather every issue."""
    issues: list[Issue] = []
    try:
        if manifest.modality == "radar_csv":
            load_radar_table(manifest, issues)
        else:
            load_image_corpus(manifest, issues)
    except MultiSurfError as exc:
        issues.append(Issue("error", str(exc)))
    if manifest.document_path is not None and not Path(manifest.document_path).is_file():
        issues.append(Issue("warning", f"document {manifest.document_path} not found"))
    return ValidationReport(manifest.dataset_id, tuple(issues))
