"""Prompt templates for the CSV, image and document tasks, plus exemplar sampling."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Mapping, Sequence

from .errors import (
    EmptyAttachment,
    EmptyClass,
    EmptyClassList,
    ExemplarClassMismatch,
    UnknownModelName,
)
from .ingest import ImageCorpus, ImageSample
from .rng import SeededDraws

TEMPLATE_VERSION = "v1"
MODEL_NAMES = ("SVM", "RF")
ATTACHMENT_ROLES = ("exemplar", "query", "csv", "document")

_PIC_RUN = "<PIC1>, <PIC2>...<PICn>"
_EXAMPLE_SENTENCE = " For example,"
_PLACEHOLDER = re.compile(r"<MOD>|<MODEL>|<CLASS>")
_RESIDUE = ("<MOD>", "<MODEL>", "<CLASS>", "<PIC")


@dataclass(frozen=True)
class PromptTemplate:
    kind: str  # "csv_file" | "image" | "document"
    task_explaining: str
    rules: str


@lru_cache(maxsize=None)
def load_template(kind: str, version: str = TEMPLATE_VERSION) -> PromptTemplate:
    res = resources.files("multisurf") / "templates" / version / f"{kind}.txt"
    lines = res.read_text(encoding="utf-8").splitlines()
    if len(lines) != 2:
        raise ValueError(f"template {version}/{kind} must hold exactly two lines")
    return PromptTemplate(kind, lines[0], lines[1])


@dataclass(frozen=True)
class ShotStrategy:
    variant: str  # "zero_shot" | "one_shot"
    seed: int | None = None

    def __post_init__(self):
        if self.variant == "zero_shot" and self.seed is not None:
            raise ValueError("zero-shot strategy carries no seed")
        if self.variant == "one_shot" and self.seed is None:
            raise ValueError("one-shot strategy requires a seed")
        if self.variant not in ("zero_shot", "one_shot"):
            raise ValueError(f"unknown strategy {self.variant!r}")

    @classmethod
    def zero_shot(cls) -> "ShotStrategy":
        return cls("zero_shot")

    @classmethod
    def one_shot(cls, seed: int) -> "ShotStrategy":
        return cls("one_shot", int(seed))


@dataclass(frozen=True)
class Attachment:
    role: str
    label_hint: str | None
    bytes: bytes = field(repr=False)

    def __post_init__(self):
        if self.role not in ATTACHMENT_ROLES:
            raise ValueError(f"unknown attachment role {self.role!r}")


@dataclass(frozen=True)
class RenderedPrompt:
    text: str
    attachments: tuple[Attachment, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "attachments", tuple(self.attachments))
        for token in _RESIDUE:
            if token in self.text:
                raise ValueError(f"rendered text still contains {token!r}")


@dataclass(frozen=True)
class ExemplarSet:
    exemplars: Mapping[str, ImageSample]
    seed: int
    depleted: tuple[str, ...] = ()  # classes left with no evaluation samples

    def __post_init__(self):
        for label, sample in self.exemplars.items():
            if sample.class_label != label:
                raise ExemplarClassMismatch(
                    f"exemplar {sample.sample_id} filed under {label!r} but labelled {sample.class_label!r}"
                )

    @property
    def warning(self) -> bool:
        return bool(self.depleted)


def _substitute(text: str, values: dict[str, str]) -> str:
    # single pass so substituted values are never themselves rescanned
    return _PLACEHOLDER.sub(lambda m: values[m.group(0)], text)


def format_class_list(class_labels: Sequence[str]) -> str:
    return "[" + ", ".join(class_labels) + "]"


def render_csv_prompt(modality_name: str, model_name: str, csv_bytes: bytes) -> RenderedPrompt:
    if model_name not in MODEL_NAMES:
        raise UnknownModelName(model_name)
    if not csv_bytes:
        raise EmptyAttachment("CSV attachment is empty")
    tpl = load_template("csv_file")
    values = {"<MOD>": modality_name, "<MODEL>": model_name}
    text = _substitute(tpl.task_explaining, values) + "\n" + tpl.rules
    return RenderedPrompt(text, (Attachment("csv", None, bytes(csv_bytes)),))


def render_image_prompt(
    modality_name: str,
    class_labels: Sequence[str],
    query: ImageSample,
    exemplars: ExemplarSet | None = None,
) -> RenderedPrompt:
    """Render the image-classification prompt.

    Zero-shot (``exemplars is None``) drops the sentence that introduces the
    sample images. One-shot names each example as ``Example of <label>`` and
    attaches one exemplar per class, in class order, before the query.
    """
    labels = list(class_labels)
    if not labels:
        raise EmptyClassList("class list is empty")
    tpl = load_template("image")
    task = tpl.task_explaining

    attachments: list[Attachment] = []
    if exemplars is None:
        task = task.split(_EXAMPLE_SENTENCE, 1)[0]
    else:
        if set(exemplars.exemplars) != set(labels) or len(exemplars.exemplars) != len(labels):
            raise ExemplarClassMismatch(
                f"exemplar classes {sorted(exemplars.exemplars)} do not match {sorted(labels)}"
            )
        task = task.replace(_PIC_RUN, ", ".join(f"Example of {c}" for c in labels))
        for c in labels:
            attachments.append(Attachment("exemplar", c, exemplars.exemplars[c].bytes))
    attachments.append(Attachment("query", None, query.bytes))

    values = {"<MOD>": modality_name, "<CLASS>": format_class_list(labels)}
    text = _substitute(task, values) + "\n" + _substitute(tpl.rules, values)
    return RenderedPrompt(text, tuple(attachments))


def render_document_prompt(document_bytes: bytes) -> RenderedPrompt:
    if not document_bytes:
        raise EmptyAttachment("document attachment is empty")
    tpl = load_template("document")
    text = tpl.task_explaining + "\n" + tpl.rules
    return RenderedPrompt(text, (Attachment("document", None, bytes(document_bytes)),))


def sample_exemplars(corpus: ImageCorpus, seed: int) -> tuple[ExemplarSet, list[ImageSample]]:
    """Pick one exemplar per class uniformly at random and return the remaining pool.

    Classes are visited in manifest order and each draw consumes the seeded
    stream in that order, so a seed fully determines the exemplar set.
    """
    draws = SeededDraws(seed)
    groups = corpus.by_class()
    chosen: dict[str, ImageSample] = {}
    depleted = []
    for label in corpus.class_labels:
        members = groups[label]
        if not members:
            raise EmptyClass(label)
        chosen[label] = members[draws.index(len(members))]
        if len(members) == 1:
            depleted.append(label)
    taken = {s.sample_id for s in chosen.values()}
    pool = [s for s in corpus.samples if s.sample_id not in taken]
    return ExemplarSet(chosen, int(seed), tuple(depleted)), pool
