"""Reasoning over sensing methods: profiles, scenario constraints and ranked recommendations."""

from __future__ import annotations

import json
import threading
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import DuplicateMethod, EmptyProfileStore, MultiSurfError, SchemaViolation
from .llm import Backend, BackendConfig, open_backend, parse_profile_text
from .prompt import RenderedPrompt, render_document_prompt

ASPECTS = ("location", "activity", "time", "identity")
POSTURES = ("face_up", "face_down", "none")
SCENARIO_POSTURES = ("face_up", "face_down", "unknown")
HARDWARE = ("consumer_smartphone", "specialized")
SCENARIO_HARDWARE = ("consumer_smartphone", "specialized_kit", "unknown")
ACCURACY_CLASSES = ("moderate", "high", "unknown")
VERDICTS = ("compatible", "posture_conflict", "hardware_unavailable")

ACCURACY_VALUE = {"high": 1.0, "moderate": 0.6, "unknown": 0.3}
# words that must survive any rewrite of the rationale
VERDICT_KEYWORD = {"compatible": "compatible", "posture_conflict": "posture", "hardware_unavailable": "hardware"}
NO_COMPATIBLE = "No compatible sensing method fits this scenario."


def _posture_words(p: str) -> str:
    return p.replace("_", "-")


@dataclass(frozen=True)
class MethodProfile:
    method_name: str
    equipment: str
    posture_requirement: str
    hardware: str
    accuracy_class: str
    method_sentence: str
    usage_sentence: str
    source: str = "fixture"  # "fixture" | "extracted"
    raw_text: str | None = None

    def __post_init__(self):
        for name, allowed in (("posture_requirement", POSTURES), ("hardware", HARDWARE),
                              ("accuracy_class", ACCURACY_CLASSES), ("source", ("fixture", "extracted"))):
            if getattr(self, name) not in allowed:
                raise SchemaViolation(name, f"must be one of {', '.join(allowed)}")
        if not self.method_name.strip():
            raise SchemaViolation("method_name", "must be non-empty")
        if self.source == "extracted" and self.raw_text is None:
            raise SchemaViolation("raw_text", "extracted profiles keep the model's raw answer")

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["raw_text"] is None:
            del d["raw_text"]
        return d


@dataclass(frozen=True)
class ScenarioQuery:
    activity_description: str
    posture: str = "unknown"
    available_hardware: str = "unknown"
    location: str | None = None
    time: str | None = None

    def __post_init__(self):
        if self.posture not in SCENARIO_POSTURES:
            raise ValueError(f"posture must be one of {SCENARIO_POSTURES}")
        if self.available_hardware not in SCENARIO_HARDWARE:
            raise ValueError(f"available_hardware must be one of {SCENARIO_HARDWARE}")

    @property
    def aspects(self) -> tuple[str, ...]:
        tags = []
        if self.location:
            tags.append("location")
        if self.activity_description or self.posture != "unknown":
            tags.append("activity")
        if self.time:
            tags.append("time")
        if self.available_hardware != "unknown":
            tags.append("identity")
        return tuple(tags)


@dataclass(frozen=True)
class ConstraintVerdict:
    method_name: str
    verdict: str
    aspect: str | None
    explanation: str

    @property
    def compatible(self) -> bool:
        return self.verdict == "compatible"


@dataclass(frozen=True)
class ScoringWeights:
    constraint_fitness: float = 0.5
    accuracy: float = 0.3
    convenience: float = 0.2

    def __post_init__(self):
        vals = (self.constraint_fitness, self.accuracy, self.convenience)
        if min(vals) < 0 or sum(vals) <= 0:
            raise ValueError("weights must be non-negative with a positive sum")

    def scaled(self, c: float) -> "ScoringWeights":
        return ScoringWeights(self.constraint_fitness * c, self.accuracy * c, self.convenience * c)


@dataclass(frozen=True)
class RankedMethod:
    method_name: str
    score: float
    verdicts: tuple[ConstraintVerdict, ...]

    @property
    def compatible(self) -> bool:
        return all(v.compatible for v in self.verdicts)


@dataclass(frozen=True)
class Recommendation:
    ranked: tuple[RankedMethod, ...]
    rationale: str
    scenario: ScenarioQuery

    @property
    def best(self) -> RankedMethod | None:
        return self.ranked[0] if self.ranked and self.ranked[0].compatible else None


# -- profile store -------------------------------------------------------------

class ProfileStore:
    """Method profiles keyed by unique name; reads are unlocked, inserts serialized."""

    def __init__(self, profiles: Iterable[MethodProfile] = ()):
        self._profiles: dict[str, MethodProfile] = {}
        self._lock = threading.Lock()
        for p in profiles:
            self.add(p)

    def add(self, profile: MethodProfile, replace: bool = False) -> None:
        with self._lock:
            if profile.method_name in self._profiles and not replace:
                raise DuplicateMethod(f"profile {profile.method_name!r} already stored")
            self._profiles[profile.method_name] = profile

    def __len__(self) -> int:
        return len(self._profiles)

    def __iter__(self):
        return iter(list(self._profiles.values()))

    def get(self, name: str) -> MethodProfile:
        return self._profiles[name]

    def to_json(self) -> str:
        return json.dumps([p.to_dict() for p in self], indent=2, ensure_ascii=False) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def from_json(cls, text: str) -> "ProfileStore":
        data = json.loads(text)
        if not isinstance(data, list):
            raise SchemaViolation("<root>", "profile store must be a JSON array")
        profiles = []
        for item in data:
            try:
                profiles.append(MethodProfile(**item))
            except TypeError as exc:
                raise SchemaViolation("<profile>", str(exc)) from exc
        return cls(profiles)

    @classmethod
    def load(cls, path) -> "ProfileStore":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def bundled_profiles() -> ProfileStore:
    """The MicroCam, SpeCam and Tangible Radar fixture profiles."""
    text = (resources.files("multisurf") / "data" / "profiles.json").read_text(encoding="utf-8")
    return ProfileStore.from_json(text)


# -- extraction ----------------------------------------------------------------

_FACE_UP = ("face-up", "face up", "facing up")
_FACE_DOWN = ("face-down", "face down", "facing down")


def _first_position(text: str, needles: Sequence[str]) -> int:
    hits = [text.find(n) for n in needles if n in text]
    return min(hits) if hits else -1


def infer_posture(text: str) -> str:
    t = text.casefold()
    up, down = _first_position(t, _FACE_UP), _first_position(t, _FACE_DOWN)
    if up < 0 and down < 0:
        return "none"
    if down < 0 or (0 <= up < down):
        return "face_up"
    return "face_down"


def infer_hardware(text: str) -> str:
    return "specialized" if "radar" in text.casefold() else "consumer_smartphone"


def extract_method_profile(document_bytes: bytes, backend: Backend | BackendConfig, method_name: str,
                           accuracy_class: str = "unknown") -> MethodProfile:
    """Ask the model to summarize a method's paper and map the answer onto a profile.

    Posture and hardware come from keyword rules over all three extracted
    segments, since posture is often stated in the method rather than the
    equipment description.
    """
    prompt = render_document_prompt(document_bytes)
    owned = isinstance(backend, BackendConfig)
    be = open_backend(backend) if owned else backend
    try:
        response = be.send(be.make_request(prompt))
    finally:
        if owned:
            be.close()
    parts = parse_profile_text(response.text)
    combined = " ".join((parts.equipment, parts.method_sentence, parts.usage_sentence))
    return MethodProfile(
        method_name=method_name,
        equipment=parts.equipment,
        posture_requirement=infer_posture(combined),
        hardware=infer_hardware(combined),
        accuracy_class=accuracy_class,
        method_sentence=parts.method_sentence,
        usage_sentence=parts.usage_sentence,
        source="extracted",
        raw_text=parts.raw_text,
    )


# -- constraints and ranking ---------------------------------------------------------

def constraint_verdicts(profile: MethodProfile, scenario: ScenarioQuery) -> list[ConstraintVerdict]:
    """Every violated hard constraint, hardware first; ``[compatible]`` when none."""
    out = []
    if profile.hardware == "specialized" and scenario.available_hardware == "consumer_smartphone":
        out.append(ConstraintVerdict(
            profile.method_name, "hardware_unavailable", "identity",
            f"{profile.method_name} needs specialized hardware ({profile.equipment}) "
            "that a consumer smartphone does not have.",
        ))
    req, have = profile.posture_requirement, scenario.posture
    if req != "none" and have != "unknown" and req != have:
        out.append(ConstraintVerdict(
            profile.method_name, "posture_conflict", "activity",
            f"{profile.method_name} requires the phone {_posture_words(req)}, "
            f"but the activity keeps it {_posture_words(have)}.",
        ))
    if not out:
        out.append(ConstraintVerdict(
            profile.method_name, "compatible", None,
            f"{profile.method_name} fits the scenario's posture and hardware.",
        ))
    return out


def check_constraints(profile: MethodProfile, scenario: ScenarioQuery) -> ConstraintVerdict:
    return constraint_verdicts(profile, scenario)[0]


def _convenience(profile: MethodProfile) -> float:
    return 1.0 if profile.hardware == "consumer_smartphone" else 0.0


def rank_methods(
    scenario: ScenarioQuery,
    profiles: Iterable[MethodProfile],
    reports: Mapping[str, float] | None = None,
    weights: ScoringWeights = ScoringWeights(),
) -> Recommendation:
    """Score and order methods for a scenario.

    Methods violating a hard constraint score 0 and always sort after every
    compatible method. ``reports`` optionally maps method names to measured
    accuracy in [0, 1], overriding the coarse accuracy class.
    """
    profiles = list(profiles)
    if not profiles:
        raise EmptyProfileStore("no method profiles to rank")
    reports = reports or {}
    total = weights.constraint_fitness + weights.accuracy + weights.convenience
    entries = []
    for p in profiles:
        verdicts = tuple(constraint_verdicts(p, scenario))
        ok = verdicts[0].compatible
        acc = ACCURACY_VALUE[p.accuracy_class]
        if ok:
            measured = reports.get(p.method_name)
            acc_term = min(max(measured, 0.0), 1.0) if measured is not None else acc
            score = (weights.constraint_fitness * 1.0 + weights.accuracy * acc_term
                     + weights.convenience * _convenience(p)) / total
        else:
            score = 0.0
        entries.append((not ok, -score, -acc, p.method_name, RankedMethod(p.method_name, score, verdicts)))
    entries.sort(key=lambda e: e[:4])
    ranked = tuple(e[-1] for e in entries)
    rec = Recommendation(ranked, "", scenario)
    return Recommendation(ranked, template_rationale(rec), scenario)


# -- rationale -------------------------------------------------------------------

def template_rationale(rec: Recommendation) -> str:
    if not rec.ranked:
        return NO_COMPATIBLE
    sc = rec.scenario
    lines = [
        f"Scenario: {sc.activity_description or 'unspecified activity'} "
        f"(posture: {_posture_words(sc.posture)}, hardware: {sc.available_hardware.replace('_', ' ')})."
    ]
    if sc.location:
        lines.append(f"Location: {sc.location}.")
    if sc.time:
        lines.append(f"Time: {sc.time}.")
    if sc.aspects:
        lines.append("Context aspects considered: " + ", ".join(sc.aspects) + ".")
    for pos, entry in enumerate(rec.ranked, start=1):
        notes = []
        for v in entry.verdicts:
            label = v.verdict.replace("_", " ")
            if v.aspect:
                label += f" ({v.aspect} aspect)"
            notes.append(f"{label}: {v.explanation}")
        lines.append(f"{pos}. {entry.method_name} (score {entry.score:.2f}): " + " ".join(notes))
    if rec.best is None:
        lines.append(NO_COMPATIBLE)
    else:
        lines.append(f"Recommended: {rec.best.method_name}.")
    return "\n".join(lines)


def rationale_keeps_facts(text: str, rec: Recommendation) -> bool:
    """Each method name and each of its verdict keywords must appear in ``text``."""
    folded = text.casefold()
    for entry in rec.ranked:
        if entry.method_name.casefold() not in folded:
            return False
        for v in entry.verdicts:
            if VERDICT_KEYWORD[v.verdict] not in folded:
                return False
    return True


REWRITE_INSTRUCTION = (
    "Rewrite the following sensing-method recommendation as a short fluent paragraph. "
    "Keep every method name and every verdict (compatible, posture conflict, hardware unavailable)."
)


def compose_rationale(rec: Recommendation, backend: Backend | BackendConfig | None = None) -> str:
    """Template narrative, optionally rewritten by a model.

    A rewrite is accepted only when it still names every method and verdict;
    otherwise, or on any backend error, the template text is returned.
    """
    template = template_rationale(rec)
    if backend is None or not rec.ranked:
        return template
    prompt = rewrite_request_prompt(rec)
    try:
        owned = isinstance(backend, BackendConfig)
        be = open_backend(backend) if owned else backend
        try:
            text = be.send(be.make_request(prompt)).text.strip()
        finally:
            if owned:
                be.close()
    except MultiSurfError:
        return template
    return text if text and rationale_keeps_facts(text, rec) else template


def rewrite_request_prompt(rec: Recommendation) -> RenderedPrompt:
    return RenderedPrompt(REWRITE_INSTRUCTION + "\n\n" + template_rationale(rec))


FIGURE2_SCENARIO = ScenarioQuery(
    activity_description="browsing news on the phone",
    posture="face_up",
    available_hardware="consumer_smartphone",
)
