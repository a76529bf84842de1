import pytest
from hypothesis import given, settings, strategies as st

from multisurf import errors
from multisurf.ingest import ImageCorpus, ImageSample
from multisurf.prompt import (
    ExemplarSet,
    RenderedPrompt,
    format_class_list,
    render_csv_prompt,
    render_document_prompt,
    render_image_prompt,
    sample_exemplars,
)

CSV_GOLDEN = (
    "The provided CSV is radar data. In the CSV file, columns [0:-1] contain the radar features, "
    "and the last column [-1] contains the labels. Build a model (defaulting to using RF) and "
    "return the accuracy. Do not output other text.\n"
    "[Rules]: Do not output any other text."
)

IMAGE_ZERO_GOLDEN = (
    "The provided picture is microscope image. Identify the category of this picture from "
    "[wood, metal, fabric] and return only one category (only one category can be returned).\n"
    "[Rules]: Must return within [wood, metal, fabric]. Do not output any other text."
)

IMAGE_ONE_GOLDEN = (
    "The provided picture is microscope image. Identify the category of this picture from "
    "[wood, metal, fabric] and return only one category (only one category can be returned). "
    "For example, Example of wood, Example of metal, Example of fabric (where n is the number of "
    "categories in [wood, metal, fabric]) are sample images for each category in [wood, metal, fabric].\n"
    "[Rules]: Must return within [wood, metal, fabric]. Do not output any other text."
)

DOCUMENT_GOLDEN = (
    "According to the given paper, what equipment did they use, what is the method, and what is "
    "the origin usage of the data?\n"
    "[Rules]: Summarize the method and origin usage each in one complete sentence."
)

CLASSES = ["wood", "metal", "fabric"]


def make_corpus(counts):
    samples = []
    for label, n in counts.items():
        for j in range(n):
            samples.append(ImageSample(f"{label}/{j}", label, f"{label}-{j}".encode(), "png"))
    return ImageCorpus("c", tuple(counts), tuple(samples))


QUERY = ImageSample("wood/q", "wood", b"query-bytes", "png")


def test_csv_golden():
    p = render_csv_prompt("radar", "RF", b"1,2,A\n")
    assert p.text == CSV_GOLDEN
    assert "Build a model (defaulting to using RF) and return the accuracy." in p.text
    assert [a.role for a in p.attachments] == ["csv"]


def test_csv_svm_and_unknown_model():
    assert "defaulting to using SVM" in render_csv_prompt("radar", "SVM", b"x").text
    with pytest.raises(errors.UnknownModelName):
        render_csv_prompt("radar", "KNN", b"x")
    with pytest.raises(errors.EmptyAttachment):
        render_csv_prompt("radar", "RF", b"")


def test_image_zero_shot_golden():
    p = render_image_prompt("microscope image", CLASSES, QUERY)
    assert p.text == IMAGE_ZERO_GOLDEN
    assert "Identify the category of this picture from [wood, metal, fabric]" in p.text
    assert len(p.attachments) == 1 and p.attachments[0].role == "query"


def test_image_one_shot_golden_and_attachments():
    corpus = make_corpus({c: 3 for c in CLASSES})
    ex, _ = sample_exemplars(corpus, 5)
    p = render_image_prompt("microscope image", CLASSES, QUERY, ex)
    assert p.text == IMAGE_ONE_GOLDEN
    assert [a.role for a in p.attachments] == ["exemplar"] * 3 + ["query"]
    assert [a.label_hint for a in p.attachments[:3]] == CLASSES
    assert p.attachments[-1].bytes == QUERY.bytes


def test_image_errors():
    with pytest.raises(errors.EmptyClassList):
        render_image_prompt("microscope image", [], QUERY)
    corpus = make_corpus({"wood": 2, "metal": 2})
    ex, _ = sample_exemplars(corpus, 0)
    with pytest.raises(errors.ExemplarClassMismatch):
        render_image_prompt("microscope image", CLASSES, QUERY, ex)


def test_document_golden():
    p = render_document_prompt(b"%PDF-1.4 fake")
    assert p.text == DOCUMENT_GOLDEN
    assert p.text.endswith("Summarize the method and origin usage each in one complete sentence.")
    assert p == render_document_prompt(b"%PDF-1.4 fake")
    with pytest.raises(errors.EmptyAttachment):
        render_document_prompt(b"")


def test_class_list_format():
    assert format_class_list(["a", "b c"]) == "[a, b c]"


def test_label_that_is_a_placeholder_token_is_rejected():
    with pytest.raises(ValueError):
        render_image_prompt("x", ["<MOD>", "b"], QUERY)
    assert "[<mod>, b]" in render_image_prompt("x", ["<mod>", "b"], QUERY).text


def test_residue_rejected():
    with pytest.raises(ValueError):
        RenderedPrompt("hello <CLASS>", ())


def test_exemplars_seeded():
    corpus = make_corpus({"A": 5, "B": 5})
    a = sample_exemplars(corpus, 7)
    b = sample_exemplars(corpus, 7)
    assert a == b
    assert len(a[1]) == 8
    assert not a[0].warning


def test_exemplar_depletion_warning():
    corpus = make_corpus({"A": 1, "B": 5})
    ex, pool = sample_exemplars(corpus, 3)
    assert ex.exemplars["A"].sample_id == "A/0"
    assert ex.depleted == ("A",)
    assert ex.warning
    assert all(s.class_label == "B" for s in pool)


def test_exemplar_draw_is_roughly_uniform():
    corpus = make_corpus({"A": 4})
    counts = [0] * 4
    for seed in range(4000):
        ex, _ = sample_exemplars(corpus, seed)
        counts[int(ex.exemplars["A"].sample_id.split("/")[1])] += 1
    assert all(850 < c < 1150 for c in counts)


labels_st = st.lists(
    st.text(alphabet="abcdefgh<>", min_size=1, max_size=6), min_size=1, max_size=5, unique=True
)


@settings(max_examples=100, deadline=None)
@given(labels_st, st.text(alphabet="abc xyz", min_size=1, max_size=12))
def test_zero_shot_purity_and_shape(labels, mod):
    q = ImageSample("x/q", labels[0], b"q", "png")
    a = render_image_prompt(mod, labels, q)
    assert a == render_image_prompt(mod, labels, q)
    task, rules = a.text.split("\n")
    assert rules.startswith("[Rules]: ")
    assert a.text.count("\n") == 1


@settings(max_examples=100, deadline=None)
@given(st.dictionaries(st.sampled_from("ABCDEF"), st.integers(1, 6), min_size=1), st.integers(0, 2**64 - 1))
def test_one_shot_bookkeeping(counts, seed):
    corpus = make_corpus(counts)
    ex, pool = sample_exemplars(corpus, seed)
    chosen = {s.sample_id for s in ex.exemplars.values()}
    pool_ids = {s.sample_id for s in pool}
    assert chosen.isdisjoint(pool_ids)
    assert chosen | pool_ids == {s.sample_id for s in corpus.samples}
    q = pool[0] if pool else corpus.samples[0]
    p = render_image_prompt("m", list(counts), q, ex)
    assert len(p.attachments) == len(counts) + 1
    assert p.attachments[-1].role == "query"
    assert isinstance(ex, ExemplarSet) and set(ex.exemplars) == set(counts)
