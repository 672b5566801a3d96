import numpy as np
from django.test import SimpleTestCase

from linking import synthetic
from linking.exceptions import DuplicateEntityError, EmptyMentionListError, MalformedSegmentError
from linking.kb import Entity
from linking.output_grammar import (
    LinkedEntity,
    TargetMode,
    ed_target,
    parse_el,
    resolve_entity,
    serialize_el,
)

ALPHABET = list("abcxyz019 .'-") + ["Jack", "Charlton"]
NOISE = ["<extra_id_4>", "<extra_id_5>", "<extra_id_", ">", ",", " ", "  ", "a", "Charlton", "\n", "é"]


def random_phrase(rng):
    text = "".join(ALPHABET[i] for i in rng.integers(len(ALPHABET), size=int(rng.integers(1, 8))))
    text = " ".join(text.split())
    return text or "x"


def random_prediction(rng):
    prediction = []
    titles = set()
    for _ in range(int(rng.integers(0, 5))):
        title = random_phrase(rng)
        if title in titles:
            continue
        titles.add(title)
        mentions = tuple(random_phrase(rng) for _ in range(int(rng.integers(1, 4))))
        prediction.append(LinkedEntity(title, mentions))
    return tuple(prediction)


class SerializeTests(SimpleTestCase):
    def test_single_entity(self):
        self.assertEqual(serialize_el([LinkedEntity("Jack Charlton", ["Charlton"])]),
                         "Jack Charlton <extra_id_4> Charlton")

    def test_empty_prediction(self):
        self.assertEqual(serialize_el([]), "")

    def test_two_entities(self):
        prediction = [LinkedEntity("A", ["x", "y"]), LinkedEntity("B", ["z"])]
        self.assertEqual(serialize_el(prediction), "A <extra_id_4> x, y <extra_id_5> B <extra_id_4> z")

    def test_title_may_contain_commas(self):
        prediction = (LinkedEntity("Paris, Texas", ("Paris",)),)
        self.assertEqual(serialize_el(prediction), "Paris, Texas <extra_id_4> Paris")
        self.assertEqual(parse_el(serialize_el(prediction), strict=True), prediction)

    def test_rejects_unparseable_predictions(self):
        for prediction in (
            [LinkedEntity("A <extra_id_4>", ["x"])],
            [LinkedEntity("A", [])],
            [LinkedEntity("A", ["x"]), LinkedEntity("A", ["y"])],
            [LinkedEntity("A", ["x, y"])],
            [LinkedEntity("A", [" x"])],
        ):
            with self.assertRaises(ValueError):
                serialize_el(prediction)


class ParseTests(SimpleTestCase):
    def test_single_entity(self):
        self.assertEqual(parse_el("Jack Charlton <extra_id_4> Charlton"),
                         (LinkedEntity("Jack Charlton", ("Charlton",)),))

    def test_empty(self):
        self.assertEqual(parse_el(""), ())
        self.assertEqual(parse_el("   "), ())

    def test_bare_commas_and_whitespace(self):
        self.assertEqual(parse_el("A <extra_id_4>  x ,y,z "), (LinkedEntity("A", ("x", "y", "z")),))

    def test_malformed_first_segment(self):
        text = "A <extra_id_5> B <extra_id_4> z"
        with self.assertRaises(MalformedSegmentError) as ctx:
            parse_el(text, strict=True)
        self.assertEqual(ctx.exception.segment, 0)
        self.assertEqual(parse_el(text), (LinkedEntity("B", ("z",)),))

    def test_empty_mention_list(self):
        with self.assertRaises(EmptyMentionListError) as ctx:
            parse_el("A <extra_id_4> x <extra_id_5> B <extra_id_4> , ", strict=True)
        self.assertEqual(ctx.exception.segment, 1)

    def test_duplicate_entity(self):
        text = "A <extra_id_4> x <extra_id_5> A <extra_id_4> y"
        with self.assertRaises(DuplicateEntityError) as ctx:
            parse_el(text, strict=True)
        self.assertEqual(ctx.exception.segment, 1)
        self.assertEqual(parse_el(text), (LinkedEntity("A", ("x",)),))

    def test_round_trip(self):
        rng = np.random.default_rng(0)
        for _ in range(10_000):
            prediction = random_prediction(rng)
            self.assertEqual(parse_el(serialize_el(prediction), strict=True), prediction)

    def test_lenient_parse_never_raises(self):
        rng = np.random.default_rng(1)
        for _ in range(10_000):
            if rng.random() < 0.5:
                text = rng.bytes(int(rng.integers(0, 40))).decode("latin-1")
            else:
                text = "".join(NOISE[i] for i in rng.integers(len(NOISE), size=int(rng.integers(0, 12))))
            self.assertIsInstance(parse_el(text), tuple)


class ResolveEntityTests(SimpleTestCase):
    def setUp(self):
        self.candidates = list(synthetic.CHARLTON_ENTITIES)

    def test_title_mode(self):
        self.assertEqual(resolve_entity("Jack Charlton", self.candidates, TargetMode.TITLE), "jack_charlton")
        self.assertEqual(resolve_entity("Jack  Charlton", self.candidates, TargetMode.TITLE), "jack_charlton")
        self.assertIsNone(resolve_entity("jack charlton", self.candidates, TargetMode.TITLE))

    def test_title_mode_matches_detokenized_titles(self):
        self.assertEqual(resolve_entity("Charlton Athletic F . C .", self.candidates, TargetMode.TITLE),
                         "charlton_athletic")

    def test_title_mode_keeps_distinct_titles_apart(self):
        candidates = [Entity("ny1", "NewYork"), Entity("ny2", "New York")]
        self.assertEqual(resolve_entity("New York", candidates, TargetMode.TITLE), "ny2")
        self.assertEqual(resolve_entity("NewYork", candidates, TargetMode.TITLE), "ny1")
        self.assertEqual(resolve_entity(" New\tYork ", candidates, TargetMode.TITLE), "ny2")

    def test_index_mode(self):
        candidates = [Entity("a", "A"), Entity("b", "B"), Entity("c", "C")]
        self.assertEqual(resolve_entity("2", candidates, TargetMode.INDEX), "c")
        self.assertEqual(resolve_entity(" 0 ", candidates, TargetMode.INDEX), "a")
        for decoded in ("3", "-1", "one", "", "1 2"):
            self.assertIsNone(resolve_entity(decoded, candidates, TargetMode.INDEX))

    def test_ed_targets(self):
        gold = self.candidates[1]
        self.assertEqual(ed_target(gold, self.candidates, TargetMode.TITLE), "Jack Charlton")
        self.assertEqual(ed_target(gold, self.candidates, TargetMode.INDEX), "1")
