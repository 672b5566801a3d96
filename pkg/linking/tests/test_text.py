import tempfile
from pathlib import Path

from django.test import SimpleTestCase

from linking import synthetic
from linking.exceptions import (
    DocBudgetExceededError,
    EmptyCorpusError,
    InvalidWindowError,
    SpanOutOfBoundsError,
    SpanSplitsTokenError,
)
from linking.kb import Entity
from linking.text import (
    CLS,
    ENT,
    EXTRA_IDS,
    MENTION_END,
    MENTION_START,
    SEP,
    SPECIAL_TOKENS,
    TokenizedText,
    Tokenizer,
    build_ed_input,
    build_el_input,
    build_retrieval_entity_text,
    build_retrieval_passage_text,
    build_vocab,
    chunk_passages,
    detokenize,
    document_topic,
    mark_mention,
    normalize_whitespace,
    split_tokens,
)

JACK = synthetic.CHARLTON_ENTITIES[1]


def words(n, prefix="w"):
    return " ".join(f"{prefix}{i}" for i in range(n))


class VocabularyTests(SimpleTestCase):
    def test_min_count(self):
        tokenizer = build_vocab(["a b a"], min_count=2)
        self.assertIn("a", tokenizer)
        self.assertNotIn("b", tokenizer)

    def test_special_tokens_come_first(self):
        tokenizer = build_vocab(["anything"])
        self.assertEqual(tuple(tokenizer.id_to_token[:len(SPECIAL_TOKENS)]), SPECIAL_TOKENS)
        for token in (MENTION_START, MENTION_END, *EXTRA_IDS, CLS, ENT, SEP):
            self.assertIn(token, tokenizer)

    def test_fig1_mention_is_one_token(self):
        tokenizer = build_vocab([synthetic.DUBLIN_TEXT])
        self.assertEqual(tokenizer.tokenize("Charlton"), ["Charlton"])
        self.assertNotEqual(tokenizer.encode(["Charlton"]), [tokenizer.unk_id])

    def test_unknown_tokens(self):
        tokenizer = build_vocab(["a b"])
        self.assertEqual(tokenizer.encode_text("a zzz"), [tokenizer.encode(["a"])[0], tokenizer.unk_id])

    def test_empty_corpus(self):
        with self.assertRaises(EmptyCorpusError):
            build_vocab([])

    def test_reserved_tokens(self):
        tokenizer = build_vocab(["a"], reserved=["0", "1"])
        self.assertIn("1", tokenizer)

    def test_vocabulary_file(self):
        tokenizer = build_vocab([synthetic.DUBLIN_TEXT])
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "vocab.txt"
            tokenizer.save(path)
            lines = path.read_text(encoding="utf-8").splitlines()
            self.assertEqual(tuple(lines[:len(SPECIAL_TOKENS)]), SPECIAL_TOKENS)
            self.assertEqual(Tokenizer.load(path).id_to_token, tokenizer.id_to_token)


class TokenizationTests(SimpleTestCase):
    def test_special_tokens_are_atomic(self):
        tokens = [t for t, _, _ in split_tokens("x <extra_id_4> y [SEP] <s1>z<e1>")]
        self.assertEqual(tokens, ["x", "<extra_id_4>", "y", "[SEP]", "<s1>", "z", "<e1>"])

    def test_offsets_point_into_text(self):
        tokenized = TokenizedText.from_text(synthetic.DUBLIN_TEXT)
        for token, (start, end) in zip(tokenized.tokens, tokenized.offsets):
            self.assertEqual(synthetic.DUBLIN_TEXT[start:end], token)

    def test_detokenize_restores_spaced_text(self):
        text = "That is why this is so emotional a night for me , Charlton said ."
        self.assertEqual(detokenize([t for t, _, _ in split_tokens(text)]), normalize_whitespace(text))


class MarkMentionTests(SimpleTestCase):
    def test_fig1_markup(self):
        tokens = mark_mention(synthetic.DUBLIN_TEXT, synthetic.charlton_span())
        self.assertTrue(detokenize(tokens).endswith("a night for me , <s1> Charlton <e1> said ."))
        self.assertEqual(len(tokens), len(TokenizedText.from_text(synthetic.DUBLIN_TEXT)) + 2)

    def test_symmetric_trim(self):
        text = f"{words(50, 'l')} target {words(50, 'r')}"
        start = text.index("target")
        tokens = mark_mention(text, (start, start + 6), budget=13)
        self.assertEqual(len(tokens), 13)
        self.assertEqual(tokens[:5], ["l45", "l46", "l47", "l48", "l49"])
        self.assertEqual(tokens[5:8], [MENTION_START, "target", MENTION_END])
        self.assertEqual(tokens[8:], ["r0", "r1", "r2", "r3", "r4"])

    def test_mention_at_start_gives_budget_to_the_right(self):
        text = f"target {words(300)}"
        tokens = mark_mention(text, (0, 6))
        self.assertEqual(len(tokens), 250)
        self.assertEqual(tokens[:3], [MENTION_START, "target", MENTION_END])
        self.assertEqual(tokens[-1], "w246")

    def test_span_errors(self):
        with self.assertRaises(SpanOutOfBoundsError):
            mark_mention("short text", (6, 40))
        with self.assertRaises(SpanSplitsTokenError):
            mark_mention("Charlton said", (0, 4))


class ChunkPassagesTests(SimpleTestCase):
    def test_forty_tokens(self):
        passages = chunk_passages(words(40), window=20, stride=10)
        self.assertEqual([p.token_start for p in passages], [0, 10, 20, 30])
        self.assertEqual(len(passages[-1].tokens), 10)

    def test_short_document(self):
        [passage] = chunk_passages(words(5))
        self.assertEqual(len(passage.tokens), 5)

    def test_non_overlapping_tiling(self):
        passages = chunk_passages(words(60), window=20, stride=20)
        self.assertEqual([(p.token_start, p.token_end) for p in passages], [(0, 20), (20, 40), (40, 60)])

    def test_invalid_window(self):
        for window, stride in ((10, 20), (10, 0)):
            with self.assertRaises(InvalidWindowError):
                chunk_passages(words(5), window=window, stride=stride)

    def test_coverage(self):
        passages = chunk_passages(words(97), window=20, stride=10)
        covered = [0] * 97
        for passage in passages:
            for i in range(passage.token_start, passage.token_end):
                covered[i] += 1
        self.assertTrue(all(covered))
        self.assertTrue(all(count == 2 for count in covered[10:90]))

    def test_offsets_map_back_to_document(self):
        text = synthetic.DUBLIN_TEXT
        for passage in chunk_passages(text, window=7, stride=3):
            self.assertEqual(text[passage.char_offset:passage.char_offset + len(passage.text)], passage.text)
            for (start, end), token in zip(passage.local_offsets(), passage.tokens):
                doc_start, doc_end = passage.to_document_span(start, end)
                self.assertEqual(text[doc_start:doc_end], token)


class InputAssemblyTests(SimpleTestCase):
    def test_ed_input(self):
        context = mark_mention(synthetic.DUBLIN_TEXT, synthetic.charlton_span())
        tokens = build_ed_input(context, JACK)
        self.assertEqual(tokens[:len(context)], context)
        self.assertEqual(tokens.count(EXTRA_IDS[2]), 1)
        self.assertEqual(tokens.count(EXTRA_IDS[3]), 1)
        self.assertEqual(tokens[len(context):len(context) + 4], [EXTRA_IDS[2], "Jack", "Charlton", EXTRA_IDS[3]])

    def test_ed_input_empty_description(self):
        tokens = build_ed_input(["x"], Entity("a", "A"))
        self.assertEqual(tokens[-1], EXTRA_IDS[3])

    def test_ed_entity_part_budget(self):
        entity = Entity("a", "Long Entity", words(500))
        tokens = build_ed_input(["x"], entity, desc_budget=140)
        self.assertEqual(len(tokens) - 1 - 2, 140)
        self.assertEqual(tokens[-1], "w137")

    def test_el_input_layout(self):
        doc_trunc = document_topic(TokenizedText.from_text(synthetic.DUBLIN_TEXT))
        self.assertEqual(len(doc_trunc), 20)
        passage = synthetic.dublin_quote()
        tokens = build_el_input(doc_trunc, passage, JACK)
        markers = [t for t in tokens if t in EXTRA_IDS]
        self.assertEqual(markers, list(EXTRA_IDS[:4]))
        self.assertEqual(tokens[0], EXTRA_IDS[0])
        self.assertEqual(tokens[1:21], list(doc_trunc))
        self.assertEqual(tokens[21], EXTRA_IDS[1])
        self.assertEqual(tokens[22:22 + len(passage.tokens)], list(passage.tokens))

    def test_el_input_empty_description_and_duplicate_content(self):
        passage = chunk_passages("same words here")[0]
        tokens = build_el_input(passage.tokens, passage, Entity("a", "A"))
        self.assertEqual(tokens, [EXTRA_IDS[0], "same", "words", "here", EXTRA_IDS[1], "same", "words", "here",
                                  EXTRA_IDS[2], "A", EXTRA_IDS[3]])

    def test_el_doc_budget(self):
        passage = chunk_passages("x")[0]
        with self.assertRaises(DocBudgetExceededError):
            build_el_input(tuple(words(21).split()), passage, JACK)

    def test_retrieval_entity_text(self):
        tokens = build_retrieval_entity_text(JACK)
        self.assertEqual(tokens[:4], [CLS, "Jack", "Charlton", ENT])
        self.assertEqual(tokens[-1], SEP)
        self.assertEqual(build_retrieval_entity_text(Entity("a", "A")), [CLS, "A", ENT, SEP])
        long = build_retrieval_entity_text(Entity("a", "A", words(200)))
        self.assertEqual(len(long), 128 + 4)

    def test_retrieval_passage_text(self):
        passage = synthetic.dublin_quote()
        tokens = build_retrieval_passage_text(passage)
        self.assertEqual(tokens[0], CLS)
        self.assertEqual(tokens.count(SEP), 2)
        self.assertEqual(tokens[1:1 + len(passage.tokens)], list(passage.tokens))
        self.assertEqual(tokens[1 + len(passage.tokens)], SEP)

        bare = chunk_passages("one")[0]
        self.assertEqual(build_retrieval_passage_text(bare), [CLS, "one", SEP, SEP])
