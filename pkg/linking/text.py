"""Word-level tokenization, mention markup, passage windows and input assembly.

Every tokenization keeps character offsets so that spans found in token space
can be mapped back onto the document text.
"""
import logging
import re
from collections import Counter
from dataclasses import dataclass, field

from .exceptions import (
    DocBudgetExceededError,
    EmptyCorpusError,
    InvalidWindowError,
    SpanOutOfBoundsError,
    SpanSplitsTokenError,
)

logger = logging.getLogger(__name__)

PAD = "<pad>"
UNK = "<unk>"
BOS = "<bos>"
EOS = "<eos>"
MENTION_START = "<s1>"
MENTION_END = "<e1>"
EXTRA_IDS = tuple(f"<extra_id_{i}>" for i in range(6))
CLS = "[CLS]"
ENT = "[ENT]"
SEP = "[SEP]"

# Fixed order: the first lines of every vocabulary file.
SPECIAL_TOKENS = (PAD, UNK, BOS, EOS, MENTION_START, MENTION_END, *EXTRA_IDS, CLS, ENT, SEP)

CONTEXT_BUDGET = 250
ED_DESCRIPTION_BUDGET = 140
RETRIEVAL_DESCRIPTION_BUDGET = 128
EL_DESCRIPTION_BUDGET = 128
DOC_BUDGET = 20

_TOKEN_RE = re.compile(
    "|".join(re.escape(token) for token in sorted(SPECIAL_TOKENS, key=len, reverse=True))
    + r"|\w+|[^\w\s]"
)


def split_tokens(text):
    """Split text into (token, start, end) triples; special tokens stay whole."""
    return [(m.group(), m.start(), m.end()) for m in _TOKEN_RE.finditer(text)]


def detokenize(tokens):
    return " ".join(tokens)


def normalize_whitespace(text):
    return " ".join(text.split())


@dataclass(frozen=True)
class TokenizedText:
    """Text plus its tokens and their character offsets."""
    text: str
    tokens: tuple
    offsets: tuple

    @classmethod
    def from_text(cls, text):
        triples = split_tokens(text)
        return cls(
            text=text,
            tokens=tuple(t for t, _, _ in triples),
            offsets=tuple((s, e) for _, s, e in triples),
        )

    def __len__(self):
        return len(self.tokens)


class Tokenizer:
    """Word-level vocabulary with an atomic special-token registry."""

    def __init__(self, tokens):
        tokens = list(tokens)
        if tuple(tokens[:len(SPECIAL_TOKENS)]) != SPECIAL_TOKENS:
            raise ValueError("vocabulary must start with the special tokens in registry order")
        if len(set(tokens)) != len(tokens):
            raise ValueError("vocabulary contains duplicate tokens")
        self.id_to_token = tokens
        self.token_to_id = {token: i for i, token in enumerate(tokens)}
        self.unk_id = self.special_id(UNK)
        self.pad_id = self.special_id(PAD)
        self.bos_id = self.special_id(BOS)
        self.eos_id = self.special_id(EOS)

    def __len__(self):
        return len(self.id_to_token)

    def __contains__(self, token):
        return token in self.token_to_id

    def tokenize(self, text):
        return [t for t, _, _ in split_tokens(text)]

    def encode(self, tokens):
        return [self.token_to_id.get(token, self.unk_id) for token in tokens]

    def encode_text(self, text):
        return self.encode(self.tokenize(text))

    def decode(self, ids):
        return [self.id_to_token[i] for i in ids]

    def decode_text(self, ids):
        return detokenize(self.decode(ids))

    def special_id(self, token):
        return self.token_to_id[token]

    def save(self, path):
        with open(path, "w", encoding="utf-8") as handle:
            for token in self.id_to_token:
                handle.write(token + "\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as handle:
            return cls(line.rstrip("\n") for line in handle)


def build_vocab(corpus, min_count=1, reserved=()):
    """Build a tokenizer from a stream of texts.

    Tokens seen at least ``min_count`` times are kept, in order of decreasing
    frequency then first appearance. ``reserved`` tokens (for instance the
    decimal candidate indexes used by index targets) are always added.
    """
    counts = Counter()
    seen_text = False
    for text in corpus:
        seen_text = True
        counts.update(t for t in (tok for tok, _, _ in split_tokens(text)) if t not in SPECIAL_TOKENS)
    if not seen_text:
        raise EmptyCorpusError("cannot build a vocabulary from an empty corpus")

    tokens = list(SPECIAL_TOKENS)
    known = set(tokens)
    # Counter.most_common keeps first-insertion order among equal counts
    for token, count in counts.most_common():
        if count >= min_count and token not in known:
            tokens.append(token)
            known.add(token)
    for token in reserved:
        if token not in known:
            tokens.append(token)
            known.add(token)
    logger.info("Built vocabulary of %d tokens (min_count=%d)", len(tokens), min_count)
    return Tokenizer(tokens)


# ============================================
# MENTION MARKUP AND PASSAGES
# ============================================

def _token_index_span(tokenized, start, end):
    """Map a character span onto [first, last) token indexes."""
    if start < 0 or end > len(tokenized.text) or start >= end:
        raise SpanOutOfBoundsError(f"span [{start}, {end}) outside document of length {len(tokenized.text)}")
    starts = {s: i for i, (s, _) in enumerate(tokenized.offsets)}
    ends = {e: i for i, (_, e) in enumerate(tokenized.offsets)}
    if start not in starts or end not in ends or starts[start] > ends[end]:
        raise SpanSplitsTokenError(f"span [{start}, {end}) does not fall on token boundaries")
    return starts[start], ends[end] + 1


def mark_mention(doc, span, budget=CONTEXT_BUDGET):
    """Return ``left <s1> mention <e1> right`` trimmed to at most ``budget`` tokens.

    Context is trimmed from the far ends; what one side cannot use goes to the
    other.
    """
    tokenized = doc if isinstance(doc, TokenizedText) else TokenizedText.from_text(doc)
    first, last = _token_index_span(tokenized, *span)
    left = list(tokenized.tokens[:first])
    mention = list(tokenized.tokens[first:last])
    right = list(tokenized.tokens[last:])

    mention = mention[:max(budget - 2, 1)]
    available = max(budget - len(mention) - 2, 0)
    left_quota = available // 2
    right_quota = available - left_quota
    if len(left) < left_quota:
        right_quota += left_quota - len(left)
        left_quota = len(left)
    if len(right) < right_quota:
        left_quota = min(len(left), left_quota + right_quota - len(right))
        right_quota = len(right)

    kept_left = left[len(left) - left_quota:] if left_quota else []
    return kept_left + [MENTION_START] + mention + [MENTION_END] + right[:right_quota]


@dataclass(frozen=True)
class Passage:
    """A window of document tokens; ``char_offset`` maps local spans to the document."""
    doc_id: str
    token_start: int
    token_end: int
    tokens: tuple
    offsets: tuple = field(repr=False)
    text: str
    char_offset: int
    topic: str = ""

    def to_document_span(self, start, end):
        return start + self.char_offset, end + self.char_offset

    def local_offsets(self):
        return tuple((s - self.char_offset, e - self.char_offset) for s, e in self.offsets)


def document_topic(tokenized, budget=DOC_BUDGET):
    """The truncated document used as topic and reader context: its first tokens."""
    return tuple(tokenized.tokens[:budget])


def chunk_passages(doc, window=20, stride=10, doc_id="", topic=""):
    """Split a tokenized document into windows starting every ``stride`` tokens."""
    if stride < 1 or window < 1 or stride > window:
        raise InvalidWindowError(f"invalid window={window} stride={stride}")
    tokenized = doc if isinstance(doc, TokenizedText) else TokenizedText.from_text(doc)
    n = len(tokenized)
    passages = []
    start = 0
    while start < n:
        end = min(start + window, n)
        offsets = tokenized.offsets[start:end]
        char_start, char_end = offsets[0][0], offsets[-1][1]
        passages.append(Passage(
            doc_id=doc_id,
            token_start=start,
            token_end=end,
            tokens=tokenized.tokens[start:end],
            offsets=offsets,
            text=tokenized.text[char_start:char_end],
            char_offset=char_start,
            topic=topic,
        ))
        start += stride
    return passages


# ============================================
# INPUT ASSEMBLY
# ============================================

def _entity_part(entity, budget):
    """Title and description tokens, description trimmed first, ``budget`` in total."""
    title = split_tokens(entity.title)
    description = split_tokens(entity.description)
    title = [t for t, _, _ in title][:budget]
    description = [t for t, _, _ in description][:budget - len(title)]
    return title, description


def build_ed_input(context, entity, desc_budget=ED_DESCRIPTION_BUDGET):
    title, description = _entity_part(entity, desc_budget)
    return list(context) + [EXTRA_IDS[2]] + title + [EXTRA_IDS[3]] + description


def build_el_input(doc_trunc, passage, entity, desc_budget=EL_DESCRIPTION_BUDGET):
    if len(doc_trunc) > DOC_BUDGET:
        raise DocBudgetExceededError(f"truncated document has {len(doc_trunc)} tokens, limit is {DOC_BUDGET}")
    title, description = _entity_part(entity, desc_budget)
    return (
        [EXTRA_IDS[0]] + list(doc_trunc)
        + [EXTRA_IDS[1]] + list(passage.tokens)
        + [EXTRA_IDS[2]] + title
        + [EXTRA_IDS[3]] + description
    )


def build_retrieval_entity_text(entity, desc_budget=RETRIEVAL_DESCRIPTION_BUDGET):
    title = [t for t, _, _ in split_tokens(entity.title)]
    description = [t for t, _, _ in split_tokens(entity.description)][:desc_budget]
    return [CLS] + title + [ENT] + description + [SEP]


def build_retrieval_passage_text(passage):
    topic = [t for t, _, _ in split_tokens(passage.topic)]
    return [CLS] + list(passage.tokens) + [SEP] + topic + [SEP]
