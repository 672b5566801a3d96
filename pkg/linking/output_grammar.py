"""Decoder target strings for disambiguation and linking.

Linking output: ``title <extra_id_4> m1, m2 <extra_id_5> title <extra_id_4> m3``;
the empty string means nothing was linked.
"""
import enum
import logging
import re
from dataclasses import dataclass

from .exceptions import DuplicateEntityError, EmptyMentionListError, MalformedSegmentError
from .text import EXTRA_IDS, split_tokens

logger = logging.getLogger(__name__)

MENTIONS_MARKER = EXTRA_IDS[4]
ENTITY_SEPARATOR = EXTRA_IDS[5]
MENTION_DELIMITER = ", "

_MARKERS = tuple(EXTRA_IDS)
_INDEX_RE = re.compile(r"[0-9]+")


class TargetMode(enum.Enum):
    TITLE = "title"
    INDEX = "index"


@dataclass(frozen=True)
class LinkedEntity:
    title: str
    mentions: tuple

    def __post_init__(self):
        object.__setattr__(self, "mentions", tuple(self.mentions))


def _check_text(value, what):
    if any(marker in value for marker in _MARKERS):
        raise ValueError(f"{what} {value!r} contains a reserved marker token")
    if not value.strip() or value != value.strip():
        raise ValueError(f"{what} {value!r} is empty or has surrounding whitespace")


def validate_prediction(prediction):
    titles = set()
    for entity in prediction:
        _check_text(entity.title, "title")
        if entity.title in titles:
            raise ValueError(f"title {entity.title!r} appears twice")
        titles.add(entity.title)
        if not entity.mentions:
            raise ValueError(f"entity {entity.title!r} has no mentions")
        for mention in entity.mentions:
            _check_text(mention, "mention")
            if "," in mention:
                raise ValueError(f"mention {mention!r} contains the mention delimiter")


def serialize_el(prediction):
    validate_prediction(prediction)
    return f" {ENTITY_SEPARATOR} ".join(
        f"{entity.title} {MENTIONS_MARKER} {MENTION_DELIMITER.join(entity.mentions)}"
        for entity in prediction
    )


def _parse_segment(index, segment):
    if segment.count(MENTIONS_MARKER) != 1:
        raise MalformedSegmentError(f"expected one {MENTIONS_MARKER}", segment=index)
    title, mentions = segment.split(MENTIONS_MARKER)
    title = title.strip()
    if not title or any(marker in title for marker in _MARKERS):
        raise MalformedSegmentError("missing or invalid entity title", segment=index)
    mentions = tuple(m.strip() for m in mentions.split(","))
    mentions = tuple(m for m in mentions if m)
    if not mentions:
        raise EmptyMentionListError("entity has no mentions", segment=index)
    if any(marker in m for m in mentions for marker in _MARKERS):
        raise MalformedSegmentError("mention contains a marker token", segment=index)
    return LinkedEntity(title, mentions)


def parse_el(text, strict=False):
    """Parse a decoder output string into ``LinkedEntity`` tuples.

    In strict mode the first bad segment raises; otherwise bad segments are
    dropped and logged.
    """
    if not text.strip():
        return ()
    prediction = []
    titles = set()
    for index, segment in enumerate(text.split(ENTITY_SEPARATOR)):
        try:
            entity = _parse_segment(index, segment)
            if entity.title in titles:
                raise DuplicateEntityError(f"entity {entity.title!r} repeated", segment=index)
        except (MalformedSegmentError, EmptyMentionListError, DuplicateEntityError) as exc:
            if strict:
                raise
            logger.debug("Dropping segment: %s", exc)
            continue
        titles.add(entity.title)
        prediction.append(entity)
    return tuple(prediction)


def title_key(text):
    """Token sequence used to match decoded titles; spacing between tokens is ignored."""
    return tuple(token for token, _, _ in split_tokens(text))


def resolve_entity(decoded, candidates, mode):
    """Map a decoded string onto one of the ordered ``candidates`` (or None)."""
    if not candidates:
        raise ValueError("resolve_entity needs at least one candidate")
    if mode is TargetMode.INDEX:
        value = decoded.strip()
        if not _INDEX_RE.fullmatch(value):
            return None
        position = int(value)
        return candidates[position].id if position < len(candidates) else None
    key = title_key(decoded)
    for entity in candidates:
        if title_key(entity.title) == key:
            return entity.id
    return None


def ed_target(gold, candidates, mode):
    """Target string for disambiguation: the gold title or its candidate position."""
    if mode is TargetMode.INDEX:
        return str([entity.id for entity in candidates].index(gold.id))
    return gold.title
