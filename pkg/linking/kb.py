"""Entity store, candidate lists, mention priors and candidate-list metrics."""
import json
import logging
import unicodedata
from collections import defaultdict
from dataclasses import dataclass
from types import MappingProxyType

from .exceptions import (
    DuplicateTitleError,
    EmptyDatasetError,
    EmptyTitleError,
    MalformedRecordError,
    OutOfRangeError,
)
from .text import normalize_whitespace

logger = logging.getLogger(__name__)


def normalize_surface(surface):
    """Candidate-map key: NFC, whitespace runs collapsed to one space. No case folding."""
    return normalize_whitespace(unicodedata.normalize("NFC", surface))


@dataclass(frozen=True)
class Entity:
    id: str
    title: str
    description: str = ""


@dataclass(frozen=True)
class Annotation:
    start: int
    end: int
    entity_id: str


@dataclass(frozen=True)
class AnnotatedDocument:
    doc_id: str
    text: str
    annotations: tuple = ()

    def surface(self, annotation):
        return self.text[annotation.start:annotation.end]

    def mentions(self):
        """(surface, annotation) pairs in document order."""
        return [(self.surface(a), a) for a in self.annotations]


class EntityStore:
    """Id-indexed entities with a consistent title index. Read-only once built."""

    def __init__(self, entities=()):
        by_id = {}
        by_title = {}
        for entity in entities:
            by_id[entity.id] = entity
            by_title[entity.title] = entity.id
        if len(by_id) != len(by_title):
            raise ValueError("entity ids and titles must be in one-to-one correspondence")
        self._entities = MappingProxyType(by_id)
        self.title_index = MappingProxyType(by_title)

    def __len__(self):
        return len(self._entities)

    def __iter__(self):
        return iter(self._entities.values())

    def __contains__(self, entity_id):
        return entity_id in self._entities

    def __eq__(self, other):
        return isinstance(other, EntityStore) and list(self) == list(other)

    def get(self, entity_id):
        return self._entities[entity_id]

    def by_title(self, title):
        entity_id = self.title_index.get(title)
        return None if entity_id is None else self._entities[entity_id]

    def ids(self):
        return list(self._entities)

    @classmethod
    def from_queryset(cls, queryset):
        return cls(Entity(r.entity_id, r.title, r.description) for r in queryset.order_by("pk"))


# ============================================
# INGESTION
# ============================================

def _records(lines, path=None):
    """Yield (line number, dict) for non-blank JSON lines."""
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedRecordError(f"invalid JSON ({exc.msg})", line=number, path=path) from exc
        if not isinstance(record, dict):
            raise MalformedRecordError("record is not a JSON object", line=number, path=path)
        yield number, record


def _require(record, key, kind, number, path):
    value = record.get(key)
    if not isinstance(value, kind) or isinstance(value, bool):
        raise MalformedRecordError(f"field {key!r} missing or not {kind.__name__}", line=number, path=path)
    return value


def ingest_entities(record_stream, path=None):
    """Build an ``EntityStore`` from JSON lines with ``id``, ``title``, ``description``."""
    entities = []
    titles = set()
    ids = set()
    for number, record in _records(record_stream, path):
        entity_id = _require(record, "id", str, number, path)
        title = _require(record, "title", str, number, path)
        description = record.get("description", "")
        if not isinstance(description, str):
            raise MalformedRecordError("field 'description' is not str", line=number, path=path)
        if not title.strip():
            raise EmptyTitleError(f"entity {entity_id!r} has an empty title", line=number, path=path)
        if title in titles:
            raise DuplicateTitleError(f"title {title!r} already defined", line=number, path=path)
        if entity_id in ids:
            raise MalformedRecordError(f"id {entity_id!r} already defined", line=number, path=path)
        titles.add(title)
        ids.add(entity_id)
        entities.append(Entity(entity_id, title, description))
    logger.info("Ingested %d entities", len(entities))
    return EntityStore(entities)


class CandidateMap:
    """Surface form -> ordered, duplicate-free candidate entity ids."""

    def __init__(self, lists=None):
        self._lists = MappingProxyType({
            normalize_surface(k): tuple(v) for k, v in (lists or {}).items()
        })

    def __len__(self):
        return len(self._lists)

    def __contains__(self, surface):
        return normalize_surface(surface) in self._lists

    def items(self):
        return self._lists.items()

    def get(self, surface):
        return self._lists.get(normalize_surface(surface), ())

    @classmethod
    def from_queryset(cls, queryset):
        lists = defaultdict(list)
        for row in queryset.select_related("entity").order_by("mention", "rank"):
            lists[row.mention].append(row.entity.entity_id)
        return cls(lists)


def ingest_candidates(record_stream, store, path=None):
    """Read ``mention``/``candidates`` lines; repeated mentions are merged in file order."""
    lists = {}
    for number, record in _records(record_stream, path):
        mention = _require(record, "mention", str, number, path)
        candidates = _require(record, "candidates", list, number, path)
        key = normalize_surface(mention)
        merged = lists.setdefault(key, [])
        for entity_id in candidates:
            if not isinstance(entity_id, str):
                raise MalformedRecordError("candidate ids must be strings", line=number, path=path)
            if entity_id not in store:
                raise MalformedRecordError(f"unknown entity id {entity_id!r}", line=number, path=path)
            if entity_id not in merged:
                merged.append(entity_id)
    logger.info("Ingested candidate lists for %d surface forms", len(lists))
    return CandidateMap(lists)


def ingest_corpus(record_stream, path=None, require_text=True):
    """Read annotated documents (``doc_id``, ``text``, ``annotations``).

    With ``require_text=False`` the records may be bare link results; spans are
    then only checked for 0 <= start < end.
    """
    documents = []
    for number, record in _records(record_stream, path):
        doc_id = _require(record, "doc_id", str, number, path)
        text = _require(record, "text", str, number, path) if require_text or "text" in record else None
        raw = record.get("annotations", [])
        if not isinstance(raw, list):
            raise MalformedRecordError("field 'annotations' is not a list", line=number, path=path)
        annotations = []
        for item in raw:
            if not isinstance(item, dict):
                raise MalformedRecordError("annotation is not an object", line=number, path=path)
            start = _require(item, "start", int, number, path)
            end = _require(item, "end", int, number, path)
            entity_id = _require(item, "entity_id", str, number, path)
            if not 0 <= start < end or (text is not None and end > len(text)):
                raise MalformedRecordError(f"annotation span [{start}, {end}) out of bounds", line=number, path=path)
            annotations.append(Annotation(start, end, entity_id))
        annotations.sort(key=lambda a: (a.start, a.end, a.entity_id))
        documents.append(AnnotatedDocument(doc_id, text or "", tuple(annotations)))
    return documents


# ============================================
# CANDIDATE LISTS AND PRIORS
# ============================================

def candidates_for(candidate_map, surface, k):
    if k < 1:
        raise ValueError("k must be at least 1")
    return list(candidate_map.get(surface)[:k])


def cl_recall(dataset, candidate_map, k):
    """Fraction of gold (mention, entity) pairs found in the top-k candidates."""
    total = hits = 0
    for document in dataset:
        for surface, annotation in document.mentions():
            total += 1
            if annotation.entity_id in candidates_for(candidate_map, surface, k):
                hits += 1
    if total == 0:
        raise EmptyDatasetError("no gold annotations to score")
    return hits / total


class PriorTable:
    """Mention/entity co-occurrence counts c(m, e) and marginals c(m)."""

    def __init__(self, counts):
        self.counts = {m: dict(row) for m, row in counts.items()}
        self.marginals = {m: sum(row.values()) for m, row in self.counts.items()}

    def prior(self, mention, entity_id):
        mention = normalize_surface(mention)
        total = self.marginals.get(mention, 0)
        if total == 0:
            return None
        return self.counts[mention].get(entity_id, 0) / total

    def most_probable(self, mention):
        """Entity with the highest prior for ``mention``; ties go to the lower id."""
        row = self.counts.get(normalize_surface(mention))
        if not row:
            return None
        return min(row, key=lambda entity_id: (-row[entity_id], entity_id))


def compute_prior(corpus):
    counts = defaultdict(lambda: defaultdict(int))
    for document in corpus:
        for surface, annotation in document.mentions():
            counts[normalize_surface(surface)][annotation.entity_id] += 1
    return PriorTable(counts)


BRACKETS = (
    (1.0, "1"),
    (0.9, "[1 - 0.9]"),
    (0.8, "[0.9 - 0.8]"),
    (0.7, "[0.8 - 0.7]"),
    (0.6, "[0.7 - 0.6]"),
    (0.5, "[0.6 - 0.5]"),
    (0.4, "[0.5 - 0.4]"),
    (0.3, "[0.4 - 0.3]"),
)
BELOW = "below"
BRACKET_LABELS = tuple(label for _, label in BRACKETS) + (BELOW,)


def difficulty_bracket(prior_of_gold):
    """Bracket label for a gold prior; a boundary belongs to the higher bracket."""
    if prior_of_gold is None:
        return BELOW
    if not 0.0 <= prior_of_gold <= 1.0:
        raise OutOfRangeError(f"prior {prior_of_gold!r} outside [0, 1]")
    if prior_of_gold == 1.0:
        return "1"
    for lower, label in BRACKETS[1:]:
        if prior_of_gold >= lower:
            return label
    return BELOW
