"""End-to-end disambiguation and linking.

Linking runs window by window: retrieve candidates, read them with the fusion
reader, parse the decoded string, ground mention strings to character spans,
then resolve overlaps across windows.
"""
import json
import logging
from dataclasses import dataclass, field

import torch

from .exceptions import NoCandidatesError
from .fusion_model import (
    ReaderExample,
    build_trie,
    constrained_decode,
    encode_candidates,
    greedy_decode,
)
from .kb import AnnotatedDocument, candidates_for
from .output_grammar import LinkedEntity, TargetMode, ed_target, parse_el, resolve_entity, serialize_el
from .retriever import top_k
from .runtime import ordered_map
from .text import (
    CONTEXT_BUDGET,
    DOC_BUDGET,
    ED_DESCRIPTION_BUDGET,
    EL_DESCRIPTION_BUDGET,
    TokenizedText,
    build_ed_input,
    build_el_input,
    chunk_passages,
    detokenize,
    document_topic,
    mark_mention,
    split_tokens,
)

logger = logging.getLogger(__name__)

ED_CANDIDATES = 200
EL_CANDIDATES = 100


@dataclass
class Reader:
    """A fusion model plus how to talk to it."""
    model: object
    tokenizer: object
    mode: TargetMode = TargetMode.TITLE
    max_decode_len: int = 48
    constrained: bool = False


@dataclass
class Retrieval:
    model: object
    index: object = None


@dataclass(frozen=True)
class Provenance:
    window_offset: int
    decoded: str


@dataclass(frozen=True)
class LinkedSpan:
    start: int
    end: int
    entity_id: str
    provenance: Provenance = field(default=None, compare=False)

    @property
    def key(self):
        return self.start, self.end, self.entity_id


@dataclass(frozen=True)
class LinkResult:
    doc_id: str
    annotations: tuple = ()

    def to_dict(self):
        return {
            "doc_id": self.doc_id,
            "annotations": [
                {"start": a.start, "end": a.end, "entity_id": a.entity_id} for a in self.annotations
            ],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), ensure_ascii=False)

    @classmethod
    def from_document(cls, document):
        return cls(document.doc_id, tuple(LinkedSpan(a.start, a.end, a.entity_id) for a in document.annotations))


# ============================================
# DISAMBIGUATION
# ============================================

def _ed_candidates(text, span, store, candidate_map, k, n_cand):
    surface = text[span[0]:span[1]]
    candidate_ids = candidates_for(candidate_map, surface, k)
    if not candidate_ids:
        raise NoCandidatesError(f"no candidates for mention {surface!r}")
    if len(candidate_ids) > n_cand:
        logger.debug("Keeping %d of %d candidates for %r", n_cand, len(candidate_ids), surface)
    return [store.get(i) for i in candidate_ids[:n_cand]]


def disambiguate(doc, span, store, candidate_map, reader, k=ED_CANDIDATES,
                 context_budget=CONTEXT_BUDGET, desc_budget=ED_DESCRIPTION_BUDGET):
    """Pick the entity for the mention at ``span`` (None when the decode resolves to nothing)."""
    text = doc.text if isinstance(doc, AnnotatedDocument) else doc
    candidates = _ed_candidates(text, span, store, candidate_map, k, reader.model.config.n_cand)
    if reader.mode is TargetMode.INDEX and len(candidates) == 1:
        return candidates[0].id

    context = mark_mention(text, span, context_budget)
    inputs = [reader.tokenizer.encode(build_ed_input(context, e, desc_budget)) for e in candidates]
    with torch.inference_mode():
        fused = encode_candidates(reader.model, inputs)
        if reader.constrained and reader.mode is TargetMode.TITLE:
            trie = build_trie([e.title for e in candidates], reader.tokenizer)
            ids = constrained_decode(reader.model, fused, trie)
        else:
            ids = greedy_decode(reader.model, fused, reader.max_decode_len)
    return resolve_entity(reader.tokenizer.decode_text(ids), candidates, reader.mode)


def prior_disambiguate(surface, prior_table):
    """PRIOR baseline: the entity most often annotated for this surface form."""
    return prior_table.most_probable(surface)


def build_ed_examples(corpus, store, candidate_map, tokenizer, mode, n_cand, k=ED_CANDIDATES,
                      context_budget=CONTEXT_BUDGET, desc_budget=ED_DESCRIPTION_BUDGET):
    """One reader example per annotation whose gold entity survives the candidate cut."""
    examples = []
    skipped = 0
    for document in corpus:
        for surface, annotation in document.mentions():
            ids = candidates_for(candidate_map, surface, k)[:n_cand]
            if annotation.entity_id not in ids:
                skipped += 1
                continue
            candidates = [store.get(i) for i in ids]
            context = mark_mention(document.text, (annotation.start, annotation.end), context_budget)
            inputs = tuple(tuple(tokenizer.encode(build_ed_input(context, e, desc_budget))) for e in candidates)
            target = ed_target(store.get(annotation.entity_id), candidates, mode)
            examples.append(ReaderExample(inputs, tuple(tokenizer.encode_text(target))))
    logger.info("Built %d disambiguation examples (%d without gold candidate)", len(examples), skipped)
    return examples


# ============================================
# LINKING
# ============================================

def ground_mentions(passage, mention):
    """Passage-local spans of every non-overlapping, token-aligned occurrence of ``mention``."""
    target = tuple(token for token, _, _ in split_tokens(mention))
    if not target:
        return []
    tokens = passage.tokens
    local = passage.local_offsets()
    spans = []
    i = 0
    while i + len(target) <= len(tokens):
        if tuple(tokens[i:i + len(target)]) == target:
            spans.append((local[i][0], local[i + len(target) - 1][1]))
            i += len(target)
        else:
            i += 1
    return spans


def resolve_overlaps(annotations):
    """Keep the longest of overlapping spans; identical spans keep all their entities."""
    unique = {}
    for annotation in annotations:
        unique.setdefault(annotation.key, annotation)
    spans = sorted({(start, end) for start, end, _ in unique},
                   key=lambda span: (-(span[1] - span[0]), span[0]))
    accepted = []
    for start, end in spans:
        if all(end <= other_start or start >= other_end for other_start, other_end in accepted):
            accepted.append((start, end))
    kept = set(accepted)
    return sorted((a for a in unique.values() if (a.start, a.end) in kept), key=lambda a: a.key)


def _window_candidates(passage, store, retrieval, k, n_cand):
    hits = top_k(retrieval.model, store, passage, k, index=retrieval.index)
    return [store.get(entity_id) for entity_id, _ in hits[:n_cand]]


def _read_window(passage, doc_trunc, store, retrieval, reader, k, desc_budget):
    candidates = _window_candidates(passage, store, retrieval, k, reader.model.config.n_cand)
    inputs = [reader.tokenizer.encode(build_el_input(doc_trunc, passage, e, desc_budget)) for e in candidates]
    with torch.inference_mode():
        ids = greedy_decode(reader.model, encode_candidates(reader.model, inputs), reader.max_decode_len)
    decoded = reader.tokenizer.decode_text(ids)
    provenance = Provenance(passage.token_start, decoded)

    spans = []
    for linked in parse_el(decoded):
        entity_id = resolve_entity(linked.title, candidates, TargetMode.TITLE)
        if entity_id is None:
            logger.debug("Window %d of %s: unresolvable title %r in %r",
                         passage.token_start, passage.doc_id, linked.title, decoded)
            continue
        for mention in linked.mentions:
            local = ground_mentions(passage, mention)
            if not local:
                logger.debug("Window %d of %s: mention %r not in passage (decoded %r)",
                             passage.token_start, passage.doc_id, mention, decoded)
            for start, end in local:
                start, end = passage.to_document_span(start, end)
                spans.append(LinkedSpan(start, end, entity_id, provenance))
    return spans


def link_document(doc, store, retrieval, reader, window=20, stride=10, k=EL_CANDIDATES, threads=1,
                  desc_budget=EL_DESCRIPTION_BUDGET):
    """Link every entity mention of ``doc`` (an ``AnnotatedDocument``; gold is ignored)."""
    tokenized = TokenizedText.from_text(doc.text)
    if not len(tokenized):
        return LinkResult(doc.doc_id)
    doc_trunc = document_topic(tokenized, DOC_BUDGET)
    passages = chunk_passages(tokenized, window, stride, doc.doc_id, detokenize(doc_trunc))
    per_window = ordered_map(
        lambda passage: _read_window(passage, doc_trunc, store, retrieval, reader, k, desc_budget),
        passages, threads,
    )
    merged = [span for spans in per_window for span in spans]
    return LinkResult(doc.doc_id, tuple(resolve_overlaps(merged)))


def link_corpus(documents, store, retrieval, reader, window=20, stride=10, k=EL_CANDIDATES, threads=1):
    return [link_document(d, store, retrieval, reader, window, stride, k, threads) for d in documents]


def _el_target(passage, document, store):
    end = passage.offsets[-1][1]
    grouped = {}
    for annotation in document.annotations:
        if annotation.start < passage.char_offset or annotation.end > end:
            continue
        mention = detokenize([t for t, _, _ in split_tokens(document.surface(annotation))])
        if "," in mention:
            logger.debug("Skipping mention %r: contains the mention delimiter", mention)
            continue
        mentions = grouped.setdefault(annotation.entity_id, [])
        if mention not in mentions:
            mentions.append(mention)
    return [LinkedEntity(store.get(entity_id).title, tuple(mentions))
            for entity_id, mentions in grouped.items() if entity_id in store and mentions]


def build_el_examples(corpus, store, retrieval, tokenizer, n_cand, window=20, stride=10, k=EL_CANDIDATES,
                      desc_budget=EL_DESCRIPTION_BUDGET):
    """One reader example per window; gold entities missing from retrieval replace the tail."""
    examples = []
    for document in corpus:
        tokenized = TokenizedText.from_text(document.text)
        if not len(tokenized):
            continue
        doc_trunc = document_topic(tokenized, DOC_BUDGET)
        for passage in chunk_passages(tokenized, window, stride, document.doc_id, detokenize(doc_trunc)):
            linked = _el_target(passage, document, store)
            candidates = _window_candidates(passage, store, retrieval, k, n_cand)
            missing = [store.by_title(e.title) for e in linked if store.by_title(e.title) not in candidates]
            if missing:
                gold_ids = {store.by_title(e.title).id for e in linked}
                keep = n_cand - len(missing)
                kept = [c for c in candidates if c.id in gold_ids]
                kept += [c for c in candidates if c.id not in gold_ids][:max(keep - len(kept), 0)]
                order = {c.id: i for i, c in enumerate(candidates)}
                candidates = (sorted(kept, key=lambda c: order[c.id]) + missing)[:n_cand]
            inputs = tuple(
                tuple(tokenizer.encode(build_el_input(doc_trunc, passage, e, desc_budget))) for e in candidates
            )
            target = tokenizer.encode_text(serialize_el(linked))
            examples.append(ReaderExample(inputs, tuple(target)))
    logger.info("Built %d linking examples", len(examples))
    return examples
