"""Seeded fixture generators: the Charlton example, random knowledge bases and toy corpora."""
import numpy as np

from .kb import AnnotatedDocument, Annotation, CandidateMap, Entity, EntityStore
from .text import TokenizedText, chunk_passages

CHARLTON_ENTITIES = (
    Entity("charlton_athletic", "Charlton Athletic F.C.",
           "English professional football club based in Charlton , south-east London"),
    Entity("jack_charlton", "Jack Charlton",
           "English footballer who later managed the Republic of Ireland national team"),
    Entity("bobby_charlton", "Bobby Charlton",
           "English footballer who played for Manchester United and England"),
    Entity("suzanne_charlton", "Suzanne Charlton", "British television weather presenter"),
)

DUBLIN_TEXT = (
    "DUBLIN 1996-12-07 Jack Charlton's relationship with the people of Ireland was cemented on "
    "Saturday when the Englishman was officially declared one of their own . That is why this is "
    "so emotional a night for me , Charlton said ."
)

DUBLIN_QUOTE = "That is why this is so emotional a night for me , Charlton said ."

FILLER = (
    "the", "a", "of", "and", "in", "on", "was", "with", "for", "that", "from", "by", "at", "after",
    "when", "said", "told", "match", "city", "season", "team", "report", "people", "week", "new",
    "game", "first", "last", "home", "left", "won", "lost", "again", "today", "local", "news",
)


def charlton_store():
    return EntityStore(CHARLTON_ENTITIES)


def charlton_candidates():
    return CandidateMap({"Charlton": [e.id for e in CHARLTON_ENTITIES]})


def charlton_span(text=DUBLIN_TEXT):
    """Span of the marked mention: the last "Charlton" of the text."""
    start = text.rindex("Charlton")
    return start, start + len("Charlton")


def charlton_document():
    start, end = charlton_span()
    return AnnotatedDocument("dublin", DUBLIN_TEXT, (Annotation(start, end, "jack_charlton"),))


def dublin_quote():
    return chunk_passages(TokenizedText.from_text(DUBLIN_QUOTE), window=20, stride=10,
                          doc_id="dublin-quote", topic=DUBLIN_TEXT.split(" . ")[0])[0]


def _words(rng, n):
    return [FILLER[i] for i in rng.integers(len(FILLER), size=n)]


def random_store(n=1000, seed=0, description_len=12):
    """``n`` entities with unique titles and random filler descriptions."""
    rng = np.random.default_rng(seed)
    return EntityStore(
        Entity(f"E{i:04d}", f"{' '.join(_words(rng, 2))} {i}", " ".join(_words(rng, description_len)))
        for i in range(n)
    )


def random_passages(n=100, seed=0, length=20):
    rng = np.random.default_rng(seed)
    return [
        chunk_passages(TokenizedText.from_text(" ".join(_words(rng, length))), window=length, stride=length,
                       doc_id=f"p{i}")[0]
        for i in range(n)
    ]


def linking_corpus(n_docs=20, n_entities=200, mentions_per_doc=3, seed=0):
    """Documents mentioning entities by easy, single-token unique titles.

    Returns ``(store, candidate_map, corpus)``; every title is its own surface
    form and its candidate list holds the gold entity plus three others.
    """
    rng = np.random.default_rng(seed)
    entities = [
        Entity(f"E{i:03d}", f"Name{i:03d}", f"Name{i:03d} {' '.join(_words(rng, 6))}")
        for i in range(n_entities)
    ]
    store = EntityStore(entities)

    lists = {}
    for i, entity in enumerate(entities):
        others = [j for j in rng.permutation(n_entities)[:4] if j != i][:3]
        lists[entity.title] = [entity.id] + [entities[j].id for j in others]

    corpus = []
    for d in range(n_docs):
        picks = rng.choice(n_entities, size=mentions_per_doc, replace=False)
        text = ""
        annotations = []
        for j in picks:
            text += " ".join(_words(rng, int(rng.integers(3, 7)))) + " "
            start = len(text)
            text += entities[j].title
            annotations.append(Annotation(start, len(text), entities[j].id))
            text += " "
        text += " ".join(_words(rng, 3)) + " ."
        corpus.append(AnnotatedDocument(f"doc{d:02d}", text, tuple(annotations)))
    return store, CandidateMap(lists), corpus


SURFACES = ("Alder", "Birch", "Cedar", "Elm", "Hazel", "Maple", "Oak", "Rowan", "Willow", "Yew")
KINDS = (
    ("River", ("water", "bank", "flood", "bridge")),
    ("Club", ("goal", "match", "league", "coach")),
    ("Town", ("mayor", "council", "street", "market")),
    ("Band", ("album", "song", "tour", "guitar")),
)


def ed_fixture(n_examples=50, seed=0):
    """Ambiguous one-word mentions whose context names the kind of entity meant.

    Returns ``(store, candidate_map, corpus)`` with one annotation per document;
    every surface form has four candidates, one per kind.
    """
    rng = np.random.default_rng(seed)
    entities = []
    lists = {}
    for s, surface in enumerate(SURFACES):
        lists[surface] = []
        for kind, cues in KINDS:
            entity = Entity(f"S{s}{kind[0]}", f"{surface} {kind}", f"{kind.lower()} known as {surface} , {' '.join(cues)}")
            entities.append(entity)
            lists[surface].append(entity.id)

    corpus = []
    for i in range(n_examples):
        surface = SURFACES[int(rng.integers(len(SURFACES)))]
        k = int(rng.integers(len(KINDS)))
        kind, cues = KINDS[k]
        left = " ".join(_words(rng, 4) + [cues[int(rng.integers(len(cues)))]])
        right = " ".join([cues[int(rng.integers(len(cues)))]] + _words(rng, 3))
        text = f"{left} {surface} {right} ."
        start = len(left) + 1
        annotation = Annotation(start, start + len(surface), f"S{SURFACES.index(surface)}{kind[0]}")
        corpus.append(AnnotatedDocument(f"ed{i:02d}", text, (annotation,)))
    return EntityStore(entities), CandidateMap(lists), corpus


def cl_recall_fixture():
    """Ten mentions with six-entry candidate lists; seven golds sit in the top 4.

    Gold positions are 0, 1, 2, 3, 0, 1, 2 for mentions m0..m6, 4 and 5 for m7
    and m8, and m9's gold is missing from its list.
    """
    entities = [Entity(f"C{i:02d}", f"Cand {i}") for i in range(16)]
    gold_positions = (0, 1, 2, 3, 0, 1, 2, 4, 5, None)
    lists = {}
    annotations = []
    text = ""
    for m, position in enumerate(gold_positions):
        gold = entities[m].id
        fillers = [e.id for e in entities[10:16]]
        if position is None:
            ids = fillers
        else:
            ids = fillers[:position] + [gold] + fillers[position:5]
        surface = f"m{m}"
        lists[surface] = ids
        if text:
            text += " "
        annotations.append(Annotation(len(text), len(text) + len(surface), gold))
        text += surface
    document = AnnotatedDocument("recall", text, tuple(annotations))
    return EntityStore(entities), CandidateMap(lists), [document]
