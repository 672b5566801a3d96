"""Bi-encoder entity retrieval: encoders, dot-product scoring, NCE training, top-k search."""
import logging
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from . import checkpoints
from .exceptions import (
    DimensionMismatchError,
    EmptyDatasetError,
    EmptyPositivesError,
    EmptyStoreError,
    InsufficientEntitiesError,
    UnknownTokenOverflowError,
)
from .layers import EncoderStack, init_fan_in_uniform
from .runtime import ordered_map
from .text import (
    UNK,
    TokenizedText,
    build_retrieval_entity_text,
    build_retrieval_passage_text,
    chunk_passages,
    detokenize,
    document_topic,
)
from .training import fit

logger = logging.getLogger(__name__)

DEFAULT_NEGATIVES = 32
SCORE_CHUNK_ROWS = 1024


@dataclass(frozen=True)
class RetrieverConfig:
    vocab_size: int
    d_model: int = 64
    layers: int = 2
    heads: int = 2
    ff_width: int = 128
    max_len: int = 512

    def __post_init__(self):
        for name, value in asdict(self).items():
            if value <= 0:
                raise ValueError(f"{name} must be positive, got {value}")
        if self.d_model % self.heads:
            raise ValueError("d_model must be divisible by heads")


class TextEncoder(nn.Module):
    """Token embeddings + transformer encoder, mean-pooled over non-padding positions."""

    def __init__(self, config):
        super().__init__()
        self.embedding = nn.Embedding(config.vocab_size, config.d_model)
        self.stack = EncoderStack(config.d_model, config.heads, config.ff_width, config.layers, config.max_len)

    def forward(self, ids, padding_mask):
        states = self.stack(self.embedding(ids), padding_mask)
        keep = (~padding_mask).unsqueeze(-1).to(states.dtype)
        return (states * keep).sum(dim=-2) / keep.sum(dim=-2)


class RetrieverModel(nn.Module):
    """Entity-side and passage-side encoders sharing one tokenizer."""

    def __init__(self, config, tokenizer):
        super().__init__()
        if UNK not in tokenizer:
            raise UnknownTokenOverflowError("vocabulary has no <unk> token")
        self.config = config
        self.tokenizer = tokenizer
        self.entity_encoder = TextEncoder(config)
        self.passage_encoder = TextEncoder(config)
        init_fan_in_uniform(self)
        self.double()
        self.eval()

    @property
    def dim(self):
        return self.config.d_model

    def _batch(self, sequences):
        ids = [self.tokenizer.encode(tokens)[:self.config.max_len] for tokens in sequences]
        if any(i >= self.config.vocab_size for seq in ids for i in seq):
            raise UnknownTokenOverflowError("token id outside the model vocabulary")
        width = max(len(seq) for seq in ids)
        batch = torch.full((len(ids), width), self.tokenizer.pad_id, dtype=torch.long)
        padding = torch.ones((len(ids), width), dtype=torch.bool)
        for row, seq in enumerate(ids):
            batch[row, :len(seq)] = torch.tensor(seq, dtype=torch.long)
            padding[row, :len(seq)] = False
        return batch, padding

    def embed_entities(self, entities):
        return self.entity_encoder(*self._batch([build_retrieval_entity_text(e) for e in entities]))

    def embed_passages(self, passages):
        return self.passage_encoder(*self._batch([build_retrieval_passage_text(p) for p in passages]))

    def to_config(self):
        return {"kind": "retriever", **asdict(self.config)}

    def save(self, directory):
        checkpoints.save_checkpoint(self, self.to_config(), directory)
        self.tokenizer.save(Path(directory) / "vocab.txt")

    @classmethod
    def load(cls, directory, tokenizer):
        raw = checkpoints.load_config(directory)
        model = cls(RetrieverConfig(**{name: raw[name] for name in RetrieverConfig.__dataclass_fields__}), tokenizer)
        return checkpoints.load_state(model, directory)


def encode_entity(model, entity):
    with torch.inference_mode():
        return model.embed_entities([entity])[0].numpy().copy()


def encode_passage(model, passage):
    with torch.inference_mode():
        return model.embed_passages([passage])[0].numpy().copy()


def score(e_emb, p_emb):
    """s(e, p): plain dot product."""
    e_emb = np.asarray(e_emb, dtype=np.float64)
    p_emb = np.asarray(p_emb, dtype=np.float64)
    if e_emb.shape != p_emb.shape:
        raise DimensionMismatchError(f"cannot score {e_emb.shape} against {p_emb.shape}")
    return float(np.dot(e_emb, p_emb))


def _ranked(ids, scores, k):
    return sorted(zip(ids, scores), key=lambda pair: (-pair[1], pair[0]))[:k]


def brute_force_top_k(entity_embeddings, query, k):
    """Reference search: score every entity one by one, sort by score then id."""
    if not entity_embeddings:
        raise EmptyStoreError("no entities to search")
    ids = list(entity_embeddings)
    return _ranked(ids, [score(entity_embeddings[i], query) for i in ids], k)


class VectorIndex:
    """Entity embedding matrix keyed by entity id, searched with exact inner products."""

    def __init__(self, ids, matrix):
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] != len(ids):
            raise ValueError("index needs one embedding row per entity id")
        self.ids = list(ids)
        self.matrix = matrix
        order = sorted(range(len(self.ids)), key=self.ids.__getitem__)
        self._id_rank = np.empty(len(self.ids), dtype=np.int64)
        self._id_rank[order] = np.arange(len(self.ids))

    def __len__(self):
        return len(self.ids)

    @property
    def dim(self):
        return self.matrix.shape[1]

    @classmethod
    def build(cls, model, store, batch_size=64):
        entities = list(store)
        if not entities:
            raise EmptyStoreError("cannot index an empty store")
        rows = []
        with torch.inference_mode():
            for start in range(0, len(entities), batch_size):
                rows.append(model.embed_entities(entities[start:start + batch_size]).numpy())
        logger.debug("Indexed %d entities (dim=%d)", len(entities), model.dim)
        return cls([e.id for e in entities], np.concatenate(rows))

    def embeddings(self):
        return {entity_id: self.matrix[row] for row, entity_id in enumerate(self.ids)}

    def scores(self, query, threads=1):
        query = np.asarray(query, dtype=np.float64)
        if query.shape != (self.dim,):
            raise DimensionMismatchError(f"query shape {query.shape} does not match index dim {self.dim}")
        # fixed chunking keeps results independent of the thread count
        chunks = [self.matrix[s:s + SCORE_CHUNK_ROWS] for s in range(0, len(self.ids), SCORE_CHUNK_ROWS)]
        return np.concatenate(ordered_map(lambda chunk: chunk @ query, chunks, threads))

    def search(self, query, k, threads=1):
        if not self.ids:
            raise EmptyStoreError("index is empty")
        if k < 1:
            raise ValueError("k must be at least 1")
        scores = self.scores(query, threads)
        k = min(k, len(self.ids))
        kth = np.partition(-scores, k - 1)[k - 1]
        pool = np.nonzero(-scores <= kth)[0]
        ordered = pool[np.lexsort((self._id_rank[pool], -scores[pool]))][:k]
        return [(self.ids[i], float(scores[i])) for i in ordered]

    def save(self, directory):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        checkpoints.write_matrix(directory / "index.bin", self.matrix)
        with open(directory / "index_ids.txt", "w", encoding="utf-8") as handle:
            handle.writelines(entity_id + "\n" for entity_id in self.ids)

    @classmethod
    def load(cls, directory):
        directory = Path(directory)
        matrix, _ = checkpoints.read_matrix(directory / "index.bin")
        with open(directory / "index_ids.txt", encoding="utf-8") as handle:
            ids = [line.rstrip("\n") for line in handle]
        return cls(ids, matrix)


def top_k(model, store, passage, k=100, index=None, threads=1):
    """Highest-scoring entities for ``passage``, descending score, ties by id.

    Without an index every store entity is encoded and scored one by one.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if len(store) == 0:
        raise EmptyStoreError("entity store is empty")
    query = encode_passage(model, passage)
    if index is not None:
        return index.search(query, k, threads)
    return brute_force_top_k({e.id: encode_entity(model, e) for e in store}, query, k)


# ============================================
# TRAINING
# ============================================

@dataclass(frozen=True)
class RetrievalExample:
    passage: object
    gold: frozenset


def nce_from_scores(positive_scores, negative_scores):
    """Mean over positives of -log(exp s+ / (exp s+ + sum exp s-)).

    Other positives never enter a positive's denominator.
    """
    if positive_scores.numel() == 0:
        raise EmptyPositivesError("NCE needs at least one positive")
    negatives = negative_scores.reshape(1, -1).expand(positive_scores.numel(), -1)
    logits = torch.cat([positive_scores.reshape(-1, 1), negatives], dim=1)
    return (torch.logsumexp(logits, dim=1) - positive_scores.reshape(-1)).mean()


def nce_loss(model, passage, positives, negatives):
    """NCE loss (a differentiable scalar tensor) for one passage."""
    positives = list(positives)
    negatives = list(negatives)
    if not positives:
        raise EmptyPositivesError("NCE needs at least one positive")
    query = model.embed_passages([passage])[0]
    entity_states = model.embed_entities(positives + negatives)
    scores = entity_states @ query
    return nce_from_scores(scores[:len(positives)], scores[len(positives):])


def _hard_count(n, hard_fraction):
    return math.ceil(round(hard_fraction * n, 9))


def mine_negatives(model, store, passage, gold, n, hard_fraction=0.1, rng=None, index=None):
    """``ceil(hard_fraction * n)`` top-scoring non-gold entities, the rest uniform."""
    gold = set(gold)
    pool = [e for e in store if e.id not in gold]
    if n > len(pool):
        raise InsufficientEntitiesError(f"need {n} negatives, only {len(pool)} non-gold entities")
    rng = rng if rng is not None else np.random.default_rng(0)
    hard_n = min(_hard_count(n, hard_fraction), n)

    hard = []
    if hard_n:
        ranked = top_k(model, store, passage, k=len(store), index=index)
        hard = [entity_id for entity_id, _ in ranked if entity_id not in gold][:hard_n]
    taken = set(hard)
    remaining = [e.id for e in pool if e.id not in taken]
    picks = rng.choice(len(remaining), size=n - hard_n, replace=False) if n - hard_n else []
    return [store.get(i) for i in hard] + [store.get(remaining[i]) for i in picks]


def recall_at_k(model, dataset, store, k, index=None, threads=1):
    """Share of gold entities (pooled over passages) found in each passage's top-k."""
    total = hits = 0
    for example in dataset:
        found = {entity_id for entity_id, _ in top_k(model, store, example.passage, k, index, threads)}
        total += len(example.gold)
        hits += len(example.gold & found)
    if total == 0:
        raise EmptyDatasetError("no gold entities to score")
    return hits / total


def build_retrieval_examples(corpus, window=20, stride=10, topic_budget=20):
    """One example per passage window holding at least one gold annotation."""
    examples = []
    for document in corpus:
        tokenized = TokenizedText.from_text(document.text)
        if not len(tokenized):
            continue
        topic = detokenize(document_topic(tokenized, topic_budget))
        for passage in chunk_passages(tokenized, window, stride, document.doc_id, topic):
            end = passage.offsets[-1][1]
            gold = frozenset(
                a.entity_id for a in document.annotations
                if a.start >= passage.char_offset and a.end <= end
            )
            if gold:
                examples.append(RetrievalExample(passage, gold))
    return examples


def train_retriever(model, store, examples, config, rng, negatives=DEFAULT_NEGATIVES, hard_fraction=0.1,
                    evaluate=None):
    """NCE with mined negatives; negatives are re-mined for every example visit."""
    def loss_fn(example):
        gold = example.gold & set(store.ids())
        available = len(store) - len(gold)
        with torch.inference_mode():
            index = VectorIndex.build(model, store) if hard_fraction > 0 else None
            mined = mine_negatives(model, store, example.passage, gold, min(negatives, available),
                                   hard_fraction, rng, index)
        return nce_loss(model, example.passage, [store.get(i) for i in sorted(gold)], mined)

    examples = [ex for ex in examples if ex.gold & set(store.ids())]
    logger.info("Training retriever on %d passages", len(examples))
    return fit(model, examples, loss_fn, config, rng, evaluate)
