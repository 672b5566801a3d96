from django.db import transaction

from linking import models
from linking.kb import cl_recall

from ._base import LinkingCommand


class Command(LinkingCommand):
    help = 'Validates the KB, candidate lists and corpus, stores the KB and builds the vocabulary'
    config_fields = ("kb", "candidates", "corpus", "checkpoint", "ed_k", "n_cand", "min_count")
    required = ("kb",)

    def run(self, config, rng):
        store = self.load_store(config)
        candidate_map = self.load_candidates(config, store) if config.candidates else None
        corpus = self.load_corpus(config.corpus) if config.corpus else None

        with transaction.atomic():
            models.CandidateEntry.objects.all().delete()
            models.Entity.objects.all().delete()
            models.Entity.objects.bulk_create(
                models.Entity(entity_id=e.id, title=e.title, description=e.description) for e in store
            )
            by_id = {row.entity_id: row for row in models.Entity.objects.all()}
            if candidate_map is not None:
                models.CandidateEntry.objects.bulk_create(
                    models.CandidateEntry(mention=mention, entity=by_id[entity_id], rank=rank)
                    for mention, ids in candidate_map.items()
                    for rank, entity_id in enumerate(ids)
                )

        self.stdout.write(f'Stored {len(store)} entities')
        if candidate_map is not None:
            self.stdout.write(f'Stored candidate lists for {len(candidate_map)} surface forms')
        if corpus is not None:
            tokenizer = self.load_tokenizer(config, store, corpus)
            self.stdout.write(f'Vocabulary: {len(tokenizer)} tokens')
            if candidate_map is not None and any(d.annotations for d in corpus):
                recall = cl_recall(corpus, candidate_map, config.ed_k)
                self.stdout.write(f'CL-RECALL@{config.ed_k}: {recall:.4f}')
        self.stdout.write(self.style.SUCCESS('Ingest complete'))
