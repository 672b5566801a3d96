from linking.retriever import RetrieverModel, VectorIndex

from ._base import LinkingCommand


class Command(LinkingCommand):
    help = 'Encodes every KB entity with the trained retriever and writes the embedding index'
    config_fields = ("kb", "checkpoint")

    def run(self, config, rng):
        store = self.load_store(config)
        tokenizer = self.load_tokenizer(config)
        directory = self.require_dir(self.checkpoint_path(config, "retriever"), "run train_retriever first")
        model = RetrieverModel.load(directory, tokenizer)
        index = VectorIndex.build(model, store)
        index.save(self.checkpoint_path(config, "index"))
        self.stdout.write(self.style.SUCCESS(f'Indexed {len(index)} entities (dim={index.dim})'))
