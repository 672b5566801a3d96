from linking.retriever import (
    RetrieverConfig,
    RetrieverModel,
    VectorIndex,
    build_retrieval_examples,
    recall_at_k,
    train_retriever,
)
from linking.training import TrainConfig, write_loss_curve

from ._base import LinkingCommand


class Command(LinkingCommand):
    help = 'Trains the bi-encoder retriever with NCE and mined negatives, then rebuilds the index'
    config_fields = ("kb", "corpus", "checkpoint", "d_model", "layers", "heads", "ff_width", "window", "stride",
                     "k", "lr", "steps", "warmup", "batch_size", "eval_every", "negatives", "hard_fraction",
                     "min_count", "n_cand")
    required = ("corpus",)

    def run(self, config, rng):
        store = self.load_store(config)
        corpus = self.load_corpus(config.corpus)
        tokenizer = self.load_tokenizer(config, store, corpus)
        examples = build_retrieval_examples(corpus, config.window, config.stride)

        model = RetrieverModel(RetrieverConfig(
            vocab_size=len(tokenizer), d_model=config.d_model, layers=config.layers,
            heads=config.heads, ff_width=config.ff_width,
        ), tokenizer)

        def evaluate():
            return recall_at_k(model, examples, store, config.k, index=VectorIndex.build(model, store))

        train_config = TrainConfig(lr=config.lr, warmup=config.warmup, steps=config.steps,
                                   batch_size=config.batch_size, eval_every=config.eval_every)
        result = train_retriever(model, store, examples, train_config, rng, config.negatives,
                                 config.hard_fraction, evaluate=evaluate if examples else None)

        model.save(self.checkpoint_path(config, "retriever"))
        write_loss_curve(result.curve, self.checkpoint_path(config, "retriever_loss.csv"))
        index = VectorIndex.build(model, store)
        index.save(self.checkpoint_path(config, "index"))
        if examples:
            recall = recall_at_k(model, examples, store, config.k, index=index)
            self.stdout.write(f'recall@{config.k}: {recall:.4f}')
        self.stdout.write(self.style.SUCCESS(f'Retriever trained for {config.steps} steps'))
