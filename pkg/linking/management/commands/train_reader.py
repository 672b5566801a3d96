from linking.evaluation import EdPrediction, ed_accuracy, micro_prf
from linking.exceptions import NoCandidatesError
from linking.fusion_model import FusionModel, ModelConfig, train
from linking.linker import (
    LinkResult,
    Reader,
    build_ed_examples,
    build_el_examples,
    disambiguate,
    link_corpus,
)
from linking.output_grammar import TargetMode
from linking.training import TrainConfig, write_loss_curve

from ._base import LinkingCommand

EVAL_SAMPLE = 200


class Command(LinkingCommand):
    help = 'Trains the fusion reader for disambiguation (--task ed) or linking (--task el)'
    config_fields = ("kb", "candidates", "corpus", "checkpoint", "task", "mode", "d_model", "layers", "heads",
                     "ff_width", "n_cand", "max_target_len", "window", "stride", "k", "ed_k", "lr", "steps",
                     "warmup", "batch_size", "eval_every", "min_count")
    required = ("corpus",)

    def run(self, config, rng):
        store = self.load_store(config)
        corpus = self.load_corpus(config.corpus)
        tokenizer = self.load_tokenizer(config, store, corpus)
        mode = config.mode if config.task == "ed" else TargetMode.TITLE

        model = FusionModel(ModelConfig(
            vocab_size=len(tokenizer), d_model=config.d_model, encoder_layers=config.layers,
            decoder_layers=config.layers, heads=config.heads, ff_width=config.ff_width,
            n_cand=config.n_cand, max_target_len=config.max_target_len,
        ), tokenizer.bos_id, tokenizer.eos_id)
        reader = Reader(model, tokenizer, mode, max_decode_len=config.max_target_len)

        if config.task == "ed":
            candidate_map = self.load_candidates(config, store)
            examples = build_ed_examples(corpus, store, candidate_map, tokenizer, mode, config.n_cand, config.ed_k)
            mentions = [(d, a) for d in corpus for a in d.annotations]
            picks = rng.choice(len(mentions), size=min(EVAL_SAMPLE, len(mentions)), replace=False)
            sample = [mentions[i] for i in sorted(picks)]

            def evaluate():
                predictions = []
                for document, annotation in sample:
                    try:
                        predicted = disambiguate(document, (annotation.start, annotation.end), store,
                                                 candidate_map, reader, config.ed_k)
                    except NoCandidatesError:
                        predicted = None
                    predictions.append(EdPrediction(document.surface(annotation), annotation.entity_id, predicted))
                return ed_accuracy(predictions)
        else:
            retrieval = self.load_retrieval(config, tokenizer, store)
            examples = build_el_examples(corpus, store, retrieval, tokenizer, config.n_cand, config.window,
                                         config.stride, config.k)
            gold = [LinkResult.from_document(d) for d in corpus]

            def evaluate():
                predicted = link_corpus(corpus, store, retrieval, reader, config.window, config.stride, config.k)
                return micro_prf(predicted, gold, store).f1

        train_config = TrainConfig(lr=config.lr, warmup=config.warmup, steps=config.steps,
                                   batch_size=config.batch_size, eval_every=config.eval_every)
        result = train(model, examples, train_config, rng, evaluate=evaluate if examples else None)

        name = f"reader-{config.task}"
        model.save(self.checkpoint_path(config, name), mode=mode.value, task=config.task)
        write_loss_curve(result.curve, self.checkpoint_path(config, f"{name}_loss.csv"))
        if result.best_score is not None:
            self.stdout.write(f'best score {result.best_score:.4f} at step {result.best_step}')
        self.stdout.write(self.style.SUCCESS(f'Reader ({config.task}) trained on {len(examples)} examples'))
