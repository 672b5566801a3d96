from pathlib import Path

from linking.linker import link_corpus

from ._base import LinkingCommand


class Command(LinkingCommand):
    help = 'Finds and links entity mentions in every document of --in, writing LinkResult JSONL to --out'
    config_fields = ("kb", "input", "out", "checkpoint", "window", "stride", "k")
    required = ("input", "out")

    def run(self, config, rng):
        store = self.load_store(config)
        tokenizer = self.load_tokenizer(config)
        retrieval = self.load_retrieval(config, tokenizer, store)
        reader = self.load_reader(config, tokenizer, "el")
        documents = self.load_corpus(config.input)

        results = link_corpus(documents, store, retrieval, reader, config.window, config.stride, config.k,
                              config.threads)

        out = Path(config.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", encoding="utf-8") as handle:
            for result in results:
                handle.write(result.to_json() + "\n")
        total = sum(len(r.annotations) for r in results)
        self.stdout.write(self.style.SUCCESS(f'Linked {total} mentions in {len(results)} documents -> {out}'))
