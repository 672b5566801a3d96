"""Shared plumbing for the toolkit's management commands."""
import logging
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError
from dotenv import dotenv_values

from linking import models
from linking.checkpoints import load_config
from linking.exceptions import LinkingError
from linking.forms import RunConfigForm
from linking.fusion_model import FusionModel
from linking.kb import CandidateMap, EntityStore, ingest_candidates, ingest_corpus, ingest_entities
from linking.linker import Reader, Retrieval
from linking.output_grammar import TargetMode
from linking.retriever import RetrieverModel, VectorIndex
from linking.runtime import seed_everything
from linking.text import Tokenizer, build_vocab

logger = logging.getLogger(__name__)

VOCAB_FILE = "vocab.txt"
FLAG_NAMES = {"input": "--in"}


class LinkingCommand(BaseCommand):
    """A command whose flags are a subset of ``RunConfigForm`` fields.

    Values come from form defaults, then ``settings.LINKING``, then ``--config``,
    then flags. Invalid configuration exits with code 1, toolkit errors with 2.
    """
    config_fields = ()
    required = ()
    defaults = {}

    def add_arguments(self, parser):
        fields = RunConfigForm.base_fields
        merged = {**RunConfigForm.defaults(), **self.defaults}
        parser.add_argument("--config", help="key=value run config file (default: none)")
        for name in dict.fromkeys(self.config_fields + ("seed", "threads")):
            field = fields[name]
            flag = FLAG_NAMES.get(name, "--" + name.replace("_", "-"))
            help_text = f"{field.help_text} (default: {merged[name]})"
            if name == "constrained":
                parser.add_argument(flag, dest=name, action="store_true", default=None, help=help_text)
            else:
                parser.add_argument(flag, dest=name, default=None, help=help_text)

    def load_config(self, options):
        data = {**RunConfigForm.defaults(), **self.defaults}
        data.update(seed=settings.LINKING["SEED"], threads=settings.LINKING["THREADS"],
                    checkpoint=settings.LINKING["CHECKPOINT_DIR"])
        if options.get("config"):
            path = Path(options["config"])
            if not path.exists():
                raise CommandError(f"config file {path} does not exist", returncode=1)
            for key, value in dotenv_values(path).items():
                name = key.strip().lower().replace("-", "_")
                if name not in RunConfigForm.base_fields:
                    raise CommandError(f"{path}: unknown config key {key!r}", returncode=1)
                data[name] = value
        for name in RunConfigForm.base_fields:
            if options.get(name) is not None:
                data[name] = options[name]

        form = RunConfigForm(data)
        if not form.is_valid():
            problems = "; ".join(f"{field}: {' '.join(errors)}" for field, errors in form.errors.items())
            raise CommandError(f"invalid configuration: {problems}", returncode=1)
        config = form.to_config()
        missing = [name for name in self.required if not getattr(config, name)]
        if missing:
            flags = ", ".join(FLAG_NAMES.get(n, "--" + n.replace("_", "-")) for n in missing)
            raise CommandError(f"missing required setting(s): {flags}", returncode=1)
        return config

    def handle(self, *args, **options):
        config = self.load_config(options)
        rng = seed_everything(config.seed)
        try:
            self.run(config, rng)
        except LinkingError as exc:
            raise CommandError(f"{type(exc).__name__}: {exc}", returncode=2) from exc

    def run(self, config, rng):
        raise NotImplementedError

    # ============================================
    # LOADERS
    # ============================================

    def load_store(self, config):
        if config.kb:
            with open(config.kb, encoding="utf-8") as handle:
                return ingest_entities(handle, path=config.kb)
        store = EntityStore.from_queryset(models.Entity.objects.all())
        if not len(store):
            raise CommandError("no knowledge base: pass --kb or run ingest first", returncode=1)
        return store

    def load_candidates(self, config, store):
        if config.candidates:
            with open(config.candidates, encoding="utf-8") as handle:
                return ingest_candidates(handle, store, path=config.candidates)
        return CandidateMap.from_queryset(models.CandidateEntry.objects.all())

    def load_corpus(self, path, require_text=True):
        with open(path, encoding="utf-8") as handle:
            return ingest_corpus(handle, path=path, require_text=require_text)

    def checkpoint_path(self, config, *parts):
        return Path(config.checkpoint).joinpath(*parts)

    def load_tokenizer(self, config, store=None, corpus=None):
        """Vocabulary from the checkpoint directory, built and saved there when absent."""
        path = self.checkpoint_path(config, VOCAB_FILE)
        if path.exists():
            return Tokenizer.load(path)
        if store is None:
            raise CommandError(f"{path} not found: run ingest or a training command first", returncode=1)
        tokenizer = build_vocab(vocabulary_texts(store, corpus), config.min_count,
                                reserved=[str(i) for i in range(config.n_cand)])
        path.parent.mkdir(parents=True, exist_ok=True)
        tokenizer.save(path)
        return tokenizer

    def require_dir(self, path, hint):
        if not Path(path).is_dir():
            raise CommandError(f"{path} not found: {hint}", returncode=1)
        return path

    def load_reader(self, config, tokenizer, task):
        """Reader for ``task``; the target mode is the one it was trained with."""
        directory = self.require_dir(self.checkpoint_path(config, f"reader-{task}"),
                                     f"run train_reader --task {task} first")
        model = FusionModel.load(directory)
        mode = TargetMode(load_config(directory).get("mode", TargetMode.TITLE.value))
        return Reader(model, tokenizer, mode, max_decode_len=model.config.max_target_len,
                      constrained=bool(config.constrained))

    def load_retrieval(self, config, tokenizer, store):
        directory = self.require_dir(self.checkpoint_path(config, "retriever"), "run train_retriever first")
        model = RetrieverModel.load(directory, tokenizer)
        index_dir = self.checkpoint_path(config, "index")
        if (index_dir / "index.bin").exists():
            index = VectorIndex.load(index_dir)
            if set(index.ids) == set(store.ids()):
                return Retrieval(model, index)
            logger.warning("Index at %s does not match the KB; re-encoding entities", index_dir)
        return Retrieval(model, VectorIndex.build(model, store))


def vocabulary_texts(store, corpus=None):
    for entity in store:
        yield entity.title
        yield entity.description
    for document in corpus or ():
        yield document.text
