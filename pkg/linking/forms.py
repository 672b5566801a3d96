from pathlib import Path
from types import SimpleNamespace

from django import forms

from .output_grammar import TargetMode


class RunConfig(SimpleNamespace):
    """Validated run settings: paths plus hyperparameters, one attribute per form field."""


def _existing_path(value):
    if value and not Path(value).exists():
        raise forms.ValidationError(f"{value} does not exist")
    return value or None


# Run config form: every field is also a command flag and a config-file key
class RunConfigForm(forms.Form):
    # paths
    kb = forms.CharField(required=False, help_text="entities JSONL file (falls back to the ingested KB)")
    candidates = forms.CharField(required=False, help_text="candidate lists JSONL file")
    corpus = forms.CharField(required=False, help_text="annotated corpus JSONL file")
    checkpoint = forms.CharField(required=False, help_text="checkpoint directory")
    input = forms.CharField(required=False, help_text="documents JSONL to process")
    out = forms.CharField(required=False, help_text="output file")
    pred = forms.CharField(required=False, help_text="predicted annotations JSONL")
    gold = forms.CharField(required=False, help_text="gold annotations JSONL")

    # model shape
    d_model = forms.IntegerField(min_value=1, initial=64, help_text="hidden size")
    layers = forms.IntegerField(min_value=1, initial=2, help_text="layers per encoder/decoder stack")
    heads = forms.IntegerField(min_value=1, initial=2, help_text="attention heads")
    ff_width = forms.IntegerField(min_value=1, initial=128, help_text="feed-forward width")
    n_cand = forms.IntegerField(min_value=1, initial=16, help_text="candidates fused by the reader")
    max_target_len = forms.IntegerField(min_value=2, initial=64, help_text="longest decoder target incl. <eos>")

    # inference
    window = forms.IntegerField(min_value=1, initial=20, help_text="passage window in tokens")
    stride = forms.IntegerField(min_value=1, initial=10, help_text="passage stride in tokens")
    k = forms.IntegerField(min_value=1, initial=100, help_text="retrieved candidates per passage")
    ed_k = forms.IntegerField(min_value=1, initial=200, help_text="candidate-list cut for disambiguation")
    mode = forms.ChoiceField(choices=[(m.value, m.value) for m in TargetMode], initial=TargetMode.TITLE.value,
                             help_text="reader target: entity title or candidate index")
    task = forms.ChoiceField(choices=[("ed", "ed"), ("el", "el")], initial="ed",
                             help_text="reader task: disambiguation or linking")
    method = forms.ChoiceField(choices=[("reader", "reader"), ("prior", "prior")], initial="reader",
                               help_text="disambiguation method")
    constrained = forms.BooleanField(required=False, initial=False,
                                     help_text="trie-constrained decoding over candidate titles")

    # training
    lr = forms.FloatField(min_value=0.0, initial=1e-4, help_text="peak learning rate")
    steps = forms.IntegerField(min_value=0, initial=1000, help_text="optimizer steps")
    warmup = forms.FloatField(min_value=0.0, max_value=0.999, initial=0.01, help_text="warm-up fraction of steps")
    batch_size = forms.IntegerField(min_value=1, initial=8, help_text="examples per step")
    eval_every = forms.IntegerField(min_value=1, initial=1000, help_text="steps between evaluations")
    negatives = forms.IntegerField(min_value=0, initial=32, help_text="NCE negatives per passage")
    hard_fraction = forms.FloatField(min_value=0.0, max_value=1.0, initial=0.1, help_text="share of hard negatives")
    min_count = forms.IntegerField(min_value=1, initial=1, help_text="vocabulary frequency threshold")

    # run
    seed = forms.IntegerField(min_value=0, initial=0, help_text="seed for every random choice")
    threads = forms.IntegerField(min_value=1, initial=1, help_text="parallel width of scoring and reading")

    def clean_kb(self):
        return _existing_path(self.cleaned_data["kb"])

    def clean_candidates(self):
        return _existing_path(self.cleaned_data["candidates"])

    def clean_corpus(self):
        return _existing_path(self.cleaned_data["corpus"])

    def clean_input(self):
        return _existing_path(self.cleaned_data["input"])

    def clean_pred(self):
        return _existing_path(self.cleaned_data["pred"])

    def clean_gold(self):
        return _existing_path(self.cleaned_data["gold"])

    def clean(self):
        cleaned = super().clean()
        window, stride = cleaned.get("window"), cleaned.get("stride")
        if window and stride and stride > window:
            self.add_error("stride", "stride cannot exceed window")
        d_model, heads = cleaned.get("d_model"), cleaned.get("heads")
        if d_model and heads and d_model % heads:
            self.add_error("heads", "d_model must be divisible by heads")
        return cleaned

    def to_config(self):
        values = dict(self.cleaned_data)
        values["mode"] = TargetMode(values["mode"])
        return RunConfig(**values)

    @classmethod
    def defaults(cls):
        return {name: field.initial for name, field in cls.base_fields.items()}
