from linking.exceptions import GradientCheckError
from linking.fusion_model import FusionModel, ModelConfig, grad_check

from ._base import LinkingCommand

TOLERANCE = 1e-3
VOCAB_SIZE = 24


class Command(LinkingCommand):
    help = 'Compares reader gradients against central finite differences on a random toy model'
    config_fields = ("d_model", "heads", "layers", "ff_width")
    defaults = {"d_model": 8, "ff_width": 16}

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--epsilon", type=float, default=1e-4, help="finite-difference step (default: 0.0001)")
        parser.add_argument("--candidates", dest="n_inputs", type=int, default=2,
                            help="candidate inputs fused (default: 2)")

    def handle(self, *args, **options):
        self.epsilon = options["epsilon"]
        self.n_inputs = options["n_inputs"]
        return super().handle(*args, **options)

    def run(self, config, rng):
        model = FusionModel(ModelConfig(
            vocab_size=VOCAB_SIZE, d_model=config.d_model, encoder_layers=config.layers,
            decoder_layers=config.layers, heads=config.heads, ff_width=config.ff_width,
            n_cand=max(self.n_inputs, 1), max_segment_len=16, max_target_len=8,
        ), bos_id=2, eos_id=3)
        inputs = [list(rng.integers(4, VOCAB_SIZE, size=int(rng.integers(4, 8)))) for _ in range(self.n_inputs)]
        target = list(rng.integers(4, VOCAB_SIZE, size=4))
        error = grad_check(model, inputs, target, self.epsilon, rng=rng)
        self.stdout.write(f'max relative error: {error:.3e}')
        if not error < TOLERANCE:
            raise GradientCheckError(f"max relative error {error:.3e} >= {TOLERANCE}")
        self.stdout.write(self.style.SUCCESS('Gradient check passed'))
