import logging

from raycert.commands import INCONCLUSIVE, NEGATIVE, OK, RayCertCommand, dumps
from raycert.exceptions import SynthesisRefused
from raycert.ray_synthesis import synthesize_ray_structure
from raycert.rips_multiscale import Outcome, decide_criterion
from raycert.schemas import RefusalSchema, WitnessSchema

logger = logging.getLogger(__name__)


class Command(RayCertCommand):
    help = "Synthesize a ray-structure witness at scale alpha, or refuse"
    output_schema = WitnessSchema

    def compute(self, config, options):
        model = self.model(options)
        window = self.window(model, options)
        alpha = self.length(options, "alpha")
        try:
            witness = synthesize_ray_structure(model, window, alpha, config.threads)
        except SynthesisRefused as exc:
            logger.warning("Refused: %s", exc)
            verdict = decide_criterion(model, window, alpha, config.threads)
            status = INCONCLUSIVE if verdict.outcome is Outcome.INCONCLUSIVE else NEGATIVE
            return status, RefusalSchema(reason=str(exc), criterion=verdict.to_schema())

        payload = witness.to_schema()
        self.write_out(config, dumps(payload))
        return OK, payload
