from raycert.coarse_transfer import coarse_constant, transfer_all
from raycert.commands import NEGATIVE, OK, RayCertCommand, bundled_path
from raycert.schemas import TransferSchema
from raycert.space_models import load_model


class Command(RayCertCommand):
    help = "Transfer finite-component certificates from one model to a coarsely equivalent one"
    output_schema = TransferSchema

    def add_command_arguments(self, parser):
        parser.add_argument("--target", help="Model receiving the certificates")

    def compute(self, config, options):
        source = self.model(options)
        target = load_model(bundled_path("models", self.require(options, "target")))
        region = self.region(source, options)
        pair = coarse_constant(source, target, region)
        transfer = transfer_all(pair, region, self.length(options, "alpha"))
        # No finite source at alpha + 2C is the negative outcome
        return (OK if transfer.certificates else NEGATIVE), transfer.to_schema()
