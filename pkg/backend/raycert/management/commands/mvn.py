from django.core.management.base import CommandError

from raycert.commands import NEGATIVE, OK, RayCertCommand
from raycert.operator_witness import dump_matrices, mvn_shift_witness, random_ranks
from raycert.schemas import OperatorCertificateSchema


def ranks(text: str):
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise CommandError(f"--k expects comma-separated integers, got {text!r}") from exc


class Command(RayCertCommand):
    help = "Exact Murray-von Neumann shift witness for p + q ~ q along a ray of sites"
    output_schema = OperatorCertificateSchema

    def add_command_arguments(self, parser):
        parser.add_argument("--k", help="Comma-separated ranks k_1,...,k_n")
        parser.add_argument("--random-sites", type=int, help="Draw this many ranks from --seed")
        parser.add_argument("--k-max", type=int, default=5, help="Largest random rank")
        parser.add_argument("--h-dim", type=int, help="Fiber dimension, at least l(n_max)")
        parser.add_argument("--dump", help="Directory for dense row-major matrix dumps")

    def compute(self, config, options):
        if options.get("k"):
            k = ranks(options["k"])
        elif options.get("random_sites"):
            k = random_ranks(config.seed, options["random_sites"], options["k_max"])
        else:
            raise CommandError("mvn needs --k or --random-sites")
        certificate = mvn_shift_witness(k, options.get("h_dim"))
        if options.get("dump"):
            dump_matrices(certificate, options["dump"])
        return (OK if certificate.ok else NEGATIVE), certificate.to_schema()
