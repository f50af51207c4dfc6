from raycert.commands import NEGATIVE, OK, RayCertCommand, bundled_path
from raycert.operator_witness import Tolerances, build_wannier_isometry, dump_matrices, frame_polar, load_wannier
from raycert.schemas import OperatorCertificateSchema


class Command(RayCertCommand):
    help = "Wannier isometry and projection certificate, or the polar frame path"
    output_schema = OperatorCertificateSchema

    def add_command_arguments(self, parser):
        parser.add_argument("--frame", action="store_true", help="Force the frame path")
        parser.add_argument("--dump", help="Directory for dense row-major matrix dumps")

    def compute(self, config, options):
        data = load_wannier(bundled_path("wannier", self.require(options, "model")[0]))
        tol = Tolerances(config.tol)
        if options.get("frame") or data.mode == "frame":
            certificate = frame_polar(data.space, data.amplitudes, data.lambda_min, tol)
        else:
            certificate = build_wannier_isometry(data.space, data.amplitudes, tol)
        if options.get("dump"):
            dump_matrices(certificate, options["dump"])
        return (OK if certificate.ok else NEGATIVE), certificate.to_schema()
