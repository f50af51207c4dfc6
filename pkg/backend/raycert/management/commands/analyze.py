from raycert.bm_homology import report_from_tree
from raycert.coarse_transfer import coarse_constant, transfer_all
from raycert.commands import INCONCLUSIVE, NEGATIVE, OK, RayCertCommand, bundled_path
from raycert.rips_multiscale import Outcome, merge_tree, scan_scales, verdict_from_tree
from raycert.schemas import AnalyzeReportSchema
from raycert.space_models import load_model

EXIT_CODES = {Outcome.SATISFIED: OK, Outcome.FAILS: NEGATIVE, Outcome.INCONCLUSIVE: INCONCLUSIVE}


class Command(RayCertCommand):
    help = "Decide the finite-component criterion and the Borel-Moore limit of a model"
    output_schema = AnalyzeReportSchema

    def add_command_arguments(self, parser):
        parser.add_argument("--target", help="Second model; appends a coarse transfer at --alpha")

    def compute(self, config, options):
        model = self.model(options)
        window = self.window(model, options)
        alpha_max = self.length(options, "alpha_max")
        tree = merge_tree(model, window, scan_scales(model, window, alpha_max), config.threads)
        verdict = verdict_from_tree(model, tree)
        report = report_from_tree(tree)

        transfer = None
        if options.get("target"):
            target = load_model(bundled_path("models", options["target"]))
            region = self.region(model, options)
            pair = coarse_constant(model, target, region)
            alpha = self.length(options, "alpha")
            transfer = transfer_all(pair, region, alpha).to_schema()

        payload = AnalyzeReportSchema(
            model=model.name,
            window_size=len(window),
            criterion=verdict.to_schema(),
            borel_moore=report.to_schema(),
            coarse_transfer=transfer,
        )
        return EXIT_CODES[verdict.outcome], payload
