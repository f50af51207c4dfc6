from raycert.bm_homology import LimitVerdict, bm_report
from raycert.commands import INCONCLUSIVE, NEGATIVE, OK, RayCertCommand
from raycert.schemas import BMReportSchema

EXIT_CODES = {LimitVerdict.VANISHES: OK, LimitVerdict.PERSISTS: NEGATIVE, LimitVerdict.INCONCLUSIVE: INCONCLUSIVE}


class Command(RayCertCommand):
    help = "Per-scale Borel-Moore class of the all-ones chain and its direct limit"
    output_schema = BMReportSchema

    def compute(self, config, options):
        model = self.model(options)
        window = self.window(model, options)
        report = bm_report(model, window, self.length(options, "alpha_max"), config.threads)
        return EXIT_CODES[report.limit.verdict], report.to_schema()
