import json

from raycert.commands import NEGATIVE, OK, RayCertCommand, bundled_path
from raycert.net_builder import build_net, check_net, load_domain
from raycert.schemas import NetOutputSchema


class Command(RayCertCommand):
    help = "Build a maximal r-disjoint net on a sampled domain and check it"
    output_schema = NetOutputSchema

    def add_command_arguments(self, parser):
        parser.add_argument("--domain", help="Domain file or bundled domain name")
        parser.add_argument("--r", type=str, help="Net radius r")

    def compute(self, config, options):
        domain = load_domain(bundled_path("domains", self.require(options, "domain")))
        r = self.require(options, "r")
        net = build_net(domain, r)
        report = check_net(net, domain)
        description = net.to_model(name=f"net-{domain.shape}").describe()

        self.write_out(config, json.dumps(description.model_dump(mode="json"), sort_keys=True, indent=2))
        payload = NetOutputSchema(model=description, report=report.to_schema())
        return (OK if report.ok else NEGATIVE), payload
