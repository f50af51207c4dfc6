import json
from pathlib import Path

from pydantic import ValidationError

from raycert.commands import NEGATIVE, OK, RayCertCommand
from raycert.exceptions import ModelError
from raycert.ray_synthesis import RayStructureWitness, validate_ray_structure
from raycert.schemas import ValidationReportSchema, WitnessSchema


def load_witness(path: Path) -> RayStructureWitness:
    try:
        schema = WitnessSchema.model_validate(json.loads(path.read_text()))
    except OSError as exc:
        raise ModelError(f"Cannot read witness {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ModelError(f"Witness {path} is not valid JSON: {exc}") from exc
    except ValidationError as exc:
        raise ModelError(f"Invalid witness in {path}: {exc}") from exc
    return RayStructureWitness.from_schema(schema)


class Command(RayCertCommand):
    help = "Validate a ray-structure witness against a model"
    output_schema = ValidationReportSchema

    def add_command_arguments(self, parser):
        parser.add_argument("--witness", help="Witness JSON produced by rays")

    def compute(self, config, options):
        model = self.model(options)
        witness = load_witness(Path(self.require(options, "witness")))
        window = self.window(model, options) if options.get("window") else None
        report = validate_ray_structure(witness, model, window)
        return (OK if report.ok else NEGATIVE), report.to_schema()
