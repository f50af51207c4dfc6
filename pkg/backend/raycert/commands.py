"""
Shared base for the raycert management commands.

Every subcommand computes a (status, payload) pair: payload is a ninja Schema
written to stdout as canonical JSON, status is the exit code (0 definite
success, 2 definite negative, 3 inconclusive).
"""

import json
import logging
from argparse import ArgumentTypeError
from pathlib import Path
from typing import Any, Optional, Tuple, Type

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError
from ninja import Schema
from pydantic import ValidationError

from .exceptions import ContractViolation, ModelError, RayCertError
from .lengths import Length, as_fraction
from .schemas import RunConfig
from .space_models import PointModel, Region, Window, default_region, enumerate_window, load_model, parse_region

OK = 0
NEGATIVE = 2
INCONCLUSIVE = 3

VERBOSITY_LEVELS = {0: logging.ERROR, 1: logging.WARNING, 2: logging.INFO, 3: logging.DEBUG}


class VerdictExit(CommandError):
    """Raised after the payload is written when the result is negative or inconclusive"""

    def __init__(self, returncode: int, message: str = "") -> None:
        super().__init__(message or f"exit status {returncode}", returncode=returncode)


def scale(value: str) -> str:
    """argparse type: a positive exact number, kept as text"""
    try:
        number = as_fraction(value)
    except ModelError as exc:
        raise ArgumentTypeError(str(exc)) from exc
    if number <= 0:
        raise ArgumentTypeError(f"{value} is not positive")
    return value


def dumps(payload: Schema) -> str:
    """Canonical JSON: sorted keys, two-space indent"""
    return json.dumps(payload.model_dump(mode="json"), sort_keys=True, indent=2)


def bundled_path(kind: str, name: str) -> Path:
    """A path as given, or a bundled input of that kind by stem"""
    path = Path(name)
    if path.exists():
        return path
    candidate = Path(settings.RAYCERT_BUNDLED_DIR) / kind / f"{path.stem}.json"
    if candidate.exists():
        return candidate
    return path


class RayCertCommand(BaseCommand):
    output_schema: Type[Schema]
    requires_system_checks: list = []

    def add_arguments(self, parser):
        parser.add_argument("--model", action="append", default=[], help="Model file or bundled model name")
        parser.add_argument("--alpha", type=scale, help="Scale alpha")
        parser.add_argument("--alpha-max", type=scale, help="Largest scale examined")
        parser.add_argument("--window", help="box:LO:HI or ball:LABEL:R")
        parser.add_argument("--out", help="Also write the main artifact to this file")
        parser.add_argument(
            "--tol", type=scale, default=None, help="Base tolerance (default RAYCERT_DEFAULT_TOL)"
        )
        parser.add_argument("--seed", type=int, default=0)
        parser.add_argument("--threads", type=int, default=1)
        parser.add_argument("--print-schema", action="store_true", help="Print the output JSON schema")
        self.add_command_arguments(parser)

    def add_command_arguments(self, parser) -> None:
        pass

    def handle(self, *args, **options):
        level = VERBOSITY_LEVELS.get(options.get("verbosity", 1), logging.DEBUG)
        logging.getLogger("raycert").setLevel(level)

        if options["print_schema"]:
            self.stdout.write(json.dumps(self.output_schema.model_json_schema(), sort_keys=True, indent=2))
            return

        try:
            config = RunConfig(
                subcommand=self.name,
                models=options["model"],
                alpha=None if options["alpha"] is None else float(as_fraction(options["alpha"])),
                alpha_max=None if options["alpha_max"] is None else float(as_fraction(options["alpha_max"])),
                window=options["window"],
                out=options["out"],
                tol=float(options["tol"]) if options["tol"] is not None else settings.RAYCERT_DEFAULT_TOL,
                seed=options["seed"],
                threads=options["threads"],
            )
        except ValidationError as exc:
            raise CommandError(f"Invalid arguments: {exc}") from exc

        try:
            status, payload = self.compute(config, options)
        except RayCertError as exc:
            raise CommandError(str(exc)) from exc

        self.stdout.write(dumps(payload))
        if status != OK:
            raise VerdictExit(status)

    @property
    def name(self) -> str:
        return self.__class__.__module__.rsplit(".", 1)[-1]

    def compute(self, config: RunConfig, options: dict) -> Tuple[int, Schema]:
        raise NotImplementedError

    # Shared argument helpers

    def require(self, options: dict, key: str) -> Any:
        value = options.get(key)
        if value in (None, []):
            raise CommandError(f"--{key.replace('_', '-')} is required for {self.name}")
        return value

    def model(self, options: dict, position: int = 0) -> PointModel:
        models = self.require(options, "model")
        if len(models) <= position:
            raise CommandError(f"{self.name} needs {position + 1} --model arguments")
        return load_model(bundled_path("models", models[position]))

    def region(self, model: PointModel, options: dict) -> Region:
        if options.get("window"):
            return parse_region(options["window"])
        return default_region(model)

    def window(self, model: PointModel, options: dict) -> Window:
        window = enumerate_window(model, self.region(model, options))
        if not len(window):
            raise ContractViolation(f"The window {window.region} holds no points of {model.name}")
        return window

    def length(self, options: dict, key: str) -> Length:
        return Length.of(self.require(options, key))

    def write_out(self, config: RunConfig, text: str) -> Optional[Path]:
        if not config.out:
            return None
        path = Path(config.out)
        try:
            path.write_text(text + "\n")
        except OSError as exc:
            raise CommandError(f"Cannot write {path}: {exc}") from exc
        return path
