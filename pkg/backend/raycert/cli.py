"""
Console entry point: `raycert <subcommand> [flags]`.

Subcommands are the app's management commands. The exit code is 0 for a
definite success, 2 for a definite negative result, 3 when inconclusive and 1
for usage or model errors, which are also reported as JSON on stderr.
"""

import json
import logging
import os
import sys
from typing import List, Optional, TextIO

SUBCOMMANDS = ("analyze", "rays", "net", "bm", "transfer", "mvn", "wannier", "verify")

logger = logging.getLogger(__name__)


def _setup() -> None:
    os.environ.setdefault("DJANGO_SETTINGS_MODULE", "config.settings")
    import django

    django.setup()


def _error(stream: TextIO, kind: str, message: str) -> int:
    stream.write(json.dumps({"error": kind, "message": message}, sort_keys=True) + "\n")
    return 1


def run(argv: Optional[List[str]] = None, stdout: Optional[TextIO] = None, stderr: Optional[TextIO] = None) -> int:
    """Run one subcommand and return its exit code"""
    from django.apps import apps

    if not apps.ready:
        _setup()

    from django.core.management import call_command
    from django.core.management.base import CommandError

    from .commands import VerdictExit
    from .exceptions import RayCertError

    argv = list(sys.argv[1:] if argv is None else argv)
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr

    if not argv or argv[0] not in SUBCOMMANDS:
        given = argv[0] if argv else ""
        return _error(stderr, "UsageError", f"Unknown subcommand {given!r}; expected one of {', '.join(SUBCOMMANDS)}")

    try:
        call_command(argv[0], *argv[1:], stdout=stdout, stderr=stderr)
    except VerdictExit as exc:
        return exc.returncode
    except CommandError as exc:
        cause = exc.__cause__
        kind = type(cause).__name__ if isinstance(cause, RayCertError) else "CommandError"
        logger.debug("%s failed", argv[0], exc_info=True)
        return _error(stderr, kind, str(exc))
    except RayCertError as exc:
        return _error(stderr, type(exc).__name__, str(exc))
    return 0


def main() -> None:
    sys.exit(run())
