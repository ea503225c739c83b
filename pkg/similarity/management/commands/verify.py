# similarity/management/commands/verify.py
import logging

from django.core.management.base import BaseCommand, CommandError

from similarity.exceptions import ConvergenceError, DivergenceError
from similarity.runner import (EXIT_INVALID, EXIT_NOT_CONVERGED, EXIT_VERIFY_FAILED, INVALID_ERRORS,
                               report_passes, residual_text, verify_scenario)
from similarity.scenarios import list_bundled, load_scenario, resolve_scenario

logger = logging.getLogger(__name__)


class Command(BaseCommand):
    help = 'Check scenario solutions against their governing equations; prints residual CSV rows'

    def add_arguments(self, parser):
        parser.add_argument('--scenario', action='append', default=None,
                            help='Scenario file or bundled name (repeatable; default: every bundled scenario)')

    def handle(self, *args, **options):
        names = options['scenario'] or [name for name, _ in list_bundled()]
        results = []
        for name in names:
            try:
                scenario = load_scenario(resolve_scenario(name))
                results.extend(verify_scenario(scenario))
            except INVALID_ERRORS as e:
                raise CommandError(str(e), returncode=EXIT_INVALID)
            except (ConvergenceError, DivergenceError) as e:
                logger.error(f"Verification of {name} stopped: {e}")
                raise CommandError(str(e), returncode=EXIT_NOT_CONVERGED)

        self.stdout.write(residual_text(results), ending='')
        failed = [report.equation for _, report in results if not report_passes(report)]
        if failed:
            raise CommandError(f"{len(failed)} residual check(s) failed: {', '.join(failed)}",
                               returncode=EXIT_VERIFY_FAILED)
        self.stdout.write(self.style.SUCCESS(f"All {len(results)} residual checks passed"))
