# similarity/management/commands/run.py
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from similarity.runner import EXIT_OK, RunRequest, execute, residual_text


class Command(BaseCommand):
    help = 'Evaluate a scenario and write one CSV per requested output'

    def add_arguments(self, parser):
        parser.add_argument('--scenario', required=True,
                            help='Scenario file, or the name of a bundled scenario')
        parser.add_argument('--out', type=Path, default=None,
                            help='Output directory (default: SIMILARITY_OUTPUT_DIR)')
        parser.add_argument('--verify', action='store_true',
                            help='Run the verification oracles and write a residual CSV')
        parser.add_argument('--plot', action='store_true',
                            help='Write a line plot next to every 1-D series')

    def handle(self, *args, **options):
        request = RunRequest(
            scenario=options['scenario'],
            out_dir=options['out'],
            verify=options['verify'],
            plot=options['plot'],
        )
        self.stdout.write(f"Running {request.scenario}...")
        outcome = execute(request)

        for path in outcome.files:
            self.stdout.write(f"  • {path}")
        if outcome.reports:
            self.stdout.write(residual_text(outcome.reports), ending='')

        if outcome.status != EXIT_OK:
            raise CommandError(outcome.message, returncode=outcome.status)
        self.stdout.write(self.style.SUCCESS(outcome.message))
