# similarity/management/commands/list.py
from django.core.management.base import BaseCommand, CommandError

from similarity.exceptions import ScenarioError
from similarity.scenarios import list_bundled


def list_scenarios() -> str:
    """One 'name  description' line per bundled scenario"""
    entries = list_bundled()
    width = max((len(name) for name, _ in entries), default=0)
    return '\n'.join(f"{name.ljust(width)}  {description}" for name, description in entries)


class Command(BaseCommand):
    help = 'List the bundled scenarios'

    def handle(self, *args, **options):
        try:
            text = list_scenarios()
        except ScenarioError as e:
            raise CommandError(f"A bundled scenario is invalid:\n{e}", returncode=1)
        if text:
            self.stdout.write(text)
