from django.core.exceptions import ValidationError
from django.core.management.base import BaseCommand, CommandError

from ...scenario import ScenarioParseError, resolve_scenario
from .run_experiment import EXIT_IO, EXIT_VALIDATION


class Command(BaseCommand):
    help = "Check a scenario file (or builtin name) and list every violation."

    def add_arguments(self, parser):
        parser.add_argument('scenario', help="Builtin name or path to a scenario file.")

    def handle(self, *args, **options):
        source = options['scenario']
        try:
            scenario = resolve_scenario(source)
        except ScenarioParseError as exc:
            raise CommandError(f"cannot parse scenario: {exc}", returncode=EXIT_VALIDATION) from exc
        except ValidationError as exc:
            for message in exc.messages:
                self.stderr.write(f"  {message}")
            raise CommandError(
                f"{source}: {len(exc.messages)} violation(s)", returncode=EXIT_VALIDATION) from exc
        except OSError as exc:
            raise CommandError(f"cannot read scenario {source}: {exc}", returncode=EXIT_IO) from exc

        packets = sum(flow.packet_count for flow in scenario.traffic)
        self.stdout.write(self.style.SUCCESS(
            f"{source} is valid: {len(scenario.nodes)} nodes, {len(scenario.traffic)} flow(s), "
            f"{packets} packets"))
