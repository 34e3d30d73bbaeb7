from django.core.management.base import BaseCommand, CommandError

from experiments.config import write_config
from experiments.presets import PRESETS, preset
from experiments.sweep import SweepSpec

from ._common import EXIT_CONFIG_ERROR, command_error


class Command(BaseCommand):
    help = 'List the named scenarios, or print (and optionally save) the configuration of one.'

    def add_arguments(self, parser):
        parser.add_argument('name', nargs='?', help='Preset name.')
        parser.add_argument('--list', action='store_true', help='List the available presets.')
        parser.add_argument('--write', type=str, help='Save a run preset as an INI file at this path.')
        parser.add_argument('--seed', type=int, help='Seed to put in the written configuration.')
        parser.add_argument('--out', type=str, help='Output directory of the preset.')

    def handle(self, *args, **options):
        if options['list'] or not options['name']:
            for name in PRESETS:
                self.stdout.write(name)
            return

        try:
            scenario = preset(options['name'], out=options['out'])
            if isinstance(scenario, SweepSpec):
                if options['write']:
                    raise CommandError(f"{options['name']} is a sweep preset; only run presets can be written",
                                       returncode=EXIT_CONFIG_ERROR)
                self._describe_sweep(scenario)
                return
            if options['seed'] is not None:
                scenario = scenario.with_params(seed=options['seed'])
        except CommandError:
            raise
        except Exception as e:
            raise command_error(e)

        self.stdout.write(scenario.to_ini())
        if options['write']:
            path = write_config(scenario, options['write'])
            self.stdout.write(self.style.SUCCESS(f'Configuration written to {path}'))

    def _describe_sweep(self, spec: SweepSpec):
        self.stdout.write(self.style.SUCCESS(f'{spec.name}: {spec.size} runs, seeds {spec.seeds}'))
        if spec.target_served_pct is not None:
            self.stdout.write(f'Searches the smallest fleet reaching {spec.target_served_pct}% served requests')
        for group in spec.groups:
            varied = f'{group.axis} in {group.values}' if group.axis else 'nominal'
            self.stdout.write(f'  {group.label}: {varied}, fleet sizes {group.fleet_sizes}')
