from django.core.management.base import BaseCommand, CommandError

from experiments.config import load_config
from experiments.presets import preset
from experiments.runner import TIMELINE_BIN_S, run
from experiments.services import fail_run, finish_run, start_run
from experiments.sweep import SweepSpec
from metrics.report import render_table

from ._common import EXIT_CONFIG_ERROR, command_error, parse_assignments


class Command(BaseCommand):
    help = 'Run one simulation from a config file or a named preset and write its log, report and timeline.'

    def add_arguments(self, parser):
        source = parser.add_mutually_exclusive_group(required=True)
        source.add_argument('--config', type=str, help='Path of an INI run configuration.')
        source.add_argument('--preset', type=str, help='Name of a run preset (see the preset command).')
        parser.add_argument('--seed', type=int, help='Override the seed of the configuration.')
        parser.add_argument('--out', type=str, help='Override the output directory.')
        parser.add_argument(
            '--set',
            action='append',
            default=[],
            metavar='KEY=VALUE',
            help='Override any configuration key, e.g. --set fleet_size=500. Repeatable.',
        )
        parser.add_argument('--timeline-bin', type=float, default=TIMELINE_BIN_S,
                            help='Timeline bin width in seconds (default: 900).')
        parser.add_argument('--no-record', action='store_true', help='Do not store the run in the database.')

    def handle(self, *args, **options):
        changes = parse_assignments(options['set'])
        if options['seed'] is not None:
            changes['seed'] = options['seed']
        if options['out']:
            changes['out'] = options['out']

        try:
            if options['config']:
                run_config = load_config(options['config'])
            else:
                run_config = preset(options['preset'])
                if isinstance(run_config, SweepSpec):
                    raise CommandError(f"{options['preset']} is a sweep preset; use the sweep command",
                                       returncode=EXIT_CONFIG_ERROR)
            run_config = run_config.with_params(check_files=True, **changes)
        except CommandError:
            raise
        except Exception as e:
            raise command_error(e)

        self.stdout.write(self.style.SUCCESS(
            f'Starting {run_config.mode.value} run: fleet {run_config.fleet_size}, seed {run_config.seed}'
        ))
        record = None if options['no_record'] else start_run(run_config)
        try:
            result = run(run_config, timeline_bin_s=options['timeline_bin'])
        except Exception as e:
            if record is not None:
                fail_run(record, e)
            raise command_error(e)
        if record is not None:
            finish_run(record, result)

        self.stdout.write(render_table(result.report))
        if result.report.stranded_bikes:
            self.stdout.write(self.style.WARNING(f'{result.report.stranded_bikes} bike(s) ran out of battery'))
        self.stdout.write(self.style.SUCCESS(f'Run complete; artifacts in {result.out}'))
