from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from experiments.config import load_config
from experiments.presets import preset
from experiments.services import finish_sweep, record_sweep_run, start_sweep
from experiments.sweep import SweepSpec, run_level_of_service, run_sweep

from ._common import EXIT_CONFIG_ERROR, EXIT_RUNTIME_ERROR, command_error, parse_list


class Command(BaseCommand):
    help = (
        'Run a batch of simulations: one parameter over a list of values, crossed with fleet sizes '
        'and seeds, or a sweep preset. Writes matrix.csv with one row per run.'
    )

    def add_arguments(self, parser):
        source = parser.add_mutually_exclusive_group(required=True)
        source.add_argument('--config', type=str, help='Base INI run configuration.')
        source.add_argument('--preset', type=str, help='Sweep preset, or a run preset to use as the base.')
        parser.add_argument('--axis', type=str, help='Parameter to vary, e.g. autonomous_speed.')
        parser.add_argument('--values', type=str, default='', help='Comma-separated values of the axis.')
        parser.add_argument('--fleet-sizes', type=str, default='', help='Comma-separated fleet sizes.')
        parser.add_argument('--seeds', type=str, help='Comma-separated seeds (default: 0, or the preset seeds).')
        parser.add_argument('--out', type=str, help='Directory for the matrix and the per-run artifacts.')
        parser.add_argument('--workers', type=int, help='Local worker processes (default: BIKESIM_WORKERS).')
        parser.add_argument('--celery', action='store_true', help='Dispatch runs as Celery tasks.')
        parser.add_argument('--dry-run', action='store_true', help='Report the sweep size without running it.')

    def _spec(self, options) -> SweepSpec:
        base = load_config(options['config']) if options['config'] else preset(options['preset'])
        seeds = parse_list(options['seeds'], int) if options['seeds'] else None
        if isinstance(base, SweepSpec):
            if options['axis']:
                raise CommandError('--axis cannot be combined with a sweep preset', returncode=EXIT_CONFIG_ERROR)
            base.seeds = seeds or base.seeds
            if options['out']:
                base.out = Path(options['out'])
            return base

        if options['out']:
            base = base.with_params(out=options['out'])
        fleet_sizes = parse_list(options['fleet_sizes'], int) or [base.fleet_size]
        values = parse_list(options['values']) if options['axis'] else [None]
        if options['axis'] and not values:
            raise CommandError('--axis needs --values', returncode=EXIT_CONFIG_ERROR)
        return SweepSpec.single(base, options['axis'], values, fleet_sizes, seeds or [0],
                                name=options['preset'] or options['axis'] or 'sweep')

    def handle(self, *args, **options):
        try:
            spec = self._spec(options)
            if spec.target_served_pct is None:
                # every combination is validated before the sweep is recorded
                spec.combinations()
        except CommandError:
            raise
        except Exception as e:
            raise command_error(e)

        if spec.target_served_pct is not None:
            self.stdout.write(self.style.SUCCESS(
                f'Level-of-service search ({spec.target_served_pct}% served) for {len(spec.groups)} system(s)'
            ))
        else:
            self.stdout.write(self.style.SUCCESS(f'Sweep {spec.name}: {spec.size} runs'))
        if options['dry_run']:
            return

        sweep = start_sweep(spec)
        try:
            if spec.target_served_pct is not None:
                result = run_level_of_service(spec, workers=options['workers'])
            else:
                result = run_sweep(
                    spec, workers=options['workers'], use_celery=options['celery'],
                    on_result=lambda label, run_config, kpis: record_sweep_run(sweep, run_config, label, kpis),
                )
        except Exception as e:
            sweep.status = 'failed'
            sweep.save(update_fields=['status'])
            raise command_error(e)
        finish_sweep(sweep, result)

        for failure in result.failures:
            self.stdout.write(self.style.ERROR(f"Failed: {failure}"))
        if result.matrix.empty:
            raise CommandError('Every run of the sweep failed', returncode=EXIT_RUNTIME_ERROR)
        self.stdout.write(self.style.SUCCESS(
            f'{len(result.matrix)} rows written to {result.path} ({len(result.failures)} failure(s))'
        ))
