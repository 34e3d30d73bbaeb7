from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from experiments.runner import TIMELINE_BIN_S
from metrics.kpis import compute_kpis
from metrics.report import render_table, write_report
from metrics.timeline import timeline, write_timeline

from ._common import EXIT_CONFIG_ERROR, command_error


class Command(BaseCommand):
    help = 'Recompute the report and the timeline of a finished run from its event log.'

    def add_arguments(self, parser):
        parser.add_argument('--log', type=str, required=True, help='Path of an events.log file.')
        parser.add_argument('--out', type=str, help='Where to write the report (default: next to the log).')
        parser.add_argument('--timeline-bin', type=float, default=TIMELINE_BIN_S,
                            help='Timeline bin width in seconds (default: 900).')

    def handle(self, *args, **options):
        log_path = Path(options['log'])
        if not log_path.is_file():
            raise CommandError(f'Event log not found: {log_path}', returncode=EXIT_CONFIG_ERROR)
        if options['timeline_bin'] <= 0:
            raise CommandError('--timeline-bin must be positive', returncode=EXIT_CONFIG_ERROR)
        out = Path(options['out']) if options['out'] else log_path.parent

        try:
            report = compute_kpis(log_path)
            paths = write_report(report, out)
            paths['timeline'] = write_timeline(timeline(log_path, options['timeline_bin']), out / 'timeline.csv')
        except Exception as e:
            raise command_error(e)

        self.stdout.write(render_table(report))
        self.stdout.write(self.style.SUCCESS(
            f"Report written to {paths['txt']}, {paths['kv']} and {paths['timeline']}"
        ))
