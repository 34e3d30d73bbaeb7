from datetime import datetime, timedelta
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from demandio.requests import write_requests
from demandio.scatter import scatter_requests
from demandio.stations import load_stations, write_stations
from demandio.stats import demand_stats
from demandio.synthetic import save_city, synthetic_city
from demandio.trips import load_trips
from engine.rng import agent_rng
from experiments.config import build_config, write_config
from geo.network import BBox, load_network, load_network_cache, save_network
from routing.router import Router

from ._common import EXIT_CONFIG_ERROR, command_error


class Command(BaseCommand):
    help = (
        'Prepare simulation inputs: build the road network cache from an OSM extract, turn trip '
        'records into a request file and a demand history, convert station lists, or generate a '
        'synthetic city.'
    )

    def add_arguments(self, parser):
        parser.add_argument('--synthetic', type=str, metavar='DIR',
                            help='Write a synthetic city and a template run.ini into DIR.')
        parser.add_argument('--rows', type=int, default=12, help='Synthetic lattice rows.')
        parser.add_argument('--cols', type=int, default=12, help='Synthetic lattice columns.')
        parser.add_argument('--days', type=int, default=1, help='Synthetic demand days.')
        parser.add_argument('--trips-per-day', type=float, default=2000.0, help='Synthetic mean daily trips.')

        parser.add_argument('--osm', type=str, help='OSM XML or PBF extract.')
        parser.add_argument('--bbox', type=str, help='west,south,east,north of the study area.')
        parser.add_argument('--network', type=str, help='Network cache to write (--osm) or read.')

        parser.add_argument('--stations', type=str, help='Station list.')
        parser.add_argument('--stations-schema', type=str, default='canonical')
        parser.add_argument('--stations-out', type=str, help='Write the stations in the canonical layout.')
        parser.add_argument('--trips', type=str, help='Trip records.')
        parser.add_argument('--trips-schema', type=str, default='bluebikes')
        parser.add_argument('--t0', type=datetime.fromisoformat, help='Window start, ISO 8601.')
        parser.add_argument('--t1', type=datetime.fromisoformat, help='Window end, ISO 8601.')
        parser.add_argument('--seed', type=int, default=0)
        parser.add_argument('--scatter-radius', type=float, default=300.0)
        parser.add_argument('--requests-out', type=str, help='Write the scattered requests of the window.')
        parser.add_argument('--history-weeks', type=int, default=0,
                            help='Weeks of trips before t0 to write as demand history.')
        parser.add_argument('--history-out', type=str, help='Where to write the demand history.')
        parser.add_argument('--stats', action='store_true', help='Print demand statistics of the window.')

    def handle(self, *args, **options):
        try:
            if options['synthetic']:
                self._synthetic(options)
                return
            if options['osm']:
                self._network(options)
            if options['stations_out']:
                self._stations(options)
            if options['requests_out'] or options['history_out'] or options['stats']:
                self._demand(options)
        except CommandError:
            raise
        except Exception as e:
            raise command_error(e)

    def _require(self, options, *names):
        missing = [f"--{n.replace('_', '-')}" for n in names if not options[n]]
        if missing:
            raise CommandError(f"Missing {', '.join(missing)}", returncode=EXIT_CONFIG_ERROR)

    def _synthetic(self, options):
        directory = Path(options['synthetic'])
        city = synthetic_city(seed=options['seed'], rows=options['rows'], cols=options['cols'],
                              days=options['days'], trips_per_day=options['trips_per_day'])
        paths = save_city(city, directory)
        template = build_config({
            'mode': 'dockless',
            'seed': options['seed'],
            'out': str(directory / 'runs' / 'dockless'),
            't0': city.t0.isoformat(),
            't1': city.t1.isoformat(),
            'network': str(paths['network'].resolve()),
            'stations': str(paths['stations'].resolve()),
            'trips': str(paths['trips'].resolve()),
            'fleet_size': max(1, len(city.trips) // (4 * options['days'])),
        }, check_files=True)
        config_path = write_config(template, directory / 'run.ini')
        self.stdout.write(self.style.SUCCESS(
            f'Synthetic city in {directory}: {len(city.net)} nodes, {len(city.stations)} stations, '
            f'{len(city.trips)} trips; template configuration {config_path}'
        ))

    def _network(self, options):
        self._require(options, 'bbox', 'network')
        net = load_network(options['osm'], BBox.parse(options['bbox']))
        path = save_network(net, options['network'])
        Router.for_network(net, cache_dir=settings.BIKESIM['CACHE_DIR'])
        self.stdout.write(self.style.SUCCESS(
            f'Network cache {path}: {len(net)} nodes, {len(net.edges)} directed edges'
        ))

    def _stations(self, options):
        self._require(options, 'stations')
        records = load_stations(options['stations'], columns=options['stations_schema'])
        path = write_stations(options['stations_out'], records)
        self.stdout.write(self.style.SUCCESS(f'{len(records)} stations written to {path}'))

    def _demand(self, options):
        self._require(options, 'network', 'trips', 't0', 't1')
        t0, t1 = options['t0'], options['t1']
        if t1 <= t0:
            raise CommandError('--t1 must be after --t0', returncode=EXIT_CONFIG_ERROR)
        net = load_network_cache(options['network'])
        trips = load_trips(options['trips'], (t0, t1), columns=options['trips_schema'])
        requests = scatter_requests(trips, agent_rng(options['seed'], 'demand'), options['scatter_radius'],
                                    net, t0)
        if trips.skipped:
            self.stdout.write(self.style.WARNING(f'{trips.skipped} malformed trip rows skipped'))

        if options['requests_out']:
            path = write_requests(options['requests_out'], requests)
            self.stdout.write(self.style.SUCCESS(f'{len(requests)} requests written to {path}'))

        if options['history_out']:
            if options['history_weeks'] < 1:
                raise CommandError('--history-out needs --history-weeks of at least 1',
                                   returncode=EXIT_CONFIG_ERROR)
            window = (t0 - timedelta(weeks=options['history_weeks']), t0)
            past = load_trips(options['trips'], window, columns=options['trips_schema'])
            history = scatter_requests(past, agent_rng(options['seed'], 'history'), options['scatter_radius'],
                                       net, t0)
            path = write_requests(options['history_out'], history)
            self.stdout.write(self.style.SUCCESS(
                f'{len(history)} history requests over {options["history_weeks"]} week(s) written to {path}'
            ))

        if options['stats']:
            if not requests:
                self.stdout.write(self.style.WARNING('No requests in the window'))
                return
            stats = demand_stats(requests, t0)
            busiest = stats.hourly.idxmax()
            self.stdout.write(f'requests = {stats.total}')
            self.stdout.write(f'busiest_hour = {busiest} ({stats.hourly[busiest]} requests)')
            self.stdout.write(f'share_below_5km = {stats.share_below_5km:.4f}')
            for low, high, count in zip(stats.distance_edges_km[:-1], stats.distance_edges_km[1:],
                                        stats.distance_counts):
                self.stdout.write(f'  {low:.0f}-{high:.0f} km: {count}')
