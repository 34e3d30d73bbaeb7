from datetime import datetime
from pathlib import Path

from rest_framework import serializers

from demandio.stations import STATION_SCHEMAS
from demandio.trips import TRIP_SCHEMAS
from modes.config import Mode, RebalancingScenario
from rebalance.predictors import PREDICTORS

from .models import SimulationRun, Sweep


DATA_FILES = ("network", "stations", "requests", "trips", "history", "forecast_file")


class PositiveFloatField(serializers.FloatField):
    default_error_messages = {'not_positive': 'Ensure this value is greater than 0.'}

    def to_internal_value(self, data):
        value = super().to_internal_value(data)
        if value <= 0:
            self.fail('not_positive')
        return value


class RunConfigSerializer(serializers.Serializer):
    """
    Range checks for one run configuration.

    Input is the flat `key -> text` mapping read from a config file; pass
    `context={'check_files': False}` to skip the existence checks on data
    files (presets describe runs whose data may not be downloaded yet).
    """

    # [run]
    mode = serializers.ChoiceField(choices=[m.value for m in Mode])
    seed = serializers.IntegerField(min_value=0, default=0)
    out = serializers.CharField(default='runs/latest')
    t0 = serializers.CharField()
    t1 = serializers.CharField()

    # [data]
    network = serializers.CharField(required=False, allow_blank=True, default='')
    stations = serializers.CharField(required=False, allow_blank=True, default='')
    stations_schema = serializers.ChoiceField(choices=sorted(STATION_SCHEMAS), default='canonical')
    requests = serializers.CharField(required=False, allow_blank=True, default='')
    trips = serializers.CharField(required=False, allow_blank=True, default='')
    trips_schema = serializers.ChoiceField(choices=sorted(TRIP_SCHEMAS), default='bluebikes')
    scatter_radius = serializers.FloatField(min_value=0, default=300.0)
    history = serializers.CharField(required=False, allow_blank=True, default='')
    forecast_file = serializers.CharField(required=False, allow_blank=True, default='')

    # [fleet]
    fleet_size = serializers.IntegerField(min_value=0)
    walk_radius = serializers.FloatField(min_value=0, default=300.0)
    walking_speed = PositiveFloatField(default=5.0)
    riding_speed = PositiveFloatField(default=10.2)
    beta = serializers.FloatField(min_value=0, max_value=1, default=0.9)
    min_bikes_docks = serializers.IntegerField(min_value=0, default=3)
    max_attempts = serializers.IntegerField(min_value=1, default=5)

    # [autonomous]
    autonomous_speed = PositiveFloatField(default=8.0)
    autonomous_radius = serializers.FloatField(min_value=0, default=2000.0)
    rebalancing_scenario = serializers.ChoiceField(choices=[s.value for s in RebalancingScenario], default='none')
    preempt_rebalancing = serializers.BooleanField(default=True)

    # [battery]
    autonomy_km = PositiveFloatField(default=70.0)
    recharge_time_h = PositiveFloatField(default=4.5)
    min_level = serializers.FloatField(min_value=0, max_value=1, default=0.15)

    # [rebalance]
    predictor = serializers.ChoiceField(choices=list(PREDICTORS), default='baseline-historical')
    history_weeks = serializers.IntegerField(min_value=1, default=4)
    W = serializers.IntegerField(min_value=1, default=4)
    P = serializers.IntegerField(min_value=1, default=1)
    T = serializers.IntegerField(min_value=1, default=1)
    grid_resolution = PositiveFloatField(default=461.35)
    slack_cost = PositiveFloatField(required=False, allow_null=True, default=None)

    def _parse_time(self, value):
        try:
            return datetime.fromisoformat(value.strip())
        except ValueError:
            raise serializers.ValidationError('Enter an ISO 8601 date or date-time, e.g. 2019-10-07T00:00.')

    def validate_t0(self, value):
        return self._parse_time(value)

    def validate_t1(self, value):
        return self._parse_time(value)

    def validate_min_level(self, value):
        if not 0 < value < 1:
            raise serializers.ValidationError('Minimum battery level must lie strictly between 0 and 1.')
        return value

    def validate(self, attrs):
        errors = {}
        if attrs['t1'] <= attrs['t0']:
            errors['t1'] = 'Window end must be after its start.'
        if not attrs['network']:
            errors['network'] = 'A network cache file is required.'
        if not attrs['stations']:
            errors['stations'] = 'A stations file is required.'
        if not attrs['requests'] and not attrs['trips']:
            errors['requests'] = 'Give either a requests file or a trips file.'
        if attrs['rebalancing_scenario'] != 'none' and attrs['mode'] != Mode.AUTONOMOUS.value:
            errors['rebalancing_scenario'] = 'Rebalancing scenarios apply to autonomous mode only.'
        if attrs['predictor'] == 'external-file' and not attrs['forecast_file']:
            errors['forecast_file'] = 'The external-file predictor needs a forecast file.'

        if self.context.get('check_files', True):
            for name in DATA_FILES:
                if attrs[name] and not Path(attrs[name]).is_file():
                    errors.setdefault(name, f'File not found: {attrs[name]}')

        if errors:
            raise serializers.ValidationError(errors)
        return attrs


class SimulationRunSerializer(serializers.ModelSerializer):
    class Meta:
        model = SimulationRun
        fields = '__all__'


class SweepSerializer(serializers.ModelSerializer):
    runs = SimulationRunSerializer(many=True, read_only=True)

    class Meta:
        model = Sweep
        fields = ['id', 'name', 'size', 'failures', 'matrix_path', 'status', 'created_at', 'finished_at', 'runs']
