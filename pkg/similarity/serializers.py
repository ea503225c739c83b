# similarity/serializers.py
from rest_framework import serializers

from .blayer import DEFAULT_WALL_FACTOR, BLayerParams
from .core import Grid1D, linspace
from .exceptions import InvalidArgumentError
from .lake import LakeParams
from .plume import DEFAULT_TERMS, PRINTED_FORM, ROOT_MODES, PlumeParams

APPLICATIONS = (
    'lake-case1', 'lake-case2', 'blayer', 'plume-small-lambda', 'plume-large-lambda',
)

OUTPUTS = {
    'lake-case1': ('temperature(z)', 'temperature(t)', 'profile'),
    'lake-case2': ('temperature(z)', 'temperature(t)', 'profile'),
    'blayer': ('profile', 'u(y)', 'T(y)', 'wall'),
    'plume-small-lambda': ('C(x)', 'eigen-table'),
    'plume-large-lambda': ('C(x,y)', 'eigen-table'),
}


def _as_validation_error(error: InvalidArgumentError):
    return serializers.ValidationError({error.field or 'non_field_errors': [str(error)]})


class ParamsSerializer(serializers.Serializer):
    """Rejects keys that are not declared fields instead of dropping them"""

    def to_internal_value(self, data):
        if isinstance(data, dict):
            unknown = sorted(set(data) - set(self.fields))
            if unknown:
                raise serializers.ValidationError(
                    {key: [f"'{key}' is not a parameter; choose from {', '.join(self.fields)}"]
                     for key in unknown})
        return super().to_internal_value(data)


class LakeParamsSerializer(ParamsSerializer):
    alpha = serializers.FloatField()
    beta = serializers.FloatField()
    mu = serializers.FloatField(required=False, default=0.0)
    xi = serializers.FloatField()
    c2 = serializers.FloatField()
    gamma = serializers.FloatField(required=False, default=0.0)
    m = serializers.FloatField(required=False, default=1.0)
    s = serializers.FloatField(required=False, default=1.0)
    n = serializers.FloatField(required=False, default=0.0)
    h = serializers.FloatField(required=False, default=400.0)
    t0 = serializers.FloatField(required=False, default=4.0)
    case = serializers.ChoiceField(choices=[1, 2], required=False)

    def validate(self, data):
        tagged = self.context.get('case', 1)
        if data.setdefault('case', tagged) != tagged:
            raise serializers.ValidationError(
                {'case': [f"case {data['case']} contradicts the application, which is case {tagged}"]})
        try:
            return LakeParams(**data)
        except InvalidArgumentError as e:
            raise _as_validation_error(e)


class BLayerParamsSerializer(ParamsSerializer):
    prandtl = serializers.FloatField()
    a1 = serializers.FloatField(required=False, default=0.0)
    b1 = serializers.FloatField(required=False, default=1.0)
    b2 = serializers.FloatField(required=False, default=0.0)
    eta_max = serializers.FloatField(required=False, default=15.0)
    t0_scale = serializers.FloatField(required=False, default=1.0)
    flux_b1_variant = serializers.BooleanField(required=False, default=False)
    wall_factor = serializers.FloatField(required=False, default=DEFAULT_WALL_FACTOR)
    grid_points = serializers.IntegerField(required=False, default=2001, min_value=3)

    def validate(self, data):
        try:
            return BLayerParams(**data)
        except InvalidArgumentError as e:
            raise _as_validation_error(e)


class PlumeParamsSerializer(ParamsSerializer):
    u = serializers.FloatField()
    kappa1 = serializers.FloatField()
    kappa2 = serializers.FloatField()
    h = serializers.FloatField(required=False, default=1.0)
    u0 = serializers.FloatField(required=False, default=1.0)
    n_terms = serializers.IntegerField(required=False, default=DEFAULT_TERMS, min_value=1)
    root_mode = serializers.ChoiceField(choices=ROOT_MODES, required=False, default=PRINTED_FORM)

    def get_fields(self):
        fields = super().get_fields()
        # 'lambda' is a keyword, so it cannot be declared as a class attribute
        fields['lambda'] = serializers.FloatField(required=False, default=0.0)
        return fields

    def validate(self, data):
        data = dict(data)
        data['lam'] = data.pop('lambda', 0.0)
        try:
            return PlumeParams(**data)
        except InvalidArgumentError as e:
            if e.field == 'lam':
                e.field = 'lambda'
            raise _as_validation_error(e)


PARAM_SERIALIZERS = {
    'lake-case1': (LakeParamsSerializer, {'case': 1}),
    'lake-case2': (LakeParamsSerializer, {'case': 2}),
    'blayer': (BLayerParamsSerializer, {}),
    'plume-small-lambda': (PlumeParamsSerializer, {}),
    'plume-large-lambda': (PlumeParamsSerializer, {}),
}


class GridSerializer(serializers.Serializer):
    """Either start/stop/num (equal spacing) or an explicit list of points"""
    start = serializers.FloatField(required=False)
    stop = serializers.FloatField(required=False)
    num = serializers.IntegerField(required=False, min_value=2)
    points = serializers.ListField(child=serializers.FloatField(), required=False, min_length=2)

    def validate(self, data):
        name = self.context.get('name', 'x')
        try:
            if 'points' in data:
                return Grid1D.from_points(data['points'], name=name)
            missing = [key for key in ('start', 'stop', 'num') if key not in data]
            if missing:
                raise serializers.ValidationError(
                    {key: ['This field is required unless points are given.'] for key in missing})
            return linspace(data['start'], data['stop'], data['num'], name=name)
        except InvalidArgumentError as e:
            raise serializers.ValidationError({'points': [str(e)]})


class ScenarioSerializer(serializers.Serializer):
    name = serializers.CharField(required=False, default='scenario')
    description = serializers.CharField(required=False, default='', allow_blank=True)
    application = serializers.ChoiceField(choices=APPLICATIONS)
    params = serializers.DictField()
    grids = serializers.DictField(required=False, default=dict)
    outputs = serializers.ListField(child=serializers.CharField(), min_length=1)
    probes = serializers.DictField(required=False, default=dict)
    sweep = serializers.DictField(
        child=serializers.ListField(child=serializers.FloatField(), min_length=1),
        required=False, default=dict)

    def validate(self, data):
        application = data['application']
        errors = {}

        param_class, context = PARAM_SERIALIZERS[application]
        params = param_class(data=data['params'], context=context)
        if params.is_valid():
            data['params'] = params.validated_data
        else:
            errors['params'] = params.errors

        grids, grid_errors = {}, {}
        for name, grid_data in (data.get('grids') or {}).items():
            grid = GridSerializer(data=grid_data, context={'name': name})
            if grid.is_valid():
                grids[name] = grid.validated_data
            else:
                grid_errors[name] = grid.errors
        if grid_errors:
            errors['grids'] = grid_errors
        data['grids'] = grids

        allowed = OUTPUTS[application]
        unknown = [output for output in data['outputs'] if output not in allowed]
        if unknown:
            errors['outputs'] = [
                f"'{output}' is not an output of {application}; choose from {', '.join(allowed)}"
                for output in unknown
            ]

        sweep = data.get('sweep') or {}
        if len(sweep) > 1:
            errors['sweep'] = ['Only one parameter can be swept per scenario.']
        elif sweep and 'params' not in errors:
            key = next(iter(sweep))
            if key not in param_class().get_fields():
                errors['sweep'] = {key: [f"'{key}' is not a parameter of {application}"]}
            else:
                for value in sweep[key]:
                    varied = param_class(data={**self.initial_data['params'], key: value},
                                         context=context)
                    if not varied.is_valid():
                        errors['sweep'] = {key: [f"value {value} is invalid: {varied.errors}"]}
                        break

        if errors:
            raise serializers.ValidationError(errors)
        return data


def flatten_errors(errors, prefix=''):
    """{'params': {'alpha': ['msg']}} -> [('params.alpha', 'msg')]"""
    flat = []
    if isinstance(errors, dict):
        for key, value in errors.items():
            if key == 'non_field_errors':
                path = prefix
            else:
                path = f"{prefix}.{key}" if prefix else str(key)
            flat.extend(flatten_errors(value, path))
    elif isinstance(errors, (list, tuple)):
        for item in errors:
            if isinstance(item, (dict, list, tuple)):
                flat.extend(flatten_errors(item, prefix))
            else:
                flat.append((prefix, str(item)))
    else:
        flat.append((prefix, str(errors)))
    return flat


def param_attribute(key: str) -> str:
    """Scenario key -> parameter record attribute"""
    return 'lam' if key == 'lambda' else key
