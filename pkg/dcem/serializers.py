import math
import re

from rest_framework import serializers
from rest_framework.fields import empty

from .baselines import METHOD_TAGS
from .em import INIT_CHOICES, PROPENSITY_PATIENCE, CausalReg
from .jobs import INVALID
from .nnet import DEFAULT_HIDDEN

_NUMBER = re.compile(
    r'^(?P<sign>[+-])?'
    r'(?P<coef>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)?'
    r'(?P<pi>\*?pi)?'
    r'(?:/(?P<den>\d+(?:\.\d*)?))?$'
)


def parse_number(text):
    """Decimal, fraction or multiple of pi: ``0.25``, ``1/4``, ``pi``, ``2pi/3``, ``-2*pi/3``."""
    match = _NUMBER.match(str(text).replace(' ', '').lower())
    if not match or not (match['coef'] or match['pi']):
        raise ValueError(f"not a number: {text!r}")
    if match['pi'] and match['pi'].startswith('*') and not match['coef']:
        raise ValueError(f"not a number: {text!r}")
    value = float(match['coef']) if match['coef'] else 1.0
    if match['pi']:
        value *= math.pi
    if match['den']:
        den = float(match['den'])
        if den == 0:
            raise ValueError(f"division by zero in {text!r}")
        value /= den
    return -value if match['sign'] == '-' else value


class NumberExpressionField(serializers.FloatField):
    default_error_messages = {
        'invalid': 'Expected a decimal, a fraction like 1/4 or a multiple of pi like 2pi/3.',
    }

    def to_internal_value(self, data):
        if isinstance(data, str):
            try:
                data = parse_number(data)
            except ValueError:
                self.fail('invalid')
        return super().to_internal_value(data)


class CommaSeparatedListField(serializers.ListField):
    """List field that also accepts one comma separated string."""

    def to_internal_value(self, data):
        if isinstance(data, str):
            data = [item.strip() for item in data.split(',') if item.strip()]
        return super().to_internal_value(data)


class SweepSectionSerializer(serializers.Serializer):
    q_t = CommaSeparatedListField(child=NumberExpressionField(min_value=0), allow_empty=False)
    q_y = CommaSeparatedListField(child=NumberExpressionField(min_value=0, max_value=1), allow_empty=False)
    k = CommaSeparatedListField(child=NumberExpressionField(min_value=0), allow_empty=False)
    psi = CommaSeparatedListField(child=NumberExpressionField(), allow_empty=False)
    overlap_scale = CommaSeparatedListField(child=NumberExpressionField(min_value=0), allow_empty=False,
                                            default=[1.0])
    methods = CommaSeparatedListField(child=serializers.ChoiceField(choices=METHOD_TAGS), allow_empty=False)
    seeds = CommaSeparatedListField(child=serializers.IntegerField(min_value=0), allow_empty=False, default=[0])
    n = serializers.IntegerField(min_value=1, default=20000)
    master_seed = serializers.IntegerField(min_value=0, required=False)
    workers = serializers.IntegerField(min_value=1, required=False)
    out = serializers.CharField(required=False)
    record_timing = serializers.BooleanField(default=True)

    def validate(self, attrs):
        for name in ('q_t', 'k', 'overlap_scale'):
            if any(v <= 0 for v in attrs[name]):
                raise serializers.ValidationError({name: 'Values must be positive.'})
        if any(v <= 0 for v in attrs['q_y']):
            raise serializers.ValidationError({'q_y': 'Values must lie in (0, 1].'})
        return attrs


class EMSectionSerializer(serializers.Serializer):
    max_iters = serializers.IntegerField(min_value=1, default=50)
    patience = serializers.IntegerField(min_value=1, default=3)
    warm_start = serializers.BooleanField(default=True)
    temperature = NumberExpressionField(default=1.0)
    init = serializers.ChoiceField(choices=INIT_CHOICES, default=INIT_CHOICES[0])
    causal_reg = serializers.ChoiceField(choices=[c.value for c in CausalReg], default=CausalReg.SOFT.value)

    def validate_temperature(self, value):
        if value <= 0:
            raise serializers.ValidationError('Temperature must be positive.')
        return value


class TrainSectionSerializer(serializers.Serializer):
    learning_rate = NumberExpressionField(default=1e-3)
    weight_decay = NumberExpressionField(min_value=0, default=0.0)
    epochs = serializers.IntegerField(min_value=1, default=1000)
    hidden = CommaSeparatedListField(child=serializers.IntegerField(min_value=1), default=list(DEFAULT_HIDDEN))
    propensity_epochs = serializers.IntegerField(min_value=1, default=1000)
    propensity_patience = serializers.IntegerField(min_value=1, default=PROPENSITY_PATIENCE)

    def validate_learning_rate(self, value):
        if value <= 0:
            raise serializers.ValidationError('Learning rate must be positive.')
        return value


class SweepConfigSerializer(serializers.Serializer):
    sweep = SweepSectionSerializer()
    em = EMSectionSerializer()
    train = TrainSectionSerializer()


class RocGapField(serializers.FloatField):
    """ROC gap in [0, 1], or ``invalid`` (read as None)."""

    def __init__(self, **kwargs):
        super().__init__(min_value=0, max_value=1, allow_null=True, **kwargs)

    def run_validation(self, data=empty):
        if isinstance(data, str) and data.strip() == INVALID:
            return None
        return super().run_validation(data)


class ResultRowSerializer(serializers.Serializer):
    q_t = serializers.FloatField()
    q_y = serializers.FloatField()
    k = serializers.FloatField()
    psi = serializers.FloatField()
    overlap_scale = serializers.FloatField(default=1.0)
    method = serializers.ChoiceField(choices=METHOD_TAGS)
    seed = serializers.IntegerField(min_value=0)
    auc = serializers.FloatField(min_value=0, max_value=1)
    roc_gap = RocGapField()
    n_em_iters = serializers.IntegerField(min_value=0)
    wall_ms = serializers.IntegerField(min_value=0)
