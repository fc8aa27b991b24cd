"""
Asymptotics package: closed-form thin-chimney model and remainder probes.
"""

from .first_order import (FirstOrderPrediction, first_order, chimney_profile,
                          chimney_profile_derivative)
from .remainder_probe import (RemainderProbe, residual_scaling_probe, fit_exponent,
                              write_remainder_csv)
