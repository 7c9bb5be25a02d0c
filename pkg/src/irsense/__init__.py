"""CRB analysis, grouped movable-sensor placement and MUSIC DoA estimation
for a semi-passive IRS sensing link."""

from .channel import SystemConfig, channel_gains, dbm_to_watt, response_matrix
from .crb import (BudgetSpec, CrbReport, budget_optimal_L, crb_closed, crb_fp, crb_general,
                  crb_ms_opt, reduction_ratio, reduction_ratio_bound, trace_terms)
from .estimation import MUSIC, ArrayInterpolator, beampattern, monte_carlo_rmse, synthesize_snapshots
from .exceptions import (AmbiguityError, ConditioningError, DomainError, IrsenseError,
                         SearchSpaceError, SingularityError)
from .geometry import (PlacementVariant, SensorLayout, brute_force_optimal, closed_form_variance,
                       fp_positions, optimal_positions, validate_layout, variance)

__version__ = "0.1.0"
