"""Relative compactness of function families on finite metric measure spaces."""

from __future__ import annotations

from .averaging import (AverageProfile, average, average_at, average_values,
                        differentiation_profile, equicontinuity_chain_bound,
                        equicontinuity_modulus, family_averages, norm_bound_check,
                        pointwise_bound_check)
from .compactness import (CERTIFIED, CONDITION1_FAILED, CONDITION2_FAILED, CompactnessReport,
                          EpsilonNet, check_condition_avg, check_condition_tail,
                          construct_epsilon_net, greedy_net_oracle, is_relatively_compact,
                          kr_translation_condition, vitali_selection)
from .errors import (LipschitzBoundError, MMCompactError, NotShiftableError, ParseError,
                     PreconditionError, SpaceError)
from .lipschitz import (LnSpec, PartialFunction, density_approximant, in_Ln,
                        lipschitz_constant, mcshane_extend, phi_scale, psi_spike,
                        whitney_extend)
from .lp import (FunctionFamily, LpConfig, LpFunction, lp_distance, lp_norm, mask, support,
                 tail_norm, translate)
from .space import (MetricMeasureSpace, ball, ball_measure, build_space, circle_grid,
                    critical_radii, doubling_constant, from_coords, from_distance_matrix,
                    line_grid, min_ball_measure, random_cloud, symmetric_difference_measure)

__version__ = "0.1.0"
