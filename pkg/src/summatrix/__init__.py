"""Digit frequencies of base-N expansions under regular summability matrices.

Exact rational statistics of digit streams, summability transforms with a
regularity audit, the window function psi, and synthesis of streams whose
averaged frequencies visit a schedule of targets.
"""

from .digits import (BlockStream, CountVector, DigitStream, FrequencyTrajectory, LiteralStream,
                     RandomStream, count_prefix, digits_of_rational, freq_prefix, freq_trajectory,
                     parse_stream, periodic)
from .schedule import (PropertyPQuery, PsiFunction, RegularityConstants, Refutation, Witness,
                       build_psi, check_property_P, compute_constants, find_j, square_plus_one)
from .simplex import Block, RationalTarget, block_for, enumerate_targets, l1_distance, parse_target
from .synthesis import (Phase, Schedule, schedule_from_json, synthesize_dense_point,
                        synthesize_for_transform, synthesize_property_P, verify_accumulation,
                        verify_dense_bound)
from .transforms import (Transform, apply_transform, averaged_freq, builtin_transform, cesaro,
                         holder, identity, silverman_toeplitz_audit, transform_from_spec, weighted)

__version__ = "0.1.0"
