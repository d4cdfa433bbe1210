"""Laboratory for online server problems on products of uniform metrics.

Simulators for three unit-weight online algorithms and a recursive weighted
one, an exact offline optimum, adversarial and random request generators,
and exact proof-style certificates over concrete runs.
"""

from .core import (
    Config,
    GKSError,
    Instance,
    InvalidInputError,
    InvariantViolationError,
    Request,
    ResourceLimitError,
    SequenceFormatError,
    hamming,
    poly_eval,
    read_sequence,
    satisfies,
    weighted_distance,
    write_sequence,
)
from .spaces import (
    FREE,
    FeasibleFamily,
    contains,
    dimension,
    family_init,
    family_update,
    has_infeasible,
    max_dimension_set,
    member,
    split,
)
from .algorithms import (
    AlternativeAlgorithm,
    DistributionTracker,
    GenericAlgorithm,
    RandomizedAlgorithm,
    Step,
)
from .offline import opt_cost, work_function_layer, work_function_minima
from .adversaries import antipodal_next, evasive_next, run_closed_loop
from .certify import (
    audit_family_counts,
    audit_phase_motion,
    audit_potential_step,
    build_phase_matrix,
    certify_transcript,
    harmonic,
    potential,
    verify_certificate,
)
from .weighted import ConstantTable, WeightedAlgorithm, constants, learning_topk, round_weights

__version__ = "0.1.0"
