from neunets.morphisms.branching import branch
from neunets.morphisms.deepening import deepen, identity_weights
from neunets.morphisms.errors import (
    ForbiddenPositionError,
    InconsistentFanOutError,
    MetadataMismatchError,
    MorphismError,
    PreconditionError,
)
from neunets.morphisms.kernel import widen_kernel
from neunets.morphisms.placement import INHERIT_CELL, produces_nonnegative
from neunets.morphisms.skip import SkipConvSpec, insert_skip
from neunets.morphisms.verify import PreservationReport, random_inputs, verify_function_preserving
from neunets.morphisms.widening import ChannelChange, adapt_multi_io, channel_group, widen_layer
