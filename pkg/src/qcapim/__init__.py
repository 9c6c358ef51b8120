"""QCA bistable simulation with an Akers logic-array processing-in-memory layer."""

from .akers import (
    AkersCellSpec,
    AkersError,
    AkersNetwork,
    MemoryPlane,
    build_xor_network,
    eval_cell,
    eval_network,
    parse_network,
    read,
    store,
)
from .engine import (
    InputSchedule,
    TraceSet,
    clock_value,
    exhaustive_input_schedule,
    kink_energy,
    precompute_couplings,
    relax,
    simulate,
)
from .layout import Geometry, LayoutError, QcaCell, QcaLayout, SimParams, bounding_area, parse_layout, serialize
from .metrics import (
    DissipationReport,
    LayoutMetrics,
    dissipation_report,
    event_dissipation,
    layout_metrics,
    steady_state_coherence,
)
from .synth import synthesize_network_layout, synthesize_primitive_layout, synthesize_xor_layout
from .verification import TruthTable, VerifyReport, estimate_latency, extract_truth_table, parse_expression, verify

__version__ = "0.1.0"
