"""Model-based diagnosis by forward causal propagation.

Predicts system behavior along component causality, tracks the dependency
sets each prediction actually rests on, focuses on likely-broken components
from conflict/confirmation evidence, and advises the most informative next
probe.  Static, dynamic, and loop-containing systems are supported.
"""

from .model import (
    Component,
    Domain,
    FunctionSpec,
    Observation,
    SystemModel,
    parse_model,
    parse_observations,
    serialize,
    validate,
)
from .propagation import (
    Assumption,
    DepSets,
    Prediction,
    PredictionState,
    TimedComponent,
    enumerate_dep_sets,
    evaluate_component,
    forward_predict,
    loop_predict_assumption,
    loop_predict_stateful,
    temporal_predict,
)
from .focusing import (
    EvidenceSet,
    Focus,
    FocusSet,
    InconsistentEvidenceError,
    cancelled,
    classify,
    focus_rule1,
    focus_rule2,
    focus_rule3,
    focus_rule4,
    minimize,
    supplementary_focus,
)
from .probing import (
    ProbeAdvice,
    prob_any_broken,
    probe_bounds,
    select_probe_bounds,
    select_probe_entropy,
    select_probe_halving,
)
from .simulator import (
    FaultSpec,
    SessionTranscript,
    inject,
    minimal_hitting_set,
    run_session,
    sweep,
)

__version__ = "0.1.0"
