"""viewforge: heterogeneous view documents over a common system model.

Parse type documents, object models, class descriptions and lifecycle
automata; check their well-formedness and mutual consistency over
bounded finite universes; evolve them with a twelve-rule refinement
calculus whose proof obligations are discharged by enumeration; and
simulate the described message-passing system into replayable traces.
"""

from .checker import (
    ConditionReport, check_automaton, check_consistency, witness_system,
)
from .documents import (
    ClassDescriptionDoc, LifecycleDoc, ObjectModelDoc, TransitionDef,
    TypeDocument,
)
from .logic import (
    Budget, desugar_transition, enumerate_models, evaluate, prime,
)
from .parser import parse_document, parse_formula_text, parse_term_text
from .project import DocumentSet, load_project
from .refine import (
    Obligation, RefinementScript, Step, apply_step, discharge,
    generate_obligations, load_script, oracle_refines, replay_script,
)
from .render import render_document
from .sim import Scenario, Trace, check_trace, load_scenario, simulate
from .system_model import (
    MediumState, Message, ObjectState, SignatureEnv, SystemConfig,
    induce_signatures, medium_step, object_step,
)
from .universe import Universe, build_universe

__all__ = [
    "Budget", "ClassDescriptionDoc", "ConditionReport", "DocumentSet",
    "LifecycleDoc", "MediumState", "Message", "ObjectModelDoc", "ObjectState",
    "Obligation", "RefinementScript", "Scenario", "SignatureEnv", "Step",
    "SystemConfig", "Trace", "TransitionDef", "TypeDocument", "Universe",
    "apply_step", "build_universe", "check_automaton", "check_consistency",
    "check_trace", "desugar_transition", "discharge", "enumerate_models",
    "evaluate", "generate_obligations", "induce_signatures", "load_project",
    "load_scenario", "load_script", "medium_step", "object_step",
    "oracle_refines", "parse_document", "parse_formula_text",
    "parse_term_text", "prime", "render_document", "replay_script",
    "simulate", "witness_system",
]
