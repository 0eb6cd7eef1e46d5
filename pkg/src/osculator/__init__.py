"""Connections, frames and identities on submanifolds of second-order jet
bundles, checked numerically at sample points."""

from .ambient import AmbientSpace, JetPoint, canonical_connection, christoffel, jet_transform
from .connections import InducedConnections, deflections, deflections_closed_form
from .expr import EvaluationError, Expr, ParseError, differentiate, evaluate, parse
from .identities import extract_coefficients, verify_deflection_identities, verify_ricci
from .report import dump, run
from .scenario import Scenario, ScenarioError, bundled, load
from .submanifold import Embedding, induced_nonlinear, moving_frame, prolong, restrict_coframe
from .tensor import IndexSlot, MixedDTensor, contract, transform

__version__ = "0.1.0"

__all__ = [
    "AmbientSpace",
    "JetPoint",
    "Embedding",
    "InducedConnections",
    "Scenario",
    "ScenarioError",
    "Expr",
    "ParseError",
    "EvaluationError",
    "IndexSlot",
    "MixedDTensor",
    "parse",
    "differentiate",
    "evaluate",
    "contract",
    "transform",
    "canonical_connection",
    "christoffel",
    "jet_transform",
    "prolong",
    "moving_frame",
    "induced_nonlinear",
    "restrict_coframe",
    "deflections",
    "deflections_closed_form",
    "extract_coefficients",
    "verify_ricci",
    "verify_deflection_identities",
    "run",
    "dump",
    "bundled",
    "load",
]
